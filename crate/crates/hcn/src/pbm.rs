//! Portable bitmap (PBM) reading and writing, plain (`P1`) and raw (`P4`).
//!
//! A set pixel (`1`, black) is an active image element.

use std::fs;
use std::path::Path;

use hcn_core::BinaryTensor3;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbmEncoding {
    Plain,
    Raw,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while self.data.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format("PBM", "expected a number in the header"));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::format("PBM", "dimension out of range"))
    }
}

/// Decodes a PBM image into a `1 x height x width` tensor.
pub fn decode_pbm(data: &[u8]) -> Result<BinaryTensor3> {
    let raw = match data.get(..2) {
        Some(b"P1") => false,
        Some(b"P4") => true,
        _ => return Err(Error::format("PBM", "missing P1/P4 magic")),
    };
    let mut cur = Cursor { data, pos: 2 };
    let width = cur.number()?;
    let height = cur.number()?;
    if width == 0 || height == 0 {
        return Err(Error::format("PBM", "zero dimension"));
    }
    let n = width.checked_mul(height).filter(|&n| n <= 1 << 32).ok_or_else(|| Error::format("PBM", "image too large"))?;
    let mut img = BinaryTensor3::zeros(1, height, width)?;
    if raw {
        if !cur.data.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(Error::format("PBM", "missing separator before raster"));
        }
        cur.pos += 1;
        let stride = width.div_ceil(8);
        let body = &data[cur.pos..];
        if body.len() < stride * height {
            return Err(Error::format("PBM", "truncated raster"));
        }
        for r in 0..height {
            for c in 0..width {
                let byte = body[r * stride + c / 8];
                img.set(0, r, c, byte & (0x80 >> (c % 8)) != 0);
            }
        }
    } else {
        let mut i = 0;
        for &b in &data[cur.pos..] {
            match b {
                b'0' | b'1' if i < n => {
                    img.set_flat(i, b == b'1');
                    i += 1;
                }
                b'0' | b'1' => return Err(Error::format("PBM", "too many pixels")),
                b if b.is_ascii_whitespace() => {}
                _ => return Err(Error::format("PBM", "unexpected byte in raster")),
            }
        }
        if i < n {
            return Err(Error::format("PBM", "truncated raster"));
        }
    }
    Ok(img)
}

/// Encodes channel 0 of `img`.
pub fn encode_pbm(img: &BinaryTensor3, encoding: PbmEncoding) -> Vec<u8> {
    let [_, h, w] = img.dims();
    let mut out = Vec::new();
    match encoding {
        PbmEncoding::Plain => {
            out.extend_from_slice(format!("P1\n{w} {h}\n").as_bytes());
            for r in 0..h {
                for c in 0..w {
                    out.push(if img.get(0, r, c) { b'1' } else { b'0' });
                    if (c + 1) % 70 == 0 && c + 1 < w {
                        out.push(b'\n');
                    }
                }
                out.push(b'\n');
            }
        }
        PbmEncoding::Raw => {
            out.extend_from_slice(format!("P4\n{w} {h}\n").as_bytes());
            for r in 0..h {
                for chunk in 0..w.div_ceil(8) {
                    let mut byte = 0u8;
                    for bit in 0..8 {
                        let c = chunk * 8 + bit;
                        if c < w && img.get(0, r, c) {
                            byte |= 0x80 >> bit;
                        }
                    }
                    out.push(byte);
                }
            }
        }
    }
    out
}

pub fn read_pbm(path: &Path) -> Result<BinaryTensor3> {
    decode_pbm(&fs::read(path).map_err(Error::io(path))?)
}

pub fn write_pbm(path: &Path, img: &BinaryTensor3, encoding: PbmEncoding) -> Result<()> {
    fs::write(path, encode_pbm(img, encoding)).map_err(Error::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BinaryTensor3 {
        BinaryTensor3::from_fn(1, 5, 11, |_, r, c| (r * 3 + c) % 4 == 0).unwrap()
    }

    #[test]
    fn round_trips_both_encodings() {
        let img = sample();
        for enc in [PbmEncoding::Plain, PbmEncoding::Raw] {
            assert_eq!(decode_pbm(&encode_pbm(&img, enc)).unwrap(), img);
        }
    }

    #[test]
    fn plain_and_raw_agree() {
        let plain = b"P1\n# a comment\n3 2\n1 0 1\n0 1 0\n";
        let raw = [b"P4\n3 2\n".as_slice(), &[0b1010_0000, 0b0100_0000]].concat();
        assert_eq!(decode_pbm(plain).unwrap(), decode_pbm(&raw).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode_pbm(b"P2\n1 1\n0\n").is_err());
        assert!(decode_pbm(b"P1\n2 2\n1 0 1\n").is_err());
        assert!(decode_pbm(b"P4\n9 1\n\x00").is_err());
        assert!(decode_pbm(b"P1\n0 2\n").is_err());
    }
}
