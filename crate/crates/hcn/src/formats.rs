//! Weight files and multi-channel tensor directories.
//!
//! A weight file is the magic `HCNW1`, the dims `A, F, H, W` as
//! little-endian `u32`, then the `A*F*H*W` bits in row-major order packed
//! most significant bit first, the last byte zero-padded.

use std::fs;
use std::path::Path;

use hcn_core::{BinaryTensor3, BinaryTensor4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pbm::{read_pbm, write_pbm, PbmEncoding};

pub const WEIGHTS_MAGIC: &[u8; 5] = b"HCNW1";
const HEADER_LEN: usize = 5 + 16;
/// Largest weight tensor accepted when loading, in bits.
pub const MAX_WEIGHT_BITS: u64 = 1 << 32;

pub fn encode_weights(w: &BinaryTensor4) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + w.len().div_ceil(8));
    out.extend_from_slice(WEIGHTS_MAGIC);
    for d in w.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    let mut byte = 0u8;
    for (i, b) in w.iter().enumerate() {
        if b {
            byte |= 0x80 >> (i % 8);
        }
        if i % 8 == 7 {
            out.push(byte);
            byte = 0;
        }
    }
    if w.len() % 8 != 0 {
        out.push(byte);
    }
    out
}

pub fn decode_weights(data: &[u8]) -> Result<BinaryTensor4> {
    if data.len() < HEADER_LEN || &data[..5] != WEIGHTS_MAGIC {
        return Err(Error::format("weights", "missing HCNW1 header"));
    }
    let mut dims = [0usize; 4];
    let mut bits: u64 = 1;
    for (k, d) in dims.iter_mut().enumerate() {
        let v = u32::from_le_bytes(data[5 + 4 * k..9 + 4 * k].try_into().expect("4 bytes"));
        if v == 0 {
            return Err(Error::format("weights", "zero dimension"));
        }
        bits = bits.saturating_mul(v as u64);
        *d = v as usize;
    }
    if bits > MAX_WEIGHT_BITS {
        return Err(Error::format("weights", "dimensions overflow"));
    }
    let payload = &data[HEADER_LEN..];
    let need = (bits as usize).div_ceil(8);
    if payload.len() < need {
        return Err(Error::format("weights", "truncated payload"));
    }
    if payload.len() > need {
        return Err(Error::format("weights", "trailing bytes after payload"));
    }
    let [a, f, h, w] = dims;
    let mut t = BinaryTensor4::zeros(a, f, h, w)?;
    for i in 0..bits as usize {
        t.set_flat(i, payload[i / 8] & (0x80 >> (i % 8)) != 0);
    }
    Ok(t)
}

pub fn read_weights(path: &Path) -> Result<BinaryTensor4> {
    decode_weights(&fs::read(path).map_err(Error::io(path))?)
}

pub fn write_weights(path: &Path, w: &BinaryTensor4) -> Result<()> {
    fs::write(path, encode_weights(w)).map_err(Error::io(path))
}

/// `manifest.json` of a tensor directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorManifest {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// One bitmap per channel, relative to the directory.
    pub files: Vec<String>,
}

pub const TENSOR_MANIFEST: &str = "manifest.json";

/// Writes one raw bitmap per channel plus a manifest into `dir`.
pub fn write_tensor_dir(dir: &Path, t: &BinaryTensor3) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let [c, h, w] = t.dims();
    let files: Vec<String> = (0..c).map(|i| format!("c{i:03}.pbm")).collect();
    for (i, f) in files.iter().enumerate() {
        write_pbm(&dir.join(f), &t.plane(i), PbmEncoding::Raw)?;
    }
    write_json(&dir.join(TENSOR_MANIFEST), &TensorManifest { channels: c, height: h, width: w, files })
}

pub fn read_tensor_dir(dir: &Path) -> Result<BinaryTensor3> {
    let m: TensorManifest = read_json(&dir.join(TENSOR_MANIFEST))?;
    if m.files.len() != m.channels || m.channels == 0 {
        return Err(Error::format("tensor manifest", "one file per channel required"));
    }
    let mut t = BinaryTensor3::zeros(m.channels, m.height, m.width)?;
    for (ch, f) in m.files.iter().enumerate() {
        let p = read_pbm(&dir.join(f))?;
        if p.dims() != [1, m.height, m.width] {
            return Err(Error::format("tensor manifest", format!("{f} has the wrong size")));
        }
        for i in 0..m.height * m.width {
            t.set_flat(ch * m.height * m.width + i, p.get_flat(i));
        }
    }
    Ok(t)
}

/// Reads an image stored either as a single bitmap or as a tensor directory.
pub fn read_image(path: &Path) -> Result<BinaryTensor3> {
    if path.is_dir() {
        read_tensor_dir(path)
    } else {
        read_pbm(path)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json { path: path.into(), source })?;
    fs::write(path, text + "\n").map_err(Error::io(path))
}
