//! Single-layer test scenes: glyphs scattered over a canvas.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::font::{glyph, GLYPH_H, GLYPH_W};
use super::{noisy_channel, Dataset};
use crate::error::{Error, Result};
use crate::tensor::BinaryTensor3;

/// Where and what to draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    /// Single-channel glyph bitmaps.
    pub glyphs: Vec<BinaryTensor3>,
    /// Glyph placements per image. Glyph `i % glyphs.len()` is used for the
    /// `i`-th placement unless `random_glyphs` is set.
    pub placements: usize,
    pub random_glyphs: bool,
    /// Minimum empty margin between bounding boxes.
    pub gap: usize,
    /// Symmetric bit-flip probability applied after drawing.
    pub noise: f64,
}

const MAX_TRIES: usize = 10_000;

fn draw<R: Rng>(spec: &SceneSpec, rng: &mut R) -> Result<BinaryTensor3> {
    let mut img = BinaryTensor3::zeros(1, spec.height, spec.width)?;
    let mut boxes: Vec<(usize, usize, usize, usize)> = Vec::new();
    let mut tries = 0;
    let mut placed = 0;
    while placed < spec.placements {
        let gi = if spec.random_glyphs { rng.random_range(0..spec.glyphs.len()) } else { placed % spec.glyphs.len() };
        let g = &spec.glyphs[gi];
        let [_, gh, gw] = g.dims();
        if gh > spec.height || gw > spec.width {
            return Err(Error::Shape("glyph larger than the canvas"));
        }
        let r = rng.random_range(0..=spec.height - gh);
        let c = rng.random_range(0..=spec.width - gw);
        let d = spec.gap;
        let clear = boxes.iter().all(|&(br, bc, bh, bw)| {
            r >= br + bh + d || br >= r + gh + d || c >= bc + bw + d || bc >= c + gw + d
        });
        tries += 1;
        if tries > MAX_TRIES {
            log::warn!("placed only {placed} of {} glyphs", spec.placements);
            break;
        }
        if !clear {
            continue;
        }
        for y in 0..gh {
            for x in 0..gw {
                if g.get(0, y, x) {
                    img.set(0, r + y, c + x, true);
                }
            }
        }
        boxes.push((r, c, gh, gw));
        placed += 1;
    }
    Ok(img)
}

/// Draws `n` images from `spec`.
pub fn scene_dataset(spec: &SceneSpec, n: usize, seed: u64) -> Result<Dataset> {
    if spec.glyphs.is_empty() || spec.glyphs.iter().any(|g| g.dims()[0] != 1) {
        return Err(Error::Config("scenes need single-channel glyphs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(n);
    let mut clean = Vec::with_capacity(n);
    for _ in 0..n {
        let c = draw(spec, &mut rng)?;
        images.push(if spec.noise > 0.0 { noisy_channel(&c, spec.noise, spec.noise, &mut rng) } else { c.clone() });
        clean.push(c);
    }
    Ok(Dataset { images, clean: Some(clean), ..Dataset::default() })
}

fn bitmap(rows: &[&str]) -> BinaryTensor3 {
    let w = rows[0].len();
    BinaryTensor3::from_fn(1, rows.len(), w, |_, r, c| rows[r].as_bytes()[c] == b'#').expect("non-empty bitmap")
}

/// One image with three horizontal and three vertical bars of length 5.
pub fn two_bars(seed: u64) -> Result<Dataset> {
    let spec = SceneSpec {
        height: 16,
        width: 16,
        glyphs: alloc::vec![bitmap(&["#####"]), bitmap(&["#", "#", "#", "#", "#"])],
        placements: 6,
        random_glyphs: false,
        gap: 1,
        noise: 0.0,
    };
    scene_dataset(&spec, 1, seed)
}

/// The four `9 x 9` symbols: square, ring, cross and thick plus.
pub fn symbol_glyphs() -> Vec<BinaryTensor3> {
    let f = |p: fn(usize, usize) -> bool| BinaryTensor3::from_fn(1, 9, 9, |_, r, c| p(r, c)).expect("9x9");
    alloc::vec![
        f(|r, c| r == 0 || r == 8 || c == 0 || c == 8),
        f(|r, c| (10..=20).contains(&((r as i32 - 4).pow(2) + (c as i32 - 4).pow(2)))),
        f(|r, c| r == c || r + c == 8),
        f(|r, c| r.abs_diff(4) <= 1 || c.abs_diff(4) <= 1),
    ]
}

/// One `80 x 80` image with 40 symbols, at least one pixel apart.
pub fn symbols(seed: u64) -> Result<Dataset> {
    let spec = SceneSpec {
        height: 80,
        width: 80,
        glyphs: symbol_glyphs(),
        placements: 40,
        random_glyphs: false,
        gap: 1,
        noise: 0.0,
    };
    scene_dataset(&spec, 1, seed)
}

/// `n` images of `per_image` letters drawn at random from `alphabet`.
pub fn letters(
    alphabet: &str,
    n: usize,
    per_image: usize,
    size: (usize, usize),
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    let glyphs: Vec<_> = alphabet.chars().map(glyph).collect::<Option<_>>().ok_or(Error::Config("unknown letter"))?;
    if glyphs.is_empty() {
        return Err(Error::Config("empty alphabet"));
    }
    let spec = SceneSpec {
        height: size.0,
        width: size.1,
        glyphs,
        placements: per_image,
        random_glyphs: true,
        gap: 0,
        noise,
    };
    scene_dataset(&spec, n, seed)
}

/// One image of lines of random words over `alphabet`, one blank column
/// between letters, three between words and two blank rows between lines.
pub fn text(alphabet: &str, height: usize, width: usize, noise: f64, seed: u64) -> Result<Dataset> {
    let glyphs: Vec<_> = alphabet.chars().map(glyph).collect::<Option<_>>().ok_or(Error::Config("unknown letter"))?;
    if glyphs.is_empty() || height < GLYPH_H || width < GLYPH_W {
        return Err(Error::Config("text needs letters and room for one"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = BinaryTensor3::zeros(1, height, width)?;
    let mut top = 1;
    while top + GLYPH_H <= height {
        let mut left = 1;
        'line: loop {
            let len = rng.random_range(2..=5);
            if left + len * (GLYPH_W + 1) > width {
                break 'line;
            }
            for _ in 0..len {
                let g = &glyphs[rng.random_range(0..glyphs.len())];
                for y in 0..GLYPH_H {
                    for x in 0..GLYPH_W {
                        if g.get(0, y, x) {
                            img.set(0, top + y, left + x, true);
                        }
                    }
                }
                left += GLYPH_W + 1;
            }
            left += 2;
        }
        top += GLYPH_H + 2;
    }
    let x = if noise > 0.0 { noisy_channel(&img, noise, noise, &mut rng) } else { img.clone() };
    Ok(Dataset { images: alloc::vec![x], clean: Some(alloc::vec![img]), ..Dataset::default() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_bars_draws_six_bars() {
        let d = two_bars(0).unwrap();
        assert_eq!(d.images[0].count_ones(), 30);
    }

    #[test]
    fn symbols_do_not_overlap() {
        let d = symbols(1).unwrap();
        let g = symbol_glyphs();
        let expected: usize = (0..40).map(|i| g[i % 4].count_ones()).sum();
        assert_eq!(d.images[0].count_ones(), expected);
    }

    #[test]
    fn letters_with_noise_differ_from_clean() {
        let d = letters("ABC", 3, 2, (16, 16), 0.05, 2).unwrap();
        assert_eq!(d.len(), 3);
        let c = d.clean.as_ref().unwrap();
        assert!(d.images.iter().zip(c).any(|(x, c)| x != c));
    }

    #[test]
    fn text_fills_lines() {
        let d = text("ABCD", 20, 40, 0.0, 4).unwrap();
        assert!(d.images[0].count_ones() > 50);
    }
}
