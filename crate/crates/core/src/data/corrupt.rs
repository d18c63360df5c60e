//! Image corruption operators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::BinaryTensor3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorruptionKind {
    /// Flip each pixel with probability `rate`.
    Noise { rate: f64 },
    /// Turn on a frame `width` pixels wide.
    Border { width: usize },
    /// Turn on `count` random `size x size` blocks.
    Patches { count: usize, size: usize },
    /// Turn on every `spacing`-th row and column.
    Grid { spacing: usize },
    /// Turn on `count` random full-length rows or columns.
    LineClutter { count: usize },
    /// Turn off `count` random `size x size` blocks.
    Deletion { count: usize, size: usize },
}

impl CorruptionKind {
    pub const NAMES: [&'static str; 6] = ["noise", "border", "patches", "grid", "line_clutter", "deletion"];

    /// The named corruption with its default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "noise" => CorruptionKind::Noise { rate: 0.1 },
            "border" => CorruptionKind::Border { width: 2 },
            "patches" => CorruptionKind::Patches { count: 3, size: 6 },
            "grid" => CorruptionKind::Grid { spacing: 5 },
            "line_clutter" => CorruptionKind::LineClutter { count: 4 },
            "deletion" => CorruptionKind::Deletion { count: 3, size: 6 },
            _ => return Err(Error::UnknownCorruption),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorruptionKind::Noise { .. } => "noise",
            CorruptionKind::Border { .. } => "border",
            CorruptionKind::Patches { .. } => "patches",
            CorruptionKind::Grid { .. } => "grid",
            CorruptionKind::LineClutter { .. } => "line_clutter",
            CorruptionKind::Deletion { .. } => "deletion",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            CorruptionKind::Noise { rate } => (0.0..=1.0).contains(&rate),
            CorruptionKind::Grid { spacing } => spacing > 0,
            CorruptionKind::Patches { size, .. } | CorruptionKind::Deletion { size, .. } => size > 0,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("corruption parameter out of range"))
        }
    }
}

fn fill_block(x: &mut BinaryTensor3, r0: usize, c0: usize, size: usize, v: bool) {
    let [f, h, w] = x.dims();
    for ch in 0..f {
        for r in r0..(r0 + size).min(h) {
            for c in c0..(c0 + size).min(w) {
                x.set(ch, r, c, v);
            }
        }
    }
}

/// Applies `kind` to every channel of `image`.
pub fn corrupt(image: &BinaryTensor3, kind: CorruptionKind, seed: u64) -> Result<BinaryTensor3> {
    kind.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = image.clone();
    let [f, h, w] = x.dims();
    match kind {
        CorruptionKind::Noise { rate } => {
            for i in 0..x.len() {
                if rng.random::<f64>() < rate {
                    x.set_flat(i, !x.get_flat(i));
                }
            }
        }
        CorruptionKind::Border { width } => {
            for ch in 0..f {
                for r in 0..h {
                    for c in 0..w {
                        if r < width || c < width || r + width >= h || c + width >= w {
                            x.set(ch, r, c, true);
                        }
                    }
                }
            }
        }
        CorruptionKind::Patches { count, size } | CorruptionKind::Deletion { count, size } => {
            let on = matches!(kind, CorruptionKind::Patches { .. });
            for _ in 0..count {
                let r0 = rng.random_range(0..=h.saturating_sub(size));
                let c0 = rng.random_range(0..=w.saturating_sub(size));
                fill_block(&mut x, r0, c0, size, on);
            }
        }
        CorruptionKind::Grid { spacing } => {
            for ch in 0..f {
                for r in 0..h {
                    for c in 0..w {
                        if r % spacing == 0 || c % spacing == 0 {
                            x.set(ch, r, c, true);
                        }
                    }
                }
            }
        }
        CorruptionKind::LineClutter { count } => {
            for _ in 0..count {
                let horizontal = rng.random_bool(0.5);
                let k = rng.random_range(0..if horizontal { h } else { w });
                for ch in 0..f {
                    for t in 0..if horizontal { w } else { h } {
                        let (r, c) = if horizontal { (k, t) } else { (t, k) };
                        x.set(ch, r, c, true);
                    }
                }
            }
        }
    }
    Ok(x)
}
