//! Two-layer synthetic dataset: a square with four holes or a circle,
//! with a forward or backward diagonal to its right.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{noisy_channel, render_sample, Dataset};
use crate::error::Result;
use crate::model::{Architecture, ClassLayer, LayerSpec};
use crate::tensor::{BinaryTensor3, BinaryTensor4};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapesConfig {
    /// Jitter trait positions and then pixel positions within 3 x 3.
    pub jitter: bool,
    /// Symmetric bit-flip probability.
    pub flip: f64,
}

impl Default for ShapesConfig {
    fn default() -> Self {
        ShapesConfig { jitter: true, flip: 1e-3 }
    }
}

/// Columns between the shape and the diagonal in a layer 2 template.
const DIAG_OFFSET: usize = 10;

/// `11 x 21` images; layer 1 has four `9 x 9` traits, layer 2 four `3 x 13`
/// templates, both with `3 x 3` pooling.
pub fn shapes_architecture(classes: ClassLayer) -> Architecture {
    Architecture {
        image: [1, 11, 21],
        layers: alloc::vec![
            LayerSpec { num_features: 4, feat_h: 9, feat_w: 9, pool_h: 3, pool_w: 3 },
            LayerSpec { num_features: 4, feat_h: 3, feat_w: 3 + DIAG_OFFSET, pool_h: 3, pool_w: 3 },
        ],
        classes: Some(classes),
    }
}

fn trait_pixel(t: usize, r: usize, c: usize) -> bool {
    match t {
        // square outline with a gap in the middle of every side
        0 => (r == 0 || r == 8 || c == 0 || c == 8) && r != 4 && c != 4,
        // small enough that a jittered square cannot cover it
        1 => {
            let d2 = (r as i32 - 4).pow(2) + (c as i32 - 4).pow(2);
            (4..=5).contains(&d2)
        }
        2 => r + c == 8,
        _ => r == c,
    }
}

/// Generating weights. Layer 1 features are square, circle, forward and
/// backward diagonal. Template `t` belongs to class `t / 2`, uses the square
/// when `t` is even, and the diagonal that makes the class the XOR of the
/// two traits. The diagonal sits `DIAG_OFFSET` columns right of the shape.
pub fn shapes_weights() -> Vec<BinaryTensor4> {
    let w1 = BinaryTensor4::from_fn(1, 4, 9, 9, |_, f, r, c| trait_pixel(f, r, c)).expect("static dims");
    let w2 = BinaryTensor4::from_fn(4, 4, 3, 3 + DIAG_OFFSET, |a, t, r, c| {
        let (label, shape) = (t / 2, t % 2);
        let diag = label ^ shape;
        r == 1 && ((c == 1 && a == shape) || (c == 1 + DIAG_OFFSET && a == 2 + diag))
    })
    .expect("static dims");
    alloc::vec![w1, w2]
}

fn sample(n: usize, cfg: ShapesConfig, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let arch = shapes_architecture(ClassLayer { classes: 2, templates: 2 });
    let weights = shapes_weights();
    let mut d = Dataset {
        labels: Some(Vec::with_capacity(n)),
        templates: Some(Vec::with_capacity(n)),
        clean: Some(Vec::with_capacity(n)),
        planted: Some(weights.clone()),
        ..Dataset::default()
    };
    for _ in 0..n {
        let t = rng.random_range(0..4);
        let top = BinaryTensor3::from_fn(4, 1, 1, |f, _, _| f == t)?;
        let clean = render_sample(&arch, &weights, &top, cfg.jitter, rng)?;
        let x = if cfg.flip > 0.0 { noisy_channel(&clean, cfg.flip, cfg.flip, rng) } else { clean.clone() };
        d.images.push(x);
        d.clean.as_mut().expect("set above").push(clean);
        d.labels.as_mut().expect("set above").push(t / 2);
        d.templates.as_mut().expect("set above").push(t);
    }
    Ok(d)
}

/// Training and test sets with labels (`shape XOR diagonal`) and the
/// generating template of every image.
pub fn gen_shapes_dataset(n_train: usize, n_test: usize, seed: u64, cfg: ShapesConfig) -> Result<(Dataset, Dataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = sample(n_train, cfg, &mut rng)?;
    let test = sample(n_test, cfg, &mut rng)?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_jitter_no_noise_gives_four_images() {
        let cfg = ShapesConfig { jitter: false, flip: 0.0 };
        let (train, _) = gen_shapes_dataset(200, 0, 1, cfg).unwrap();
        let mut distinct: Vec<&BinaryTensor3> = Vec::new();
        for x in &train.images {
            if !distinct.contains(&x) {
                distinct.push(x);
            }
        }
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn label_is_xor_of_traits() {
        let w = &shapes_weights()[1];
        for t in 0..4 {
            let shape = (0..2).find(|&a| w.get(a, t, 1, 1)).unwrap();
            let diag = (2..4).find(|&a| w.get(a, t, 1, 1 + DIAG_OFFSET)).unwrap() - 2;
            assert_eq!(t / 2, shape ^ diag);
        }
    }

    #[test]
    fn flip_rate_matches() {
        let cfg = ShapesConfig { jitter: true, flip: 1e-3 };
        let (train, _) = gen_shapes_dataset(2000, 0, 5, cfg).unwrap();
        let flips: usize =
            train.images.iter().zip(train.clean.as_ref().unwrap()).map(|(x, c)| x.hamming(c).unwrap()).sum();
        let n = 2000.0 * 231.0;
        let sd = libm::sqrt(n * 1e-3f64);
        assert!((flips as f64 - n * 1e-3).abs() < 3.0 * sd, "{flips}");
    }
}
