//! Synthetic datasets, corruption operators and the compression metric.

mod corrupt;
mod font;
mod metrics;
mod scenes;
mod shapes;

pub use corrupt::{corrupt, CorruptionKind};
pub use font::{glyph, ALPHABET, GLYPH_H, GLYPH_W};
pub use metrics::{binary_entropy, compression_ratio, discard_unused, encoding_cost, feature_match_distances};
pub use scenes::{letters, scene_dataset, symbol_glyphs, symbols, text, two_bars, SceneSpec};
pub use shapes::{gen_shapes_dataset, shapes_architecture, shapes_weights, ShapesConfig};

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{bconv, pooling_connectivity, Architecture, Hyperparams};
use crate::tensor::{BinaryTensor3, BinaryTensor4};

/// A set of equally shaped binary images with optional ground truth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub images: Vec<BinaryTensor3>,
    pub labels: Option<Vec<usize>>,
    /// Generating template of every image, when known.
    pub templates: Option<Vec<usize>>,
    /// Images before the noisy channel.
    pub clean: Option<Vec<BinaryTensor3>>,
    /// Weights that generated the data, bottom layer first.
    pub planted: Option<Vec<BinaryTensor4>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Checks equal shapes and consistent side information.
    pub fn validate(&self, num_classes: Option<usize>) -> Result<()> {
        if let Some(first) = self.images.first() {
            if self.images.iter().any(|x| x.dims() != first.dims()) {
                return Err(Error::Shape("images differ in shape"));
            }
        }
        for side in [&self.labels, &self.templates].into_iter().flatten() {
            if side.len() != self.images.len() {
                return Err(Error::Shape("one label per image"));
            }
        }
        if let (Some(k), Some(l)) = (num_classes, &self.labels) {
            if l.iter().any(|&c| c >= k) {
                return Err(Error::Shape("label out of range"));
            }
        }
        if let Some(c) = &self.clean {
            if c.len() != self.images.len() || c.iter().zip(&self.images).any(|(a, b)| a.dims() != b.dims()) {
                return Err(Error::Shape("clean images do not match"));
            }
        }
        Ok(())
    }

    /// Labels as optional per-image slots, as taken by the learners.
    pub fn label_slots(&self) -> Vec<Option<usize>> {
        match &self.labels {
            Some(l) => l.iter().map(|&c| Some(c)).collect(),
            None => Vec::new(),
        }
    }

    /// The first `n` images and their side information.
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: self.images[..n].to_vec(),
            labels: self.labels.as_ref().map(|v| v[..n].to_vec()),
            templates: self.templates.as_ref().map(|v| v[..n].to_vec()),
            clean: self.clean.as_ref().map(|v| v[..n].to_vec()),
            planted: self.planted.clone(),
        }
    }
}

/// Passes a clean image through the bit-flip channel: an on pixel turns off
/// with probability `p01`, an off pixel turns on with probability `p10`.
pub fn noisy_channel<R: Rng>(clean: &BinaryTensor3, p01: f64, p10: f64, rng: &mut R) -> BinaryTensor3 {
    let mut x = clean.clone();
    for i in 0..x.len() {
        let on = clean.get_flat(i);
        let flip = rng.random::<f64>() < if on { p01 } else { p10 };
        x.set_flat(i, on ^ flip);
    }
    x
}

/// Moves every active element to a uniformly chosen position of the
/// centered `pool_h x pool_w` window, skipping positions outside the array,
/// and ORs the results.
pub fn jitter<R: Rng>(r: &BinaryTensor3, pool_h: usize, pool_w: usize, rng: &mut R) -> BinaryTensor3 {
    let pc = pooling_connectivity(r.dims(), pool_h, pool_w);
    let [f, h, w] = r.dims();
    let mut out = BinaryTensor3::zeros(f, h, w).expect("dims already valid");
    for (i, shifts) in pc.pools.iter().enumerate() {
        if r.get_flat(i) {
            let u = rng.random_range(shifts.clone());
            out.set_flat(pc.target[u as usize] as usize, true);
        }
    }
    out
}

/// Samples a top-layer sparsification through the network: convolution
/// with each layer's weights, then (when the layer pools and `jitter_on`)
/// a random shift of every active element.
pub fn render_sample<R: Rng>(
    arch: &Architecture,
    weights: &[BinaryTensor4],
    top_s: &BinaryTensor3,
    jitter_on: bool,
    rng: &mut R,
) -> Result<BinaryTensor3> {
    if weights.len() != arch.layers.len() {
        return Err(Error::Shape("one weight tensor per layer"));
    }
    let mut s = top_s.clone();
    for (spec, w) in arch.layers.iter().zip(weights).rev() {
        let r = bconv(&s, w)?;
        s = if jitter_on && spec.has_pooling() { jitter(&r, spec.pool_h, spec.pool_w, rng) } else { r };
    }
    Ok(s)
}

/// Samples `n` images from a single unpooled layer with the given weights:
/// `S ~ Bernoulli(p_s)`, `R = bconv(S, W)`, then the noisy channel.
pub fn sample_with_weights(
    w: &BinaryTensor4,
    image: [usize; 3],
    n: usize,
    p_s: f64,
    p01: f64,
    p10: f64,
    seed: u64,
) -> Result<Dataset> {
    let [a, f, h, ww] = w.dims();
    if a != image[0] || h > image[1] || ww > image[2] {
        return Err(Error::Shape("weights do not fit the image"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hs, ws) = (image[1] - h + 1, image[2] - ww + 1);
    let mut images = Vec::with_capacity(n);
    let mut clean = Vec::with_capacity(n);
    for _ in 0..n {
        let s = BinaryTensor3::from_fn(f, hs, ws, |_, _, _| rng.random::<f64>() < p_s)?;
        let r = bconv(&s, w)?;
        images.push(noisy_channel(&r, p01, p10, &mut rng));
        clean.push(r);
    }
    Ok(Dataset { images, labels: None, templates: None, clean: Some(clean), planted: Some(alloc::vec![w.clone()]) })
}

/// Samples weights `W ~ Bernoulli(p_w)` and then `n` images from the
/// single-layer model of `arch` (one unpooled layer, no classes).
pub fn sample_single_layer(arch: &Architecture, hyper: &Hyperparams, n: usize, seed: u64) -> Result<Dataset> {
    hyper.validate(arch)?;
    let shapes = arch.shapes()?;
    if shapes.len() != 1 || arch.layers[0].has_pooling() || arch.classes.is_some() {
        return Err(Error::Config("single-layer sampling needs one unpooled layer without classes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [a, f, h, w] = shapes[0].w;
    let pw = hyper.p_w[0];
    let wt = BinaryTensor4::from_fn(a, f, h, w, |_, _, _, _| rng.random::<f64>() < pw)?;
    sample_with_weights(&wt, arch.image, n, hyper.p_s, hyper.p01, hyper.p10, rng.random())
}
