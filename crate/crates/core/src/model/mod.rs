//! Hierarchical compositional network structure: layer shapes, binary
//! convolution, pooling connectivity and factor-graph construction.

mod conv;
mod graph;
mod pooling;
pub mod trees;

use alloc::vec::Vec;

pub use conv::bconv;
pub use graph::{build_hcn_graph, GraphOptions, HcnGraph, ImageLayer, ImageVars, LayerGroups, WeightMode};
pub use pooling::{pooling_connectivity, PoolConnectivity};
pub use trees::{andor_tree_update, class_tree_update};

use crate::error::{Error, Result};

/// One convolutional feature layer and the pooling layer below it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub num_features: usize,
    pub feat_h: usize,
    pub feat_w: usize,
    pub pool_h: usize,
    pub pool_w: usize,
}

impl LayerSpec {
    /// A layer without pooling: its representation is the layer below.
    pub fn unpooled(num_features: usize, feat_h: usize, feat_w: usize) -> Self {
        LayerSpec { num_features, feat_h, feat_w, pool_h: 1, pool_w: 1 }
    }

    pub fn has_pooling(&self) -> bool {
        self.pool_h > 1 || self.pool_w > 1
    }
}

/// Categories on top of the network: `classes` mutually exclusive classes,
/// each with `templates` mutually exclusive templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassLayer {
    pub classes: usize,
    pub templates: usize,
}

/// Network shape.
///
/// `layers` is ordered bottom-up: `layers[0]` is layer 1, the one whose
/// representation is pooled into the image. Without a class layer the top
/// sparsification has an independent Bernoulli prior, which is the
/// standalone single-layer model when there is one unpooled layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    /// `(channels, rows, cols)` of each image.
    pub image: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub classes: Option<ClassLayer>,
}

/// Array shapes of one layer, derived from the architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShapes {
    /// Sparsification of the layer below (`S^{l-1}`), same shape as `r`.
    pub below: [usize; 3],
    /// Representation `R^l`.
    pub r: [usize; 3],
    /// Sparsification `S^l`.
    pub s: [usize; 3],
    /// Weights `W^l` as `(channels_below, features, rows, cols)`.
    pub w: [usize; 4],
}

impl Architecture {
    pub fn single_layer(image: [usize; 3], num_features: usize, feat_h: usize, feat_w: usize) -> Self {
        Architecture { image, layers: alloc::vec![LayerSpec::unpooled(num_features, feat_h, feat_w)], classes: None }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Shapes of every layer, bottom first, checking the convolution relation
    /// `H_R = H_W + H_S - 1` and, with a class layer, a `1 x 1 x JK` top.
    pub fn shapes(&self) -> Result<Vec<LayerShapes>> {
        if self.layers.is_empty() {
            return Err(Error::Config("architecture needs at least one layer"));
        }
        if self.image.contains(&0) {
            return Err(Error::Config("image dims must be positive"));
        }
        let mut below = self.image;
        let mut out = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            if l.num_features == 0 || l.feat_h == 0 || l.feat_w == 0 || l.pool_h == 0 || l.pool_w == 0 {
                return Err(Error::Config("layer sizes must be positive"));
            }
            if l.pool_h % 2 == 0 || l.pool_w % 2 == 0 {
                return Err(Error::Config("pool sizes must be odd"));
            }
            if l.feat_h > below[1] || l.feat_w > below[2] {
                return Err(Error::Config("feature larger than the layer below"));
            }
            let s = [l.num_features, below[1] - l.feat_h + 1, below[2] - l.feat_w + 1];
            out.push(LayerShapes { below, r: below, s, w: [below[0], l.num_features, l.feat_h, l.feat_w] });
            below = s;
        }
        if let Some(c) = self.classes {
            if c.classes == 0 || c.templates == 0 {
                return Err(Error::Config("class layer needs classes and templates"));
            }
            if below != [c.classes * c.templates, 1, 1] {
                return Err(Error::Config("top sparsification must be 1 x 1 x (templates * classes)"));
            }
        }
        Ok(out)
    }
}

/// Scalar model and learning parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// `P(x = 0 | s = 1)`.
    pub p01: f64,
    /// `P(x = 1 | s = 0)`.
    pub p10: f64,
    /// Prior on the top sparsification when there is no class layer.
    pub p_s: f64,
    /// Weight prior per layer, bottom first.
    pub p_w: Vec<f64>,
    /// Damping of the bottom-up pool messages.
    pub alpha: f64,
    /// Forgetting factor for online learning.
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Hyperparams {
    pub fn validate(&self, arch: &Architecture) -> Result<()> {
        let open = |p: f64| p > 0.0 && p < 1.0;
        if !(self.p01 > 0.0 && self.p01 < 0.5 && self.p10 > 0.0 && self.p10 < 0.5) {
            return Err(Error::Config("p01 and p10 must lie in (0, 0.5)"));
        }
        if !open(self.p_s) {
            return Err(Error::Config("p_s must lie in (0, 1)"));
        }
        if self.p_w.len() != arch.layers.len() || !self.p_w.iter().all(|&p| open(p)) {
            return Err(Error::Config("one p_w in (0, 1) per layer"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config("damping must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config("forgetting factor must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// `log(p / (1 - p))`.
pub fn log_odds(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}
