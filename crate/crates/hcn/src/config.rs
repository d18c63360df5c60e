//! Run configuration: serializable mirrors of the model types, data
//! sources and per-command settings.

use std::path::PathBuf;

use hcn_core::model::{Architecture, ClassLayer, Hyperparams, LayerSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub features: usize,
    pub feature_size: [usize; 2],
    #[serde(default = "one_by_one")]
    pub pool: [usize; 2],
}

fn one_by_one() -> [usize; 2] {
    [1, 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    pub classes: usize,
    pub templates: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    /// `[channels, rows, cols]`.
    pub image: [usize; 3],
    /// Bottom layer first.
    pub layers: Vec<LayerConfig>,
    #[serde(default)]
    pub classes: Option<ClassConfig>,
}

impl ArchConfig {
    pub fn to_arch(&self) -> Result<Architecture> {
        let arch = Architecture {
            image: self.image,
            layers: self
                .layers
                .iter()
                .map(|l| LayerSpec {
                    num_features: l.features,
                    feat_h: l.feature_size[0],
                    feat_w: l.feature_size[1],
                    pool_h: l.pool[0],
                    pool_w: l.pool[1],
                })
                .collect(),
            classes: self.classes.map(|c| ClassLayer { classes: c.classes, templates: c.templates }),
        };
        arch.shapes()?;
        Ok(arch)
    }

    pub fn from_arch(arch: &Architecture) -> Self {
        ArchConfig {
            image: arch.image,
            layers: arch
                .layers
                .iter()
                .map(|l| LayerConfig {
                    features: l.num_features,
                    feature_size: [l.feat_h, l.feat_w],
                    pool: [l.pool_h, l.pool_w],
                })
                .collect(),
            classes: arch.classes.map(|c| ClassConfig { classes: c.classes, templates: c.templates }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperConfig {
    pub p01: f64,
    pub p10: f64,
    #[serde(default = "default_p_s")]
    pub p_s: f64,
    pub p_w: Vec<f64>,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    pub epochs: usize,
}

fn default_p_s() -> f64 {
    0.01
}

fn one() -> f64 {
    1.0
}

impl HyperConfig {
    pub fn to_hyper(&self, seed: u64) -> Hyperparams {
        Hyperparams {
            p01: self.p01,
            p10: self.p10,
            p_s: self.p_s,
            p_w: self.p_w.clone(),
            alpha: self.alpha,
            lambda: self.lambda,
            epochs: self.epochs,
            seed,
        }
    }

    pub fn from_hyper(h: &Hyperparams) -> Self {
        HyperConfig {
            p01: h.p01,
            p10: h.p10,
            p_s: h.p_s,
            p_w: h.p_w.clone(),
            alpha: h.alpha,
            lambda: h.lambda,
            epochs: h.epochs,
        }
    }
}

/// Where the images come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    TwoBars,
    Symbols,
    Letters { alphabet: String, images: usize, per_image: usize, size: [usize; 2], noise: f64 },
    Text { alphabet: String, size: [usize; 2], noise: f64 },
    Shapes { train: usize, test: usize, jitter: bool, flip: f64 },
    /// Single-layer data from random weights drawn with the run's `p_w`.
    Planted { images: usize },
    /// A dataset manifest written by `generate`.
    Manifest { path: PathBuf },
    /// MNIST in IDX format, binarized at 128, first `per_class` per digit.
    Mnist { images: PathBuf, labels: PathBuf, per_class: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub online: bool,
    #[serde(default = "default_minibatch")]
    pub minibatch: usize,
    /// Independent runs with consecutive seeds; the one with the highest
    /// joint log-probability is kept (single unpooled layer without classes).
    #[serde(default = "one_usize")]
    pub restarts: usize,
    /// Learn from labels when the data has them.
    #[serde(default)]
    pub supervised: bool,
}

fn default_minibatch() -> usize {
    5
}

fn one_usize() -> usize {
    1
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { online: false, minibatch: default_minibatch(), restarts: 1, supervised: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Test images used by classify, inpaint and eval (0 means all).
    #[serde(default)]
    pub test_images: usize,
    /// Side of the square block hidden when inpainting.
    #[serde(default = "default_block")]
    pub mask_block: usize,
    #[serde(default = "default_rounds")]
    pub pool_rounds: usize,
}

fn default_block() -> usize {
    6
}

fn default_rounds() -> usize {
    hcn_core::infer::DEFAULT_POOL_ROUNDS
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { test_images: 0, mask_block: default_block(), pool_rounds: default_rounds() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub data: DataConfig,
    pub arch: ArchConfig,
    pub hyper: HyperConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl RunConfig {
    /// Checks everything that can be checked without touching the data.
    pub fn validate(&self) -> Result<()> {
        let arch = self.arch.to_arch()?;
        self.hyper.to_hyper(self.seed).validate(&arch)?;
        if self.train.minibatch == 0 || self.train.restarts == 0 {
            return Err(Error::Config("minibatch and restarts must be positive".into()));
        }
        if self.train.online && self.train.restarts > 1 {
            return Err(Error::Config("restarts apply to batch learning only".into()));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Result<Architecture> {
        self.arch.to_arch()
    }

    pub fn hyperparams(&self) -> Hyperparams {
        self.hyper.to_hyper(self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn presets_round_trip_through_json() {
        for name in presets::NAMES {
            let cfg = presets::preset(name).unwrap();
            cfg.validate().unwrap();
            let text = serde_json::to_string(&cfg).unwrap();
            let back: RunConfig = serde_json::from_str(&text).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn even_pool_fails_validation() {
        let mut cfg = presets::preset("shapes").unwrap();
        cfg.arch.layers[0].pool = [2, 3];
        assert!(cfg.validate().unwrap_err().is_validation());
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"data": {"kind": "two_bars"}, "arch": {"image": [1, 4, 4], "layers": []},
            "hyper": {"p01": 0.1, "p10": 0.1, "p_w": [], "epochs": 1}, "bogus": 1}"#;
        assert!(serde_json::from_str::<RunConfig>(text).is_err());
    }
}
