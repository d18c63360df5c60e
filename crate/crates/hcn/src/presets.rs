//! Ready-made run configurations for the standard experiments, at a scale
//! that runs on one CPU in minutes.

use crate::config::{
    ArchConfig, ClassConfig, DataConfig, EvalConfig, HyperConfig, LayerConfig, RunConfig, TrainConfig,
};
use crate::error::{Error, Result};

pub const NAMES: [&str; 9] = [
    "two-bars",
    "symbols",
    "clean-letters",
    "noisy-letters",
    "text",
    "shapes",
    "shapes-supervised",
    "shapes-online",
    "planted",
];

fn unpooled(features: usize, h: usize, w: usize) -> LayerConfig {
    LayerConfig { features, feature_size: [h, w], pool: [1, 1] }
}

fn hyper(p: f64, p_s: f64, p_w: &[f64]) -> HyperConfig {
    HyperConfig { p01: p, p10: p, p_s, p_w: p_w.to_vec(), alpha: 0.8, lambda: 1.0, epochs: 100 }
}

fn run(name: &str, data: DataConfig, arch: ArchConfig, hyper: HyperConfig, train: TrainConfig) -> RunConfig {
    RunConfig { preset: Some(name.into()), seed: 0, data, arch, hyper, train, eval: EvalConfig::default() }
}

fn letters(name: &str, noise: f64) -> RunConfig {
    let data = DataConfig::Letters { alphabet: "ABCDE".into(), images: 30, per_image: 5, size: [24, 24], noise };
    let arch = ArchConfig { image: [1, 24, 24], layers: vec![unpooled(5, 9, 7)], classes: None };
    let mut h = hyper(if noise > 0.0 { noise } else { 0.01 }, 0.01, &[0.3]);
    h.lambda = 0.95;
    run(name, data, arch, h, TrainConfig::default())
}

fn shapes(name: &str, supervised: bool, online: bool) -> RunConfig {
    let data = DataConfig::Shapes { train: 100, test: 10_000, jitter: true, flip: 1e-3 };
    let classes = if supervised { ClassConfig { classes: 2, templates: 2 } } else { ClassConfig { classes: 1, templates: 4 } };
    let pooled = |features, h, w| LayerConfig { features, feature_size: [h, w], pool: [3, 3] };
    let arch = ArchConfig { image: [1, 11, 21], layers: vec![pooled(4, 9, 9), pooled(4, 3, 13)], classes: Some(classes) };
    let mut h = hyper(1e-3, 0.01, &[0.18, 0.013]);
    if online {
        h.lambda = 0.95;
    }
    let train = TrainConfig { online, supervised, ..TrainConfig::default() };
    let mut cfg = run(name, data, arch, h, train);
    cfg.eval.test_images = 1000;
    cfg
}

/// The configuration named `name`, seed 0.
pub fn preset(name: &str) -> Result<RunConfig> {
    let cfg = match name {
        "two-bars" => run(
            name,
            DataConfig::TwoBars,
            ArchConfig { image: [1, 16, 16], layers: vec![unpooled(2, 5, 5)], classes: None },
            hyper(0.01, 0.02, &[0.2]),
            TrainConfig { restarts: 4, ..TrainConfig::default() },
        ),
        "symbols" => run(
            name,
            DataConfig::Symbols,
            ArchConfig { image: [1, 80, 80], layers: vec![unpooled(4, 9, 9)], classes: None },
            hyper(0.01, 0.005, &[0.5]),
            TrainConfig { restarts: 8, ..TrainConfig::default() },
        ),
        "clean-letters" => letters(name, 0.0),
        "noisy-letters" => letters(name, 0.03),
        "text" => run(
            name,
            DataConfig::Text { alphabet: "EATS".into(), size: [28, 48], noise: 0.0 },
            ArchConfig { image: [1, 28, 48], layers: vec![unpooled(4, 9, 7)], classes: None },
            hyper(0.01, 0.01, &[0.3]),
            TrainConfig::default(),
        ),
        "shapes" => shapes(name, false, false),
        "shapes-supervised" => shapes(name, true, false),
        "shapes-online" => shapes(name, false, true),
        // 4 features of 5 x 5 placed about 8 times per image, 3% flips
        "planted" => run(
            name,
            DataConfig::Planted { images: 20 },
            ArchConfig { image: [1, 20, 20], layers: vec![unpooled(4, 5, 5)], classes: None },
            hyper(0.03, 8.0 / (4.0 * 16.0 * 16.0), &[0.3]),
            TrainConfig { restarts: 4, ..TrainConfig::default() },
        ),
        _ => return Err(Error::Config(format!("unknown preset {name:?}; known: {}", NAMES.join(", ")))),
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves_and_unknown_fails() {
        for name in NAMES {
            assert_eq!(preset(name).unwrap().preset.as_deref(), Some(name));
        }
        assert!(preset("nope").unwrap_err().is_validation());
    }
}
