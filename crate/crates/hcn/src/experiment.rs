//! Experiment steps shared by the command line and the tests: loading
//! data for a configuration, training with restarts, and the evaluation
//! metrics.

use std::time::Instant;

use hcn_core::data::{
    compression_ratio, discard_unused, encoding_cost, gen_shapes_dataset, letters, sample_single_layer, symbols, text, two_bars,
    Dataset, ShapesConfig,
};
use hcn_core::infer::{classify_forward, clustering_error, inpaint, ClassScores};
use hcn_core::learn::{encode, learn_batch, learn_online, log_joint, LearnReport, TrainedModel};
use hcn_core::model::{bconv, Architecture};
use hcn_core::BinaryTensor3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DataConfig, RunConfig};
use crate::error::{Error, Result};
use crate::{mnist, store};

/// Epochs used to encode images with the fixed weights of an online model.
pub const ENCODE_EPOCHS: usize = 20;

/// Environment variable capping the number of classification threads.
pub const THREADS_VAR: &str = "HCN_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct Data {
    pub train: Dataset,
    pub test: Option<Dataset>,
}

impl Data {
    /// The split used for evaluation: test when present, else train, cut to
    /// `limit` images (0 keeps all).
    pub fn eval_split(&self, limit: usize) -> Dataset {
        let d = self.test.as_ref().unwrap_or(&self.train);
        if limit == 0 {
            d.clone()
        } else {
            d.take(limit)
        }
    }
}

/// Generates or loads the data described by `cfg`.
pub fn load_data(cfg: &RunConfig) -> Result<Data> {
    let seed = cfg.seed;
    let train = match &cfg.data {
        DataConfig::TwoBars => two_bars(seed)?,
        DataConfig::Symbols => symbols(seed)?,
        DataConfig::Letters { alphabet, images, per_image, size, noise } => {
            letters(alphabet, *images, *per_image, (size[0], size[1]), *noise, seed)?
        }
        DataConfig::Text { alphabet, size, noise } => text(alphabet, size[0], size[1], *noise, seed)?,
        DataConfig::Shapes { train, test, jitter, flip } => {
            let (tr, te) = gen_shapes_dataset(*train, *test, seed, ShapesConfig { jitter: *jitter, flip: *flip })?;
            return Ok(Data { train: tr, test: Some(te) });
        }
        DataConfig::Planted { images } => {
            sample_single_layer(&cfg.architecture()?, &cfg.hyperparams(), *images, seed)?
        }
        DataConfig::Manifest { path } => return store::load_dataset(path),
        DataConfig::Mnist { images, labels, per_class } => mnist::load(images, labels, *per_class)?,
    };
    Ok(Data { train, test: None })
}

/// Compression can only be measured for one unpooled layer without classes,
/// where the reconstruction is a plain convolution.
pub fn measures_compression(arch: &Architecture) -> bool {
    arch.layers.len() == 1 && !arch.layers[0].has_pooling() && arch.classes.is_none()
}

/// Encoding cost of the images through the model relative to the raw
/// images, after discarding unused features. Lower is better.
pub fn compression(images: &[BinaryTensor3], s: &[BinaryTensor3], model: &TrainedModel) -> Result<f64> {
    let w0 = &model.weights[0];
    let used = (0..w0.dims()[1]).any(|f| w0.feature_used(f) && s.iter().any(|x| x.plane(f).count_ones() > 0));
    if !used {
        // nothing to send but the images themselves
        let ex = encoding_cost(images.iter().flat_map(|t| t.iter()));
        return Ok(if ex == 0.0 { f64::INFINITY } else { 1.0 });
    }
    let (s, w) = discard_unused(s, w0)?;
    let r = s.iter().map(|s| bconv(s, &w)).collect::<hcn_core::Result<Vec<_>>>()?;
    Ok(compression_ratio(images, &s, &w, &r)?)
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: TrainedModel,
    pub report: LearnReport,
    /// Top sparsification of every training image, when read out.
    pub sparsifications: Option<Vec<BinaryTensor3>>,
    pub compression: Option<f64>,
    /// Summed joint log-probability of the kept restart.
    pub log_joint: Option<f64>,
    pub seed: u64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub images: usize,
    pub online: bool,
    pub seed: u64,
    pub epochs_run: usize,
    pub converged: bool,
    pub final_delta: Option<f64>,
    pub deltas: Vec<f64>,
    pub compression: Option<f64>,
    pub log_joint: Option<f64>,
    pub wall_time_s: f64,
}

impl TrainResult {
    pub fn metrics(&self, images: usize, online: bool) -> TrainMetrics {
        TrainMetrics {
            images,
            online,
            seed: self.seed,
            epochs_run: self.report.deltas.len(),
            converged: self.report.converged,
            final_delta: self.report.deltas.last().copied(),
            deltas: self.report.deltas.clone(),
            compression: self.compression,
            log_joint: self.log_joint,
            wall_time_s: self.wall_time,
        }
    }
}

fn total_log_joint(model: &TrainedModel, s: &[BinaryTensor3], images: &[BinaryTensor3]) -> Result<f64> {
    let mut lp = 0.0;
    for (s, x) in s.iter().zip(images) {
        lp += log_joint(&model.arch, &model.hyper, s, &model.weights, x)?;
    }
    Ok(lp)
}

/// Learns a model from `data` as configured. Batch runs with several
/// restarts use consecutive seeds and keep the run whose decoded solution
/// has the highest joint log-probability.
pub fn train(cfg: &RunConfig, data: &Dataset) -> Result<TrainResult> {
    cfg.validate()?;
    let arch = cfg.architecture()?;
    let labels = if cfg.train.supervised { data.label_slots() } else { Vec::new() };
    data.validate(if cfg.train.supervised { arch.classes.map(|c| c.classes) } else { None })?;
    if cfg.train.supervised && labels.is_empty() {
        return Err(Error::Config("supervised training needs labelled data".into()));
    }
    let start = Instant::now();
    let single = measures_compression(&arch);
    if cfg.train.online {
        let hyper = cfg.hyperparams();
        let out = learn_online(&data.images, &labels, &arch, &hyper, cfg.train.minibatch)?;
        let (sparsifications, compression) = if single {
            let s = encode(&data.images, &out.model, ENCODE_EPOCHS)?;
            let c = compression(&data.images, &s, &out.model)?;
            (Some(s), Some(c))
        } else {
            (None, None)
        };
        return Ok(TrainResult {
            model: out.model,
            report: out.report,
            sparsifications,
            compression,
            log_joint: None,
            seed: cfg.seed,
            wall_time: start.elapsed().as_secs_f64(),
        });
    }
    if cfg.train.restarts > 1 && !single {
        return Err(Error::Config("restarts need one unpooled layer without classes".into()));
    }
    let mut best: Option<TrainResult> = None;
    for k in 0..cfg.train.restarts as u64 {
        let mut hyper = cfg.hyperparams();
        hyper.seed = cfg.seed.wrapping_add(k);
        let out = learn_batch(&data.images, &labels, &arch, &hyper)?;
        let top = arch.num_layers();
        let s = (0..data.len()).map(|n| out.state.hcn.decode_sparsification(n, top)).collect::<hcn_core::Result<Vec<_>>>()?;
        let (compression, lj) = if single {
            (Some(compression(&data.images, &s, &out.model)?), Some(total_log_joint(&out.model, &s, &data.images)?))
        } else {
            (None, None)
        };
        log::info!("restart {k} (seed {}): log joint {lj:?}, compression {compression:?}", hyper.seed);
        let better = match (&best, lj) {
            (None, _) => true,
            (Some(b), Some(lj)) => b.log_joint.is_some_and(|b| lj > b),
            _ => false,
        };
        if better {
            best = Some(TrainResult {
                model: out.model,
                report: out.report,
                sparsifications: Some(s),
                compression,
                log_joint: lj,
                seed: hyper.seed,
                wall_time: 0.0,
            });
        }
    }
    let mut best = best.expect("at least one restart");
    best.wall_time = start.elapsed().as_secs_f64();
    Ok(best)
}

/// Runs `f` on a thread pool capped by `HCN_THREADS` when it is set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_VAR).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Classifies every image with one forward pass each, in parallel.
pub fn classify_all(model: &TrainedModel, images: &[BinaryTensor3]) -> Result<Vec<ClassScores>> {
    with_pool(|| images.par_iter().map(|x| classify_forward(x, model)).collect::<hcn_core::Result<Vec<_>>>())?
        .map_err(Error::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyMetrics {
    pub images: usize,
    /// Fraction of images assigned the wrong class (labelled data, two or
    /// more classes).
    pub error: Option<f64>,
    /// Template assignment error under the best relabelling (data with
    /// known generating templates).
    pub clustering_error: Option<f64>,
    /// `confusion[truth][predicted]` over classes, or over templates when
    /// the model has a single class.
    pub confusion: Option<Vec<Vec<usize>>>,
}

/// Error rates and confusion matrix of `scores` against the ground truth
/// available in `data`.
pub fn classification_metrics(scores: &[ClassScores], data: &Dataset, arch: &Architecture) -> Result<ClassifyMetrics> {
    let c = arch.classes.ok_or_else(|| Error::Config("classification needs a class layer".into()))?;
    let mut m = ClassifyMetrics { images: scores.len(), error: None, clustering_error: None, confusion: None };
    let confusion = |pred: &[usize], truth: &[usize], k: usize| {
        let mut t = vec![vec![0usize; k]; k];
        for (&p, &y) in pred.iter().zip(truth) {
            if p < k && y < k {
                t[y][p] += 1;
            }
        }
        t
    };
    if let Some(labels) = &data.labels {
        if c.classes > 1 {
            let pred: Vec<usize> = scores.iter().map(|s| s.class).collect();
            let wrong = pred.iter().zip(labels).filter(|(p, y)| p != y).count();
            m.error = Some(wrong as f64 / scores.len().max(1) as f64);
            m.confusion = Some(confusion(&pred, labels, c.classes));
        }
    }
    if let Some(templates) = &data.templates {
        let pred: Vec<usize> = scores.iter().map(ClassScores::flat_template).collect();
        let k = (c.classes * c.templates).max(templates.iter().max().map_or(0, |&t| t + 1));
        if k <= 8 && !pred.is_empty() {
            m.clustering_error = Some(clustering_error(&pred, templates, k)?);
        }
        if c.classes == 1 {
            m.confusion = Some(confusion(&pred, templates, k));
        }
    }
    Ok(m)
}

/// A mask that hides one `block x block` square at a random position
/// (1 = observed).
pub fn block_mask(dims: [usize; 3], block: usize, rng: &mut impl Rng) -> Result<BinaryTensor3> {
    let [c, h, w] = dims;
    let (bh, bw) = (block.min(h), block.min(w));
    let r0 = rng.random_range(0..=h - bh);
    let c0 = rng.random_range(0..=w - bw);
    Ok(BinaryTensor3::from_fn(c, h, w, |_, r, cc| !(r >= r0 && r < r0 + bh && cc >= c0 && cc < c0 + bw))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintMetrics {
    pub images: usize,
    pub mask_block: usize,
    /// Fraction of hidden pixels restored to their true value.
    pub masked_accuracy: f64,
    /// Fraction of images whose observed pixels came back unchanged.
    pub observed_unchanged: f64,
}

pub struct InpaintResult {
    pub completed: Vec<BinaryTensor3>,
    pub masks: Vec<BinaryTensor3>,
    pub metrics: InpaintMetrics,
}

/// Hides a random block of every image and completes it. Masks are drawn
/// from `seed`; accuracy is measured against the unmasked images.
pub fn inpaint_all(
    model: &TrainedModel,
    images: &[BinaryTensor3],
    block: usize,
    pool_rounds: usize,
    seed: u64,
) -> Result<InpaintResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masks = images.iter().map(|x| block_mask(x.dims(), block, &mut rng)).collect::<Result<Vec<_>>>()?;
    let completed = with_pool(|| {
        images
            .par_iter()
            .zip(&masks)
            .map(|(x, m)| {
                let hidden = BinaryTensor3::from_fn(x.dims()[0], x.dims()[1], x.dims()[2], |c, r, cc| {
                    m.get(c, r, cc) && x.get(c, r, cc)
                })?;
                inpaint(&hidden, m, model, None, pool_rounds)
            })
            .collect::<hcn_core::Result<Vec<_>>>()
    })??;
    let (mut right, mut total, mut unchanged) = (0usize, 0usize, 0usize);
    for ((x, m), y) in images.iter().zip(&masks).zip(&completed) {
        let mut same = true;
        for i in 0..x.len() {
            if m.get_flat(i) {
                same &= x.get_flat(i) == y.get_flat(i);
            } else {
                total += 1;
                right += (x.get_flat(i) == y.get_flat(i)) as usize;
            }
        }
        unchanged += same as usize;
    }
    let metrics = InpaintMetrics {
        images: images.len(),
        mask_block: block,
        masked_accuracy: if total == 0 { 1.0 } else { right as f64 / total as f64 },
        observed_unchanged: unchanged as f64 / images.len().max(1) as f64,
    };
    Ok(InpaintResult { completed, masks, metrics })
}
