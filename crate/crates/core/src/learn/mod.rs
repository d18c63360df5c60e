//! Learning: message initialization, batch learning over the joint graph of
//! all images, online learning with forgetting, and weight binarization.

mod passes;

pub use passes::{backward_pass, channel_constants, forward_pass, reset_top_down, set_evidence};

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{bconv, build_hcn_graph, log_odds, Architecture, GraphOptions, HcnGraph, Hyperparams, WeightMode};
use crate::tensor::{BinaryTensor3, BinaryTensor4};

/// Upper bound of the random penalty on off-center pool shifts while
/// learning and completing images.
pub const POOL_PERTURBATION: f64 = 1e-3;

/// Message change below which learning stops.
pub const CONVERGENCE_TOL: f64 = 1e-6;

/// A learned network: architecture plus binary weights, bottom layer first.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub arch: Architecture,
    pub weights: Vec<BinaryTensor4>,
    pub hyper: Hyperparams,
}

impl TrainedModel {
    pub fn new(arch: Architecture, weights: Vec<BinaryTensor4>, hyper: Hyperparams) -> Result<Self> {
        let shapes = arch.shapes()?;
        if weights.len() != shapes.len() || weights.iter().zip(&shapes).any(|(w, s)| w.dims() != s.w) {
            return Err(Error::Shape("weights do not match the architecture"));
        }
        Ok(TrainedModel { arch, weights, hyper })
    }
}

/// Joint graph of a training set plus the bookkeeping of the learning loop.
#[derive(Debug, Clone)]
pub struct LearnState {
    pub hcn: HcnGraph,
    pub epoch: usize,
    /// Largest message change of every completed epoch.
    pub deltas: Vec<f64>,
}

impl LearnState {
    /// Current weight beliefs of layer `l`, bottom layer 0.
    pub fn weight_beliefs(&self, l: usize) -> Result<Vec<f64>> {
        self.hcn.weight_beliefs(l)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnReport {
    /// Largest message change per epoch (per minibatch when online).
    pub deltas: Vec<f64>,
    pub converged: bool,
    /// Most factor-to-variable messages held at once.
    pub peak_messages: usize,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub model: TrainedModel,
    pub state: LearnState,
    pub report: LearnReport,
}

#[derive(Debug, Clone)]
pub struct OnlineOutcome {
    pub model: TrainedModel,
    /// Weight beliefs after the last minibatch, per layer.
    pub weight_beliefs: Vec<Vec<f64>>,
    pub report: LearnReport,
}

fn check_images(arch: &Architecture, images: &[BinaryTensor3], labels: &[Option<usize>]) -> Result<()> {
    if images.iter().any(|x| x.dims() != arch.image) {
        return Err(Error::Shape("image does not match the architecture"));
    }
    if !labels.is_empty() && labels.len() != images.len() {
        return Err(Error::Shape("one label slot per image"));
    }
    Ok(())
}

fn label_slots(labels: &[Option<usize>], n: usize) -> Vec<Option<usize>> {
    if labels.is_empty() {
        alloc::vec![None; n]
    } else {
        labels.to_vec()
    }
}

/// Initial weight beliefs: `log_odds(p)` with `p` uniform in `(0.9 p_W, p_W)`,
/// drawn from a generator seeded with `hyper.seed`.
pub fn initial_weight_priors(arch: &Architecture, hyper: &Hyperparams) -> Result<Vec<Vec<f64>>> {
    let shapes = arch.shapes()?;
    hyper.validate(arch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    Ok(shapes
        .iter()
        .zip(&hyper.p_w)
        .map(|(s, &pw)| {
            let n: usize = s.w.iter().product();
            (0..n).map(|_| log_odds(rng.random_range(0.9 * pw..pw))).collect()
        })
        .collect())
}

fn apply_weight_priors(hcn: &mut HcnGraph, priors: &[Vec<f64>]) {
    for (range, p) in hcn.weights.iter().zip(priors) {
        for (v, &b) in range.clone().zip(p) {
            // certainty is represented by a large finite prior
            hcn.graph.set_prior(v, b.clamp(-1e12, 1e12));
        }
    }
}

fn latent_graph(
    arch: &Architecture,
    hyper: &Hyperparams,
    images: &[BinaryTensor3],
    labels: &[Option<usize>],
    priors: &[Vec<f64>],
    seed: u64,
) -> Result<HcnGraph> {
    let slots = label_slots(labels, images.len());
    let opts = GraphOptions { weights: WeightMode::Latent, pool_perturbation: POOL_PERTURBATION, seed };
    let mut hcn = build_hcn_graph(arch, hyper, &slots, opts)?;
    apply_weight_priors(&mut hcn, priors);
    let k = channel_constants(hyper.p01, hyper.p10);
    for (n, x) in images.iter().enumerate() {
        set_evidence(&mut hcn, n, x, None, k);
    }
    reset_top_down(&mut hcn);
    Ok(hcn)
}

/// Builds the joint graph of `images` and sets the initial messages:
/// bottom-up and weight messages 0, top-down messages `-inf`, random weight
/// priors and the channel evidence on `S^0`. `labels` is empty or has one
/// entry per image.
pub fn init_messages(
    arch: &Architecture,
    hyper: &Hyperparams,
    images: &[BinaryTensor3],
    labels: &[Option<usize>],
) -> Result<LearnState> {
    check_images(arch, images, labels)?;
    let priors = initial_weight_priors(arch, hyper)?;
    let hcn = latent_graph(arch, hyper, images, labels, &priors, hyper.seed.wrapping_add(1))?;
    Ok(LearnState { hcn, epoch: 0, deltas: Vec::new() })
}

/// One forward and one backward pass; returns the largest message change.
pub fn run_epoch(state: &mut LearnState, alpha: f64) -> Result<f64> {
    let d = forward_pass(&mut state.hcn, alpha)?.max(backward_pass(&mut state.hcn, None)?);
    state.hcn.graph.recompute_beliefs();
    state.epoch += 1;
    state.deltas.push(d);
    Ok(d)
}

/// Thresholds weight beliefs: positive means 1, everything else 0.
pub fn binarize_weights(hcn: &HcnGraph) -> Result<Vec<BinaryTensor4>> {
    hcn.shapes
        .iter()
        .enumerate()
        .map(|(l, s)| {
            let [a, f, h, w] = s.w;
            let mut t = BinaryTensor4::zeros(a, f, h, w)?;
            for (i, b) in hcn.weight_beliefs(l)?.into_iter().enumerate() {
                t.set_flat(i, b > 0.0);
            }
            Ok(t)
        })
        .collect()
}

/// Learns binary weights from all images at once by repeating forward and
/// backward passes until the messages stop changing or `hyper.epochs`
/// passes are done.
pub fn learn_batch(
    images: &[BinaryTensor3],
    labels: &[Option<usize>],
    arch: &Architecture,
    hyper: &Hyperparams,
) -> Result<BatchOutcome> {
    if images.is_empty() {
        return Err(Error::Config("learning needs at least one image"));
    }
    let mut state = init_messages(arch, hyper, images, labels)?;
    let mut converged = false;
    for _ in 0..hyper.epochs {
        let d = run_epoch(&mut state, hyper.alpha)?;
        log::debug!("epoch {}: max message change {d:e}", state.epoch);
        if d < CONVERGENCE_TOL {
            converged = true;
            break;
        }
    }
    if !converged && hyper.epochs > 0 {
        log::warn!(
            "no fixed point after {} epochs, last change {:e}",
            state.epoch,
            state.deltas.last().copied().unwrap_or(f64::INFINITY)
        );
    }
    let weights = binarize_weights(&state.hcn)?;
    let report = LearnReport { deltas: state.deltas.clone(), converged, peak_messages: state.hcn.graph.num_messages() };
    let model = TrainedModel::new(arch.clone(), weights, hyper.clone())?;
    Ok(BatchOutcome { model, state, report })
}

/// Online learning over consecutive minibatches of `minibatch` images.
///
/// Each minibatch gets a fresh graph whose weight priors are the current
/// beliefs; its factors are visited once per direction (one forward and one
/// backward pass, undamped). The next prior is
/// `lambda * posterior + (1 - lambda) * initial prior`. Only one minibatch
/// graph is alive at a time.
pub fn learn_online(
    images: &[BinaryTensor3],
    labels: &[Option<usize>],
    arch: &Architecture,
    hyper: &Hyperparams,
    minibatch: usize,
) -> Result<OnlineOutcome> {
    if images.is_empty() || minibatch == 0 {
        return Err(Error::Config("online learning needs images and a positive minibatch size"));
    }
    check_images(arch, images, labels)?;
    let prior0 = initial_weight_priors(arch, hyper)?;
    let slots = label_slots(labels, images.len());
    let lambda = hyper.lambda;
    let mut prior = prior0.clone();
    let mut post = prior0.clone();
    let mut deltas = Vec::new();
    let mut peak = 0usize;
    let mut seed = hyper.seed.wrapping_add(1);
    for epoch in 0..hyper.epochs {
        for (xs, ls) in images.chunks(minibatch).zip(slots.chunks(minibatch)) {
            let mut hcn = latent_graph(arch, hyper, xs, ls, &prior, seed)?;
            seed = seed.wrapping_add(1);
            let d = forward_pass(&mut hcn, 1.0)?.max(backward_pass(&mut hcn, None)?);
            hcn.graph.recompute_beliefs();
            peak = peak.max(hcn.graph.num_messages());
            deltas.push(d);
            post = (0..hcn.weights.len()).map(|l| hcn.weight_beliefs(l)).collect::<Result<_>>()?;
            for ((p, q), p0) in prior.iter_mut().zip(&post).zip(&prior0) {
                for ((p, &q), &p0) in p.iter_mut().zip(q).zip(p0) {
                    *p = lambda * q + (1.0 - lambda) * p0;
                }
            }
        }
        log::debug!("online epoch {}: last change {:e}", epoch + 1, deltas.last().copied().unwrap_or(0.0));
    }
    let shapes = arch.shapes()?;
    let weights = shapes
        .iter()
        .zip(&post)
        .map(|(s, b)| {
            let [a, f, h, w] = s.w;
            let mut t = BinaryTensor4::zeros(a, f, h, w)?;
            for (i, &v) in b.iter().enumerate() {
                t.set_flat(i, v > 0.0);
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    let model = TrainedModel::new(arch.clone(), weights, hyper.clone())?;
    let report = LearnReport { deltas, converged: false, peak_messages: peak };
    Ok(OnlineOutcome { model, weight_beliefs: post, report })
}

/// MAP sparsifications of `images` under the fixed weights of `model`:
/// the weights enter as certain priors and the joint graph is iterated
/// like a batch run (same seed and damping) for at most `max_epochs`
/// epochs. Returns the top sparsification of every image.
pub fn encode(images: &[BinaryTensor3], model: &TrainedModel, max_epochs: usize) -> Result<Vec<BinaryTensor3>> {
    check_images(&model.arch, images, &[])?;
    let hyper = &model.hyper;
    let priors: Vec<Vec<f64>> = model
        .weights
        .iter()
        .map(|w| w.iter().map(|b| if b { f64::INFINITY } else { f64::NEG_INFINITY }).collect())
        .collect();
    let hcn = latent_graph(&model.arch, hyper, images, &[], &priors, hyper.seed.wrapping_add(1))?;
    let mut state = LearnState { hcn, epoch: 0, deltas: Vec::new() };
    for _ in 0..max_epochs.max(1) {
        if run_epoch(&mut state, hyper.alpha)? < CONVERGENCE_TOL {
            break;
        }
    }
    let top = model.arch.num_layers();
    (0..images.len()).map(|n| state.hcn.decode_sparsification(n, top)).collect()
}

/// Log joint probability (natural log) of an assignment of an unpooled
/// network without a class layer: the top sparsification `top_s`, the
/// weights, and the observed image `x`. Lower layers are determined by the
/// convolutions, so only the top and the weights carry priors.
pub fn log_joint(
    arch: &Architecture,
    hyper: &Hyperparams,
    top_s: &BinaryTensor3,
    weights: &[BinaryTensor4],
    x: &BinaryTensor3,
) -> Result<f64> {
    if arch.classes.is_some() || arch.layers.iter().any(|l| l.has_pooling()) {
        return Err(Error::Config("log joint needs an unpooled network without classes"));
    }
    let shapes = arch.shapes()?;
    if weights.len() != shapes.len() {
        return Err(Error::Shape("one weight tensor per layer"));
    }
    let bern = |p: f64, ones: usize, n: usize| {
        let zeros = n - ones;
        let mut lp = 0.0;
        if ones > 0 {
            lp += ones as f64 * libm::log(p);
        }
        if zeros > 0 {
            lp += zeros as f64 * libm::log(1.0 - p);
        }
        lp
    };
    let mut lp = bern(hyper.p_s, top_s.count_ones(), top_s.len());
    for (w, &pw) in weights.iter().zip(&hyper.p_w) {
        lp += bern(pw, w.count_ones(), w.len());
    }
    let mut r = top_s.clone();
    for w in weights.iter().rev() {
        r = bconv(&r, w)?;
    }
    if r.dims() != x.dims() {
        return Err(Error::Shape("image does not match the architecture"));
    }
    let (mut n11, mut n01, mut n10, mut n00) = (0usize, 0usize, 0usize, 0usize);
    for (ri, xi) in r.iter().zip(x.iter()) {
        match (ri, xi) {
            (true, true) => n11 += 1,
            (true, false) => n01 += 1,
            (false, true) => n10 += 1,
            (false, false) => n00 += 1,
        }
    }
    lp += bern(hyper.p01, n01, n01 + n11);
    lp += bern(hyper.p10, n10, n10 + n00);
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext::NEG_INF;
    use crate::model::LayerSpec;
    use alloc::vec;

    fn hyper(epochs: usize) -> Hyperparams {
        Hyperparams { p01: 0.03, p10: 0.03, p_s: 0.1, p_w: vec![0.2], alpha: 1.0, lambda: 1.0, epochs, seed: 7 }
    }

    #[test]
    fn channel_constants_symmetric() {
        let (k1, k0) = channel_constants(0.03, 0.03);
        assert!((k1 - libm::log(0.97 / 0.03)).abs() < 1e-12);
        assert!((k1 - 3.4761).abs() < 1e-4);
        assert!((k0 + k1).abs() < 1e-12);
    }

    #[test]
    fn init_sets_evidence_priors_and_top_down() {
        let arch = Architecture::single_layer([1, 3, 3], 2, 2, 2);
        let x = BinaryTensor3::from_fn(1, 3, 3, |_, r, c| r == c).unwrap();
        let h = hyper(1);
        let st = init_messages(&arch, &h, &[x.clone()], &[]).unwrap();
        let g = &st.hcn.graph;
        let (k1, k0) = channel_constants(h.p01, h.p10);
        for (i, v) in st.hcn.images[0].s0().enumerate() {
            assert_eq!(g.prior(v), if x.get_flat(i) { k1 } else { k0 });
        }
        for v in st.hcn.weights[0].clone() {
            let p = g.prior(v);
            assert!(p > log_odds(0.18) && p < log_odds(0.2));
        }
        for &f in &st.hcn.groups[0].trees {
            assert_eq!(g.messages(f)[0], NEG_INF);
            assert!(g.messages(f)[1..].iter().all(|&m| m == 0.0));
        }
    }

    #[test]
    fn masked_pixel_gets_no_evidence() {
        let arch = Architecture::single_layer([1, 2, 2], 1, 1, 1);
        let h = hyper(1);
        let mut st = init_messages(&arch, &h, &[BinaryTensor3::zeros(1, 2, 2).unwrap()], &[]).unwrap();
        let x = BinaryTensor3::from_fn(1, 2, 2, |_, _, _| true).unwrap();
        let mask = BinaryTensor3::from_fn(1, 2, 2, |_, r, c| r + c > 0).unwrap();
        set_evidence(&mut st.hcn, 0, &x, Some(&mask), channel_constants(h.p01, h.p10));
        assert_eq!(st.hcn.graph.prior(st.hcn.images[0].s0().start), 0.0);
    }

    #[test]
    fn zero_epochs_gives_thresholded_prior() {
        let arch = Architecture::single_layer([1, 3, 3], 2, 2, 2);
        let x = BinaryTensor3::zeros(1, 3, 3).unwrap();
        let out = learn_batch(&[x], &[], &arch, &hyper(0)).unwrap();
        assert_eq!(out.model.weights[0].count_ones(), 0);
        assert!(out.report.deltas.is_empty());
    }

    #[test]
    fn batch_learning_is_deterministic() {
        let arch = Architecture::single_layer([1, 5, 5], 2, 2, 2);
        let xs: Vec<_> = (0..3)
            .map(|n| BinaryTensor3::from_fn(1, 5, 5, |_, r, c| (r + c + n) % 3 == 0).unwrap())
            .collect();
        let a = learn_batch(&xs, &[], &arch, &hyper(5)).unwrap();
        let b = learn_batch(&xs, &[], &arch, &hyper(5)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn online_full_batch_matches_batch_epoch() {
        let arch = Architecture {
            image: [1, 6, 6],
            layers: vec![LayerSpec { num_features: 2, feat_h: 3, feat_w: 3, pool_h: 3, pool_w: 3 }],
            classes: None,
        };
        let xs: Vec<_> = (0..4)
            .map(|n| BinaryTensor3::from_fn(1, 6, 6, |_, r, c| r == n || c == n + 1).unwrap())
            .collect();
        let h = hyper(1);
        let batch = learn_batch(&xs, &[], &arch, &h).unwrap();
        let online = learn_online(&xs, &[], &arch, &h, xs.len()).unwrap();
        assert_eq!(online.weight_beliefs[0], batch.state.weight_beliefs(0).unwrap());
        assert_eq!(online.model, batch.model);
    }

    #[test]
    fn total_forgetting_restarts_from_initial_prior() {
        let arch = Architecture::single_layer([1, 4, 4], 2, 2, 2);
        let xs: Vec<_> = (0..4)
            .map(|n| BinaryTensor3::from_fn(1, 4, 4, |_, r, c| (r * 4 + c + n) % 5 == 0).unwrap())
            .collect();
        let mut h = hyper(1);
        h.lambda = 0.0;
        let online = learn_online(&xs, &[], &arch, &h, 2).unwrap();
        // the second minibatch alone, with the same prior and graph seed
        let priors = initial_weight_priors(&arch, &h).unwrap();
        let mut hcn = latent_graph(&arch, &h, &xs[2..], &[], &priors, h.seed + 2).unwrap();
        forward_pass(&mut hcn, 1.0).unwrap();
        backward_pass(&mut hcn, None).unwrap();
        hcn.graph.recompute_beliefs();
        assert_eq!(online.weight_beliefs[0], hcn.weight_beliefs(0).unwrap());
    }

    #[test]
    fn online_memory_does_not_grow_with_minibatches() {
        let arch = Architecture::single_layer([1, 4, 4], 2, 2, 2);
        let x = BinaryTensor3::from_fn(1, 4, 4, |_, r, c| r == c).unwrap();
        let few = learn_online(&vec![x.clone(); 2], &[], &arch, &hyper(1), 2).unwrap();
        let many = learn_online(&vec![x; 12], &[], &arch, &hyper(1), 2).unwrap();
        assert_eq!(few.report.peak_messages, many.report.peak_messages);
    }

    #[test]
    fn decoded_beats_all_zeros() {
        let arch = Architecture::single_layer([1, 6, 6], 2, 3, 3);
        let h = Hyperparams { p_s: 0.05, ..hyper(20) };
        let x = BinaryTensor3::from_fn(1, 6, 6, |_, r, c| (r == 1 && c < 4) || (c == 4 && r > 1)).unwrap();
        let out = learn_batch(&[x.clone()], &[], &arch, &h).unwrap();
        let s = out.state.hcn.decode_sparsification(0, 1).unwrap();
        let lp = log_joint(&arch, &h, &s, &out.model.weights, &x).unwrap();
        let zs = BinaryTensor3::zeros(2, 4, 4).unwrap();
        let zw = vec![BinaryTensor4::zeros(1, 2, 3, 3).unwrap()];
        let lp0 = log_joint(&arch, &h, &zs, &zw, &x).unwrap();
        assert!(lp >= lp0, "{lp} < {lp0}");
    }
}
