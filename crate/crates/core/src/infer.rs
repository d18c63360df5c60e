//! Test-time tasks with known binary weights: classification by a single
//! forward pass, image completion, reconstruction and sparsification
//! readout.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::learn::{
    backward_pass, channel_constants, forward_pass, reset_top_down, set_evidence, TrainedModel, POOL_PERTURBATION,
};
use crate::model::{bconv, build_hcn_graph, pooling_connectivity, GraphOptions, HcnGraph, WeightMode};
use crate::mp::Clamp;
use crate::tensor::{BinaryTensor3, BinaryTensor4};

/// Number of POOL/OR alternations used when completing images.
pub const DEFAULT_POOL_ROUNDS: usize = 10;

/// Per-class scores of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    /// Bottom-up message into every template, class-major.
    pub templates: Vec<f64>,
    /// Best template score per class.
    pub classes: Vec<f64>,
    pub class: usize,
    /// Template index within `class`.
    pub template: usize,
}

impl ClassScores {
    fn from_templates(templates: Vec<f64>, num_classes: usize) -> Self {
        let per = templates.len() / num_classes;
        let best = argmax(&templates);
        let classes = templates.chunks(per).map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        ClassScores { templates, classes, class: best / per, template: best % per }
    }

    /// Template index over all classes (`class * templates + template`).
    pub fn flat_template(&self) -> usize {
        self.class * (self.templates.len() / self.classes.len()) + self.template
    }
}

/// Index of the largest value. Values within a relative `1e-9` of the
/// maximum count as tied and the lowest index wins, so that scores computed
/// with different summation orders pick the same winner.
pub fn argmax(v: &[f64]) -> usize {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = if m.is_finite() { 1e-9 * m.abs().max(1.0) } else { 0.0 };
    v.iter().position(|&x| x == m || x >= m - tol).unwrap_or(0)
}

fn check_model(model: &TrainedModel, x: &BinaryTensor3) -> Result<()> {
    if x.dims() != model.arch.image {
        return Err(Error::Shape("image does not match the model"));
    }
    Ok(())
}

fn fixed_graph(model: &TrainedModel, label: Option<usize>, pool_perturbation: f64, seed: u64) -> Result<HcnGraph> {
    let opts = GraphOptions { weights: WeightMode::Fixed(&model.weights), pool_perturbation, seed };
    build_hcn_graph(&model.arch, &model.hyper, &[label], opts)
}

/// Classifies `x` with one forward pass through the fixed-weight graph.
pub fn classify_forward(x: &BinaryTensor3, model: &TrainedModel) -> Result<ClassScores> {
    check_model(model, x)?;
    let c = model.arch.classes.ok_or(Error::Config("classification needs a class layer"))?;
    let mut hcn = fixed_graph(model, None, 0.0, model.hyper.seed)?;
    set_evidence(&mut hcn, 0, x, None, channel_constants(model.hyper.p01, model.hyper.p10));
    reset_top_down(&mut hcn);
    forward_pass(&mut hcn, 1.0)?;
    let tree = hcn.images[0].class_tree.ok_or(Error::Config("classification needs a class layer"))?;
    let templates = (0..c.classes * c.templates)
        .map(|t| hcn.graph.incoming(tree, c.classes + t))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassScores::from_templates(templates, c.classes))
}

/// Classifies `x` by evaluating the forward pass as a plain network:
/// max-pooling with a `-log M` penalty and linear correlation with the
/// weights, layer by layer, then the best template.
pub fn classify_direct(x: &BinaryTensor3, model: &TrainedModel) -> Result<ClassScores> {
    check_model(model, x)?;
    let c = model.arch.classes.ok_or(Error::Config("classification needs a class layer"))?;
    let shapes = model.arch.shapes()?;
    let (k1, k0) = channel_constants(model.hyper.p01, model.hyper.p10);
    let mut m: Vec<f64> = x.iter().map(|b| if b { k1 } else { k0 }).collect();
    for ((sh, spec), w) in shapes.iter().zip(&model.arch.layers).zip(&model.weights) {
        let r = if spec.has_pooling() {
            let pc = pooling_connectivity(sh.r, spec.pool_h, spec.pool_w);
            pc.pools
                .iter()
                .map(|p| {
                    let best = p.clone().map(|u| m[pc.target[u as usize] as usize]).fold(f64::NEG_INFINITY, f64::max);
                    best - libm::log(p.len() as f64)
                })
                .collect()
        } else {
            m
        };
        m = correlate(&r, sh.r, w, sh.s);
    }
    Ok(ClassScores::from_templates(m, c.classes))
}

fn correlate(r: &[f64], r_dims: [usize; 3], w: &BinaryTensor4, s_dims: [usize; 3]) -> Vec<f64> {
    let [_, hr, wr] = r_dims;
    let [a_n, f_n, hw, ww] = w.dims();
    let [_, hs, ws] = s_dims;
    let mut s = vec![0.0; f_n * hs * ws];
    for f in 0..f_n {
        for y in 0..hs {
            for x in 0..ws {
                let mut acc = 0.0;
                for a in 0..a_n {
                    for dr in 0..hw {
                        for dc in 0..ww {
                            if w.get(a, f, dr, dc) {
                                acc += r[(a * hr + y + dr) * wr + x + dc];
                            }
                        }
                    }
                }
                s[(f * hs + y) * ws + x] = acc;
            }
        }
    }
    s
}

/// Fills the pixels of `x` where `mask` is 0 (1 means observed). Runs one
/// forward pass and one backward pass whose POOL-to-`U` step is repeated
/// `pool_rounds` times alternating with OR-to-`U`. A known label is clamped
/// before the forward pass. Observed pixels are returned unchanged.
pub fn inpaint(
    x: &BinaryTensor3,
    mask: &BinaryTensor3,
    model: &TrainedModel,
    label: Option<usize>,
    pool_rounds: usize,
) -> Result<BinaryTensor3> {
    check_model(model, x)?;
    if mask.dims() != x.dims() {
        return Err(Error::Shape("mask does not match the image"));
    }
    if mask.count_ones() == mask.len() {
        return Ok(x.clone());
    }
    let mut hcn = fixed_graph(model, label, POOL_PERTURBATION, model.hyper.seed)?;
    set_evidence(&mut hcn, 0, x, Some(mask), channel_constants(model.hyper.p01, model.hyper.p10));
    reset_top_down(&mut hcn);
    forward_pass(&mut hcn, 1.0)?;
    backward_pass(&mut hcn, Some(pool_rounds))?;
    let decoded = hcn.decode_sparsification(0, 0)?;
    let mut out = x.clone();
    for i in 0..x.len() {
        if !mask.get_flat(i) {
            out.set_flat(i, decoded.get_flat(i));
        }
    }
    Ok(out)
}

/// Thresholds sparsification beliefs at 0 and convolves with `w`.
pub fn reconstruct(s_beliefs: &[f64], s_dims: [usize; 3], w: &BinaryTensor4) -> Result<BinaryTensor3> {
    let [f, h, c] = s_dims;
    if s_beliefs.len() != f * h * c {
        return Err(Error::Shape("beliefs do not match the sparsification shape"));
    }
    let s = BinaryTensor3::from_fn(f, h, c, |ff, r, cc| s_beliefs[(ff * h + r) * c + cc] > 0.0)?;
    bconv(&s, w)
}

/// Renders a top-layer sparsification through an unpooled stack of
/// weights (top layer last in `weights`), i.e. with every pool at its
/// center shift.
pub fn render(top_s: &BinaryTensor3, weights: &[BinaryTensor4]) -> Result<BinaryTensor3> {
    let mut r = top_s.clone();
    for w in weights.iter().rev() {
        r = bconv(&r, w)?;
    }
    Ok(r)
}

/// Thresholded `S^layer` of image `n` plus the number of active entries of
/// every feature.
pub fn extract_sparsification(hcn: &HcnGraph, n: usize, layer: usize) -> Result<(BinaryTensor3, Vec<usize>)> {
    let s = hcn.decode_sparsification(n, layer)?;
    let [f_n, h, w] = s.dims();
    let usage = (0..f_n).map(|f| (0..h * w).filter(|&i| s.get_flat(f * h * w + i)).count()).collect();
    Ok((s, usage))
}

/// Fraction of items whose predicted cluster disagrees with the truth under
/// the best one-to-one relabelling of the predicted clusters.
pub fn clustering_error(pred: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Shape("prediction and truth must be non-empty and of equal length"));
    }
    if k > 8 || pred.iter().chain(truth).any(|&c| c >= k) {
        return Err(Error::Config("clusters must lie in 0..k with k <= 8"));
    }
    let mut counts = vec![0usize; k * k];
    for (&p, &t) in pred.iter().zip(truth) {
        counts[p * k + t] += 1;
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    permutations(&mut perm, 0, &mut |p| {
        best = best.max((0..k).map(|i| counts[i * k + p[i]]).sum());
    });
    Ok(1.0 - best as f64 / pred.len() as f64)
}

fn permutations(v: &mut [usize], i: usize, f: &mut impl FnMut(&[usize])) {
    if i == v.len() {
        f(v);
        return;
    }
    for j in i..v.len() {
        v.swap(i, j);
        permutations(v, i + 1, f);
        v.swap(i, j);
    }
}

/// Clamps the class variables of image `n` of a graph to `label`.
pub fn clamp_label(hcn: &mut HcnGraph, n: usize, label: usize) -> Result<()> {
    let cv = hcn.images[n].classes.clone().ok_or(Error::Config("no class layer"))?;
    if label >= cv.len() {
        return Err(Error::Shape("label out of range"));
    }
    for (i, v) in cv.enumerate() {
        hcn.graph.clamp(v, if i == label { Clamp::One } else { Clamp::Zero });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Architecture, ClassLayer, Hyperparams, LayerSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hyper(layers: usize) -> Hyperparams {
        Hyperparams {
            p01: 0.03,
            p10: 0.03,
            p_s: 0.1,
            p_w: vec![0.2; layers],
            alpha: 1.0,
            lambda: 1.0,
            epochs: 1,
            seed: 3,
        }
    }

    fn two_layer_model(rng: &mut ChaCha8Rng) -> TrainedModel {
        let arch = Architecture {
            image: [1, 7, 7],
            layers: vec![
                LayerSpec { num_features: 3, feat_h: 3, feat_w: 3, pool_h: 3, pool_w: 3 },
                LayerSpec { num_features: 4, feat_h: 5, feat_w: 5, pool_h: 3, pool_w: 1 },
            ],
            classes: Some(ClassLayer { classes: 2, templates: 2 }),
        };
        let shapes = arch.shapes().unwrap();
        let weights = shapes
            .iter()
            .map(|s| {
                let [a, f, h, w] = s.w;
                BinaryTensor4::from_fn(a, f, h, w, |_, _, _, _| rng.random_bool(0.3)).unwrap()
            })
            .collect();
        TrainedModel::new(arch, weights, hyper(2)).unwrap()
    }

    #[test]
    fn forward_pass_matches_direct_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let model = two_layer_model(&mut rng);
            for _ in 0..5 {
                let x = BinaryTensor3::from_fn(1, 7, 7, |_, _, _| rng.random_bool(0.4)).unwrap();
                let a = classify_forward(&x, &model).unwrap();
                let b = classify_direct(&x, &model).unwrap();
                for (p, q) in a.templates.iter().zip(&b.templates) {
                    assert!((p - q).abs() < 1e-9 * p.abs().max(1.0), "{p} vs {q}");
                }
                assert_eq!(a.flat_template(), b.flat_template());
            }
        }
    }

    #[test]
    fn rendered_template_wins() {
        // two 3x3 templates, no pooling, one class each
        let arch = Architecture {
            image: [1, 3, 3],
            layers: vec![LayerSpec::unpooled(2, 3, 3)],
            classes: Some(ClassLayer { classes: 2, templates: 1 }),
        };
        let w = BinaryTensor4::from_fn(1, 2, 3, 3, |_, f, r, c| if f == 0 { r == c } else { r + c == 2 }).unwrap();
        let model = TrainedModel::new(arch, vec![w.clone()], hyper(1)).unwrap();
        for f in 0..2 {
            let s = BinaryTensor3::from_fn(2, 1, 1, |ff, _, _| ff == f).unwrap();
            let x = bconv(&s, &w).unwrap();
            assert_eq!(classify_forward(&x, &model).unwrap().class, f);
        }
    }

    #[test]
    fn all_zero_image_ties_to_lowest() {
        let arch = Architecture {
            image: [1, 3, 3],
            layers: vec![LayerSpec::unpooled(2, 3, 3)],
            classes: Some(ClassLayer { classes: 2, templates: 1 }),
        };
        let w = BinaryTensor4::from_fn(1, 2, 3, 3, |_, f, r, c| if f == 0 { r == c } else { r + c == 2 }).unwrap();
        let model = TrainedModel::new(arch, vec![w], hyper(1)).unwrap();
        let s = classify_forward(&BinaryTensor3::zeros(1, 3, 3).unwrap(), &model).unwrap();
        assert_eq!(s.classes[0], s.classes[1]);
        assert_eq!(s.class, 0);
    }

    #[test]
    fn full_mask_returns_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = two_layer_model(&mut rng);
        let x = BinaryTensor3::from_fn(1, 7, 7, |_, r, _| r == 2).unwrap();
        let mask = BinaryTensor3::from_fn(1, 7, 7, |_, _, _| true).unwrap();
        assert_eq!(inpaint(&x, &mask, &model, None, DEFAULT_POOL_ROUNDS).unwrap(), x);
    }

    #[test]
    fn inpaint_restores_missing_part_of_template() {
        let arch = Architecture {
            image: [1, 5, 5],
            layers: vec![LayerSpec::unpooled(2, 5, 5)],
            classes: Some(ClassLayer { classes: 2, templates: 1 }),
        };
        let w = BinaryTensor4::from_fn(1, 2, 5, 5, |_, f, r, c| if f == 0 { r == 2 } else { c == 2 }).unwrap();
        let model = TrainedModel::new(arch, vec![w.clone()], hyper(1)).unwrap();
        let x = BinaryTensor3::from_fn(1, 5, 5, |_, r, _| r == 2).unwrap();
        let mask = BinaryTensor3::from_fn(1, 5, 5, |_, _, c| c < 3).unwrap();
        let mut seen = x.clone();
        for i in 0..seen.len() {
            if !mask.get_flat(i) {
                seen.set_flat(i, false);
            }
        }
        assert_eq!(inpaint(&seen, &mask, &model, None, DEFAULT_POOL_ROUNDS).unwrap(), x);
    }

    #[test]
    fn reconstruct_thresholds_at_zero() {
        let w = BinaryTensor4::from_fn(1, 1, 2, 2, |_, _, _, _| true).unwrap();
        let r = reconstruct(&[0.0, -1.0, 2.0, -0.5], [1, 2, 2], &w).unwrap();
        assert_eq!(r, bconv(&BinaryTensor3::from_fn(1, 2, 2, |_, y, x| y == 1 && x == 0).unwrap(), &w).unwrap());
        let z = reconstruct(&[-1.0; 4], [1, 2, 2], &w).unwrap();
        assert_eq!(z.count_ones(), 0);
    }

    #[test]
    fn clustering_error_is_permutation_invariant() {
        assert_eq!(clustering_error(&[1, 1, 0, 0], &[0, 0, 1, 1], 2).unwrap(), 0.0);
        assert_eq!(clustering_error(&[1, 1, 0, 1], &[0, 0, 1, 1], 2).unwrap(), 0.25);
    }

    #[test]
    fn argmax_prefers_lowest_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), 0);
        assert_eq!(argmax(&[0.3, 0.1 + 0.2]), 0);
    }
}
