use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use super::{log_odds, pooling_connectivity, Architecture, Hyperparams, LayerShapes};
use crate::error::{Error, Result};
use crate::mp::{Clamp, FactorGraph, FactorId, FactorKind, VarId};
use crate::tensor::{BinaryTensor3, BinaryTensor4};

/// How the convolution weights enter the graph.
#[derive(Debug, Clone, Copy, Default)]
pub enum WeightMode<'a> {
    /// Weights are latent variables shared by all images.
    #[default]
    Latent,
    /// Weights are known. A weight that is on turns its AND into a
    /// pass-through and one that is off disconnects it, so each convolution
    /// output becomes a plain OR over the sparsification entries that can
    /// reach it.
    Fixed(&'a [BinaryTensor4]),
}

/// Factors of one layer across all images, grouped by schedule step.
#[derive(Debug, Clone, Default)]
pub struct LayerGroups {
    /// Convolution factors (AND-OR trees, or ORs with fixed weights).
    pub trees: Vec<FactorId>,
    /// `POOL(U | R)` factors.
    pub pools: Vec<FactorId>,
    /// `OR(S_below | U)` factors.
    pub ors: Vec<FactorId>,
}

/// Variables of one layer of one image; ranges follow the flat layout of the
/// corresponding tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageLayer {
    pub s: Range<VarId>,
    pub r: Range<VarId>,
    /// Shift variables, in [`super::PoolConnectivity`] order. Empty without
    /// pooling.
    pub u: Range<VarId>,
    /// Sparsification of the layer below. Equals `r` without pooling.
    pub below: Range<VarId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageVars {
    pub classes: Option<Range<VarId>>,
    pub class_tree: Option<FactorId>,
    /// Bottom layer first.
    pub layers: Vec<ImageLayer>,
}

impl ImageVars {
    /// The bottom sparsification, which is observed through the noisy channel.
    pub fn s0(&self) -> Range<VarId> {
        self.layers[0].below.clone()
    }
}

/// Factor graph of an HCN over a set of images plus the index maps needed to
/// schedule and decode it.
#[derive(Debug, Clone)]
pub struct HcnGraph {
    pub graph: FactorGraph,
    pub shapes: Vec<LayerShapes>,
    /// Shared weight variables per layer in [`BinaryTensor4`] flat order.
    /// Empty ranges with fixed weights.
    pub weights: Vec<Range<VarId>>,
    pub images: Vec<ImageVars>,
    pub groups: Vec<LayerGroups>,
    pub class_trees: Vec<FactorId>,
}

/// Options for [`build_hcn_graph`].
#[derive(Debug, Clone, Copy, Default)]
pub struct GraphOptions<'a> {
    pub weights: WeightMode<'a>,
    /// Upper bound of the uniform noise subtracted from the log potential of
    /// every off-center pool shift. Zero keeps the pools uniform.
    pub pool_perturbation: f64,
    pub seed: u64,
}

impl HcnGraph {
    /// Variables of `S^layer` of image `n`; layer 0 is the bottom.
    pub fn sparsification_vars(&self, n: usize, layer: usize) -> Range<VarId> {
        let im = &self.images[n];
        if layer == 0 {
            im.s0()
        } else {
            im.layers[layer - 1].s.clone()
        }
    }

    /// Shape of `S^layer`.
    pub fn sparsification_dims(&self, layer: usize) -> [usize; 3] {
        if layer == 0 {
            self.shapes[0].below
        } else {
            self.shapes[layer - 1].s
        }
    }

    fn decode_vars(&self, vars: Range<VarId>, out: &mut impl FnMut(usize, bool)) -> Result<()> {
        for (i, v) in vars.enumerate() {
            out(i, self.graph.belief(v)? > 0.0);
        }
        Ok(())
    }

    /// Thresholded beliefs of `S^layer` of image `n` (positive means on).
    pub fn decode_sparsification(&self, n: usize, layer: usize) -> Result<BinaryTensor3> {
        let [f, h, w] = self.sparsification_dims(layer);
        let mut t = BinaryTensor3::zeros(f, h, w)?;
        self.decode_vars(self.sparsification_vars(n, layer), &mut |i, b| t.set_flat(i, b))?;
        Ok(t)
    }

    /// Thresholded beliefs of `R^layer` (1-based) of image `n`.
    pub fn decode_representation(&self, n: usize, layer: usize) -> Result<BinaryTensor3> {
        let [f, h, w] = self.shapes[layer - 1].r;
        let mut t = BinaryTensor3::zeros(f, h, w)?;
        self.decode_vars(self.images[n].layers[layer - 1].r.clone(), &mut |i, b| t.set_flat(i, b))?;
        Ok(t)
    }

    /// Beliefs of the weight variables of layer `l` (0-based), flat order.
    pub fn weight_beliefs(&self, l: usize) -> Result<Vec<f64>> {
        self.weights[l].clone().map(|v| self.graph.belief(v)).collect()
    }
}

fn push_range(g: &mut FactorGraph, n: usize, prior: f64) -> Range<VarId> {
    g.add_variables(n, prior)
}

/// Builds the joint factor graph of `labels.len()` images.
///
/// Weight variables get the prior `log(p_w / (1 - p_w))` and the top
/// sparsification `log(p_s / (1 - p_s))` when there is no class layer. A
/// known label clamps its class variable on and the others off. All other
/// unaries (in particular the image evidence on `S^0`) start at zero.
pub fn build_hcn_graph(
    arch: &Architecture,
    hyper: &Hyperparams,
    labels: &[Option<usize>],
    opts: GraphOptions<'_>,
) -> Result<HcnGraph> {
    let shapes = arch.shapes()?;
    hyper.validate(arch)?;
    let n_layers = shapes.len();
    if let WeightMode::Fixed(ws) = opts.weights {
        if ws.len() != n_layers || ws.iter().zip(&shapes).any(|(w, s)| w.dims() != s.w) {
            return Err(Error::Shape("fixed weights do not match the architecture"));
        }
    }
    if let Some(c) = arch.classes {
        if labels.iter().flatten().any(|&k| k >= c.classes) {
            return Err(Error::Shape("label out of range"));
        }
    } else if labels.iter().any(Option::is_some) {
        return Err(Error::Config("labels given but the architecture has no class layer"));
    }

    let mut g = FactorGraph::new(opts.seed);
    let latent = matches!(opts.weights, WeightMode::Latent);
    let weights: Vec<Range<VarId>> = shapes
        .iter()
        .zip(&hyper.p_w)
        .map(|(s, &pw)| {
            let n = if latent { s.w.iter().product() } else { 0 };
            push_range(&mut g, n, log_odds(pw))
        })
        .collect();
    let pools: Vec<_> = shapes
        .iter()
        .zip(&arch.layers)
        .map(|(s, l)| l.has_pooling().then(|| pooling_connectivity(s.r, l.pool_h, l.pool_w)))
        .collect();

    let mut groups = alloc::vec![LayerGroups::default(); n_layers];
    let mut images = Vec::with_capacity(labels.len());
    let mut class_trees = Vec::new();
    let top_prior = if arch.classes.is_some() { 0.0 } else { log_odds(hyper.p_s) };

    for label in labels {
        let classes = arch.classes.map(|c| push_range(&mut g, c.classes, 0.0));
        // variables, top layer first so S^l is shared between layers l and l+1
        let mut layers_top_down: Vec<ImageLayer> = Vec::with_capacity(n_layers);
        let mut s = push_range(&mut g, shapes[n_layers - 1].s.iter().product(), top_prior);
        for l in (0..n_layers).rev() {
            let n_r: usize = shapes[l].r.iter().product();
            let r = push_range(&mut g, n_r, 0.0);
            let (u, below) = match &pools[l] {
                Some(pc) => (push_range(&mut g, pc.num_shifts(), 0.0), push_range(&mut g, n_r, 0.0)),
                None => (r.end..r.end, r.clone()),
            };
            layers_top_down.push(ImageLayer { s: s.clone(), r, u, below: below.clone() });
            s = below;
        }
        layers_top_down.reverse();
        let layers = layers_top_down;

        let class_tree = match (arch.classes, &classes) {
            (Some(c), Some(cv)) => {
                let mut vars: Vec<VarId> = cv.clone().collect();
                vars.extend(layers[n_layers - 1].s.clone());
                let f = g.add_factor(
                    FactorKind::ClassTree { classes: c.classes as u32, templates: c.templates as u32 },
                    &vars,
                )?;
                if let Some(k) = label {
                    for (i, v) in cv.clone().enumerate() {
                        g.clamp(v, if i == *k { Clamp::One } else { Clamp::Zero });
                    }
                }
                class_trees.push(f);
                Some(f)
            }
            _ => None,
        };

        for l in 0..n_layers {
            let sh = &shapes[l];
            let iv = &layers[l];
            let [a_n, f_n, hw, ww] = sh.w;
            let [_, hs, ws] = sh.s;
            let [_, hr, wr] = sh.r;
            let mut vars: Vec<VarId> = Vec::new();
            for a in 0..a_n {
                for y in 0..hr {
                    for x in 0..wr {
                        let r_var = iv.r.start + ((a * hr + y) * wr + x) as VarId;
                        vars.clear();
                        vars.push(r_var);
                        for f in 0..f_n {
                            for dr in y.saturating_sub(hs - 1)..=y.min(hw - 1) {
                                for dc in x.saturating_sub(ws - 1)..=x.min(ww - 1) {
                                    let s_var = iv.s.start + ((f * hs + y - dr) * ws + x - dc) as VarId;
                                    match opts.weights {
                                        WeightMode::Latent => {
                                            let wi = ((a * f_n + f) * hw + dr) * ww + dc;
                                            vars.push(s_var);
                                            vars.push(weights[l].start + wi as VarId);
                                        }
                                        WeightMode::Fixed(wts) => {
                                            if wts[l].get(a, f, dr, dc) {
                                                vars.push(s_var);
                                            }
                                        }
                                    }
                                }
                            }
                        }
                        if vars.len() == 1 {
                            // nothing can turn this element on
                            g.clamp(r_var, Clamp::Zero);
                            continue;
                        }
                        let kind = if latent { FactorKind::AndOrTree } else { FactorKind::Or };
                        groups[l].trees.push(g.add_factor(kind, &vars)?);
                    }
                }
            }

            if let Some(pc) = &pools[l] {
                for (ri, shifts) in pc.pools.iter().enumerate() {
                    vars.clear();
                    vars.push(iv.r.start + ri as VarId);
                    vars.extend(shifts.clone().map(|u| iv.u.start + u));
                    let f = if opts.pool_perturbation > 0.0 {
                        let m = shifts.len() as f64;
                        let base = -libm::log(m);
                        let eps = opts.pool_perturbation;
                        let w: Vec<f64> = shifts
                            .clone()
                            .map(|u| {
                                if pc.shift[u as usize] == (0, 0) {
                                    base
                                } else {
                                    base - g.rng().random_range(0.0..eps)
                                }
                            })
                            .collect();
                        g.add_weighted_pool(vars[0], &vars[1..], &w)?
                    } else {
                        g.add_factor(FactorKind::Pool, &vars)?
                    };
                    groups[l].pools.push(f);
                }
                for (si, members) in pc.members.iter().enumerate() {
                    vars.clear();
                    vars.push(iv.below.start + si as VarId);
                    vars.extend(members.iter().map(|&u| iv.u.start + u));
                    groups[l].ors.push(g.add_factor(FactorKind::Or, &vars)?);
                }
            }
        }
        images.push(ImageVars { classes, class_tree, layers });
    }

    Ok(HcnGraph { graph: g, shapes, weights, images, groups, class_trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassLayer, LayerSpec};
    use alloc::vec;

    fn hyper(layers: usize) -> Hyperparams {
        Hyperparams {
            p01: 0.03,
            p10: 0.03,
            p_s: 0.1,
            p_w: vec![0.2; layers],
            alpha: 1.0,
            lambda: 1.0,
            epochs: 1,
            seed: 0,
        }
    }

    #[test]
    fn no_images_leaves_only_weights() {
        let arch = Architecture::single_layer([1, 3, 3], 2, 2, 2);
        let h = build_hcn_graph(&arch, &hyper(1), &[], GraphOptions::default()).unwrap();
        assert_eq!(h.graph.num_variables(), 8);
        assert_eq!(h.graph.num_factors(), 0);
        assert!((h.graph.prior(0) - log_odds(0.2)).abs() < 1e-15);
    }

    #[test]
    fn single_layer_census() {
        // S: 2x2x2, R: 1x3x3, W: 1x2x2x2; children per R element are
        // 2 * (#dr) * (#dc) with #d = 1, 2, 1 along each axis.
        let arch = Architecture::single_layer([1, 3, 3], 2, 2, 2);
        let h = build_hcn_graph(&arch, &hyper(1), &[None], GraphOptions::default()).unwrap();
        assert_eq!(h.graph.num_variables(), 8 + 8 + 9);
        assert_eq!(h.graph.num_factors(), 9);
        assert_eq!(h.graph.num_messages(), 9 + 2 * 2 * 16);
        assert_eq!(h.images[0].s0(), h.images[0].layers[0].r);
    }

    #[test]
    fn bmf_case_is_or_of_ands() {
        // 1x1 everything: each image entry is an OR over features of S AND W
        let arch = Architecture::single_layer([5, 1, 1], 2, 1, 1);
        let h = build_hcn_graph(&arch, &hyper(1), &[None, None], GraphOptions::default()).unwrap();
        let g = &h.graph;
        assert_eq!(h.groups[0].trees.len(), 10);
        for &t in &h.groups[0].trees {
            assert_eq!(g.kind(t), FactorKind::AndOrTree);
            assert_eq!(g.neighbors(t).len(), 1 + 2 * 2);
        }
    }

    #[test]
    fn pooled_two_layer_with_labels() {
        let arch = Architecture {
            image: [1, 6, 6],
            layers: vec![
                LayerSpec { num_features: 2, feat_h: 4, feat_w: 4, pool_h: 3, pool_w: 3 },
                LayerSpec { num_features: 2, feat_h: 3, feat_w: 3, pool_h: 3, pool_w: 3 },
            ],
            classes: Some(ClassLayer { classes: 2, templates: 1 }),
        };
        let h = build_hcn_graph(&arch, &hyper(2), &[Some(1), None], GraphOptions::default()).unwrap();
        let im = &h.images[0];
        let c = im.classes.clone().unwrap();
        assert_eq!(h.graph.clamp_state(c.start), Clamp::Zero);
        assert_eq!(h.graph.clamp_state(c.start + 1), Clamp::One);
        assert_eq!(h.graph.clamp_state(h.images[1].classes.clone().unwrap().start), Clamp::Free);
        assert_eq!(im.layers[1].s.len(), 2);
        assert_eq!(im.layers[1].below, im.layers[0].s);
        assert_eq!(im.s0().len(), 36);
        assert_eq!(h.groups[0].pools.len(), 2 * 36);
        assert_eq!(h.groups[0].ors.len(), 2 * 36);
        assert_eq!(h.class_trees.len(), 2);
    }

    #[test]
    fn fixed_weights_rewire_to_or() {
        let arch = Architecture::single_layer([1, 3, 3], 1, 2, 2);
        let w = BinaryTensor4::from_fn(1, 1, 2, 2, |_, _, r, c| r == 0 && c == 0).unwrap();
        let ws = [w];
        let opts = GraphOptions { weights: WeightMode::Fixed(&ws), ..Default::default() };
        let h = build_hcn_graph(&arch, &hyper(1), &[None], opts).unwrap();
        // only R elements at rows/cols 0..2 are reachable through W[0,0,0,0]
        assert_eq!(h.groups[0].trees.len(), 4);
        let r = &h.images[0].layers[0].r;
        assert_eq!(h.graph.clamp_state(r.start + 8), Clamp::Zero);
    }
}
