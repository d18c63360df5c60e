//! Forward and backward sweeps over an [`HcnGraph`].

use alloc::vec::Vec;

use crate::error::Result;
use crate::ext::NEG_INF;
use crate::mp::{FactorGraph, FactorId, Targets};
use crate::model::HcnGraph;
use crate::tensor::BinaryTensor3;

/// Observation constants of the noisy channel: the unary message on `S^0` is
/// `k1` for an observed 1 and `k0` for an observed 0.
pub fn channel_constants(p01: f64, p10: f64) -> (f64, f64) {
    let k1 = libm::log((1.0 - p01) / p10);
    let k0 = libm::log(p01 / (1.0 - p10));
    (k1, k0)
}

/// Writes the image evidence of image `n` onto its bottom sparsification.
/// Pixels whose mask entry is 0 get no evidence.
pub fn set_evidence(
    hcn: &mut HcnGraph,
    n: usize,
    image: &BinaryTensor3,
    mask: Option<&BinaryTensor3>,
    (k1, k0): (f64, f64),
) {
    let s0 = hcn.images[n].s0();
    debug_assert_eq!(s0.len(), image.len());
    for (i, v) in s0.enumerate() {
        let observed = mask.is_none_or(|m| m.get_flat(i));
        let e = match (observed, image.get_flat(i)) {
            (false, _) => 0.0,
            (true, true) => k1,
            (true, false) => k0,
        };
        hcn.graph.set_prior(v, e);
    }
}

/// Sets every top-down message (factor to the variables below it) to `-inf`.
pub fn reset_top_down(hcn: &mut HcnGraph) {
    let HcnGraph { graph, groups, class_trees, .. } = hcn;
    for grp in groups.iter() {
        for &f in grp.trees.iter().chain(&grp.pools).chain(&grp.ors) {
            graph.fill_messages(f, Targets::Bottoms, NEG_INF);
        }
    }
    for &f in class_trees.iter() {
        graph.fill_messages(f, Targets::Bottoms, NEG_INF);
    }
}

fn sweep(graph: &mut FactorGraph, factors: &[FactorId], targets: Targets, alpha: f64) -> Result<f64> {
    let mut delta = 0.0f64;
    for &f in factors {
        delta = delta.max(graph.update_factor(f, targets, alpha)?);
    }
    Ok(delta)
}

fn sweep_shuffled(hcn: &mut HcnGraph, layer: usize, targets: Targets) -> Result<f64> {
    let mut order: Vec<FactorId> = hcn.groups[layer].trees.clone();
    hcn.graph.shuffle(&mut order);
    sweep(&mut hcn.graph, &order, targets, 1.0)
}

/// Bottom-up sweep. Per layer: OR to `U`, POOL to `R` with damping `alpha`,
/// then the convolution trees to `W` and `S` one at a time in random order;
/// finally the class layer. Returns the largest message change.
pub fn forward_pass(hcn: &mut HcnGraph, alpha: f64) -> Result<f64> {
    let mut delta = 0.0f64;
    for l in 0..hcn.groups.len() {
        let grp = &hcn.groups[l];
        delta = delta.max(sweep(&mut hcn.graph, &grp.ors, Targets::Tops, 1.0)?);
        delta = delta.max(sweep(&mut hcn.graph, &grp.pools, Targets::Tops, alpha)?);
        delta = delta.max(sweep_shuffled(hcn, l, Targets::Tops)?);
    }
    delta = delta.max(sweep(&mut hcn.graph, &hcn.class_trees, Targets::All, 1.0)?);
    Ok(delta)
}

/// Top-down sweep. Per layer from the top: trees to `R` in random order,
/// POOL to `U`, OR to the sparsification below.
///
/// With `pool_rounds = Some(k)` the POOL-to-`U` step is replaced by `k`
/// alternations of POOL-to-`U` and OR-to-`U`, letting overlapping pools
/// explain each other away before the final OR-to-`S` step.
pub fn backward_pass(hcn: &mut HcnGraph, pool_rounds: Option<usize>) -> Result<f64> {
    let mut delta = 0.0f64;
    for l in (0..hcn.groups.len()).rev() {
        delta = delta.max(sweep_shuffled(hcn, l, Targets::Bottoms)?);
        let grp = &hcn.groups[l];
        let g = &mut hcn.graph;
        for round in 0..pool_rounds.unwrap_or(1).max(1) {
            if round > 0 {
                delta = delta.max(sweep(g, &grp.ors, Targets::Tops, 1.0)?);
            }
            delta = delta.max(sweep(g, &grp.pools, Targets::Bottoms, 1.0)?);
        }
        delta = delta.max(sweep(g, &grp.ors, Targets::Bottoms, 1.0)?);
    }
    Ok(delta)
}
