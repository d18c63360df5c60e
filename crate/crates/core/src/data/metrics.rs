//! Encoding cost, compression and feature matching.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{BinaryTensor3, BinaryTensor4};

/// Binary entropy in bits, with `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * libm::log2(p) + (1.0 - p) * libm::log2(1.0 - p))
}

/// Bits needed to send a binary sequence with an optimal code for its own
/// ones-rate: `N * H(ones / N)`.
pub fn encoding_cost(bits: impl IntoIterator<Item = bool>) -> f64 {
    let (mut n, mut ones) = (0usize, 0usize);
    for b in bits {
        n += 1;
        ones += b as usize;
    }
    if n == 0 {
        return 0.0;
    }
    n as f64 * binary_entropy(ones as f64 / n as f64)
}

/// Drops every feature that is never active in any sparsification or whose
/// weights are all zero.
pub fn discard_unused(s: &[BinaryTensor3], w: &BinaryTensor4) -> Result<(Vec<BinaryTensor3>, BinaryTensor4)> {
    let [_, f_n, _, _] = w.dims();
    if s.iter().any(|x| x.dims()[0] != f_n) {
        return Err(Error::Shape("sparsification features must match weights"));
    }
    let keep: Vec<usize> = (0..f_n)
        .filter(|&f| w.feature_used(f) && s.iter().any(|x| x.plane(f).count_ones() > 0))
        .collect();
    let s2 = s
        .iter()
        .map(|x| {
            let [_, h, ww] = x.dims();
            BinaryTensor3::from_fn(keep.len(), h, ww, |k, r, c| x.get(keep[k], r, c))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((s2, w.select_features(&keep)?))
}

/// Cost of sending the images through the model (sparsifications, weights
/// and the disagreement between reconstruction and image) relative to
/// sending the images directly. Lower is better; below 1 the model
/// compresses. Unused features should be discarded first.
pub fn compression_ratio(
    x: &[BinaryTensor3],
    s: &[BinaryTensor3],
    w: &BinaryTensor4,
    r: &[BinaryTensor3],
) -> Result<f64> {
    if x.len() != r.len() || x.iter().zip(r).any(|(a, b)| a.dims() != b.dims()) {
        return Err(Error::Shape("reconstructions must match images"));
    }
    let ex = encoding_cost(x.iter().flat_map(|t| t.iter()));
    let es = encoding_cost(s.iter().flat_map(|t| t.iter()));
    let ew = encoding_cost(w.iter());
    let mut err = Vec::with_capacity(x.len());
    for (a, b) in x.iter().zip(r) {
        err.push(a.xor(b)?);
    }
    let ee = encoding_cost(err.iter().flat_map(|t| t.iter()));
    if ex == 0.0 {
        log::warn!("images carry no information; compression ratio is infinite");
        return Ok(f64::INFINITY);
    }
    Ok((es + ew + ee) / ex)
}

fn shifted_distance(learned: &BinaryTensor4, lf: usize, planted: &BinaryTensor4, pf: usize, dy: i64, dx: i64) -> usize {
    let [a_n, _, h, w] = planted.dims();
    let mut d = 0;
    for a in 0..a_n {
        for r in 0..h as i64 {
            for c in 0..w as i64 {
                // planted pixel moved out of the window counts as missing
                let (sr, sc) = (r + dy, c + dx);
                let inside = sr >= 0 && sc >= 0 && sr < h as i64 && sc < w as i64;
                if !inside && planted.get(a, pf, r as usize, c as usize) {
                    d += 1;
                }
                let src = (r - dy, c - dx);
                let p = src.0 >= 0
                    && src.1 >= 0
                    && src.0 < h as i64
                    && src.1 < w as i64
                    && planted.get(a, pf, src.0 as usize, src.1 as usize);
                if p != learned.get(a, lf, r as usize, c as usize) {
                    d += 1;
                }
            }
        }
    }
    d
}

/// Distance from every planted feature to the learned feature assigned to
/// it, minimizing the total over one-to-one assignments. The distance
/// between two features is the smallest Hamming distance over translations
/// of the planted one, where pixels translated out of the window count as
/// mismatches. Needs at most 8 planted features and at least as many
/// learned ones.
pub fn feature_match_distances(learned: &BinaryTensor4, planted: &BinaryTensor4) -> Result<Vec<usize>> {
    let [a, lf_n, h, w] = learned.dims();
    let [pa, pf_n, ph, pw] = planted.dims();
    if (a, h, w) != (pa, ph, pw) {
        return Err(Error::Shape("feature windows differ"));
    }
    if pf_n > 8 || lf_n < pf_n {
        return Err(Error::Config("need at most 8 planted and at least as many learned features"));
    }
    let mut cost = vec![0usize; pf_n * lf_n];
    for p in 0..pf_n {
        for l in 0..lf_n {
            let mut best = usize::MAX;
            for dy in -(h as i64 - 1)..h as i64 {
                for dx in -(w as i64 - 1)..w as i64 {
                    best = best.min(shifted_distance(learned, l, planted, p, dy, dx));
                }
            }
            cost[p * lf_n + l] = best;
        }
    }
    let mut best_total = usize::MAX;
    let mut best_assign = vec![0usize; pf_n];
    let mut assign = vec![0usize; pf_n];
    let mut used = vec![false; lf_n];
    search(0, 0, &cost, lf_n, &mut assign, &mut used, &mut best_total, &mut best_assign);
    Ok((0..pf_n).map(|p| cost[p * lf_n + best_assign[p]]).collect())
}

#[allow(clippy::too_many_arguments)]
fn search(
    p: usize,
    total: usize,
    cost: &[usize],
    lf_n: usize,
    assign: &mut [usize],
    used: &mut [bool],
    best_total: &mut usize,
    best_assign: &mut [usize],
) {
    if total >= *best_total {
        return;
    }
    if p == assign.len() {
        *best_total = total;
        best_assign.copy_from_slice(assign);
        return;
    }
    for l in 0..lf_n {
        if !used[l] {
            used[l] = true;
            assign[p] = l;
            search(p + 1, total + cost[p * lf_n + l], cost, lf_n, assign, used, best_total, best_assign);
            used[l] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_cost_examples() {
        assert_eq!(encoding_cost(core::iter::repeat_n(false, 50)), 0.0);
        assert!((encoding_cost((0..100).map(|i| i % 2 == 0)) - 100.0).abs() < 1e-12);
        assert!((encoding_cost((0..100).map(|i| i < 10)) - 46.9).abs() < 0.01);
        assert_eq!(encoding_cost(core::iter::repeat_n(true, 5)), 0.0);
    }

    #[test]
    fn perfect_sparse_model_compresses() {
        let w = BinaryTensor4::from_fn(1, 1, 3, 3, |_, _, _, _| true).unwrap();
        let s = BinaryTensor3::from_fn(1, 8, 8, |_, r, c| (r, c) == (0, 0) || (r, c) == (5, 5)).unwrap();
        let x = crate::model::bconv(&s, &w).unwrap();
        let ratio = compression_ratio(&[x.clone()], &[s], &w, &[x]).unwrap();
        assert!(ratio < 0.5, "{ratio}");
    }

    #[test]
    fn discards_unused_features() {
        let w = BinaryTensor4::from_fn(1, 3, 2, 2, |_, f, _, _| f != 1).unwrap();
        let s = BinaryTensor3::from_fn(3, 2, 2, |f, r, _| f <= 1 && r == 0).unwrap();
        let (s2, w2) = discard_unused(&[s], &w).unwrap();
        assert_eq!(w2.dims()[1], 1);
        assert_eq!(s2[0].dims()[0], 1);
    }

    #[test]
    fn matching_ignores_permutation_and_translation() {
        let planted = BinaryTensor4::from_fn(1, 2, 4, 4, |_, f, r, c| if f == 0 { r == 0 } else { c == 0 }).unwrap();
        // swapped and translated by one
        let learned = BinaryTensor4::from_fn(1, 2, 4, 4, |_, f, r, c| if f == 0 { c == 1 } else { r == 1 }).unwrap();
        assert_eq!(feature_match_distances(&learned, &planted).unwrap(), vec![0, 0]);
        let off = BinaryTensor4::zeros(1, 2, 4, 4).unwrap();
        assert_eq!(feature_match_distances(&off, &planted).unwrap(), vec![4, 4]);
    }
}
