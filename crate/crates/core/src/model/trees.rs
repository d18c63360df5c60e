//! Exact updates for the two composite tree factors of an HCN.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ext::{relu_gap, xadd, NonNegSum, INF, NEG_INF};
use crate::mp::factors::{and_to_bottom, and_to_top, top_two};

/// One convolution output `r = OR_k (s_k AND w_k)` treated as a single factor.
///
/// `incoming` and `out` use the slot layout `[r, s_1, w_1, .., s_K, w_K]`.
/// The tree is solved exactly in two passes: AND bottoms feed the OR, then
/// the OR's top messages are pushed back down through each AND.
pub fn andor_tree_update(incoming: &[f64], out: &mut [f64]) -> Result<()> {
    let n = incoming.len();
    if n < 3 || n % 2 == 0 || out.len() != n {
        return Err(Error::Shape("AND-OR tree needs [r, (s, w)+]"));
    }
    let r = incoming[0];
    let children = (n - 1) / 2;
    let z = |k: usize| and_to_bottom(incoming[1 + 2 * k], incoming[2 + 2 * k]);

    let mut pos = NonNegSum::default();
    for k in 0..children {
        pos.push(z(k).max(0.0));
    }
    let (first, second) = top_two((0..children).map(z));
    let first = first.expect("at least one child");

    let zf = z(first);
    out[0] = xadd(zf, pos.without(zf.max(0.0)))?;
    for k in 0..children {
        let zk = z(k);
        let rest = pos.without(zk.max(0.0));
        let best_other = if k == first { second } else { Some(first) };
        let gap = best_other.map_or(INF, |i| relu_gap(z(i)));
        let down = xadd(r, rest)?.min(gap);
        let (s, w) = (incoming[1 + 2 * k], incoming[2 + 2 * k]);
        out[1 + 2 * k] = and_to_top(w, down)?;
        out[2 + 2 * k] = and_to_top(s, down)?;
    }
    Ok(())
}

/// Class layer: a POOL over `K` classes (its top clamped to 1) whose bottoms
/// are each the top of a POOL over that class's `J` templates.
///
/// Slot layout `[c_1, .., c_K, s_11, .., s_JK]`, templates class-major. The
/// `-log K - log J` potential is shared by every legal configuration and
/// cancels from all messages.
pub fn class_tree_update(classes: usize, templates: usize, incoming: &[f64], out: &mut [f64]) -> Result<()> {
    let (k_n, j_n) = (classes, templates);
    if k_n == 0 || j_n == 0 || incoming.len() != k_n + k_n * j_n || out.len() != incoming.len() {
        return Err(Error::Shape("class tree needs K + J*K slots"));
    }
    if incoming.iter().all(|m| m.is_finite()) {
        class_tree_finite(k_n, j_n, incoming, out);
        Ok(())
    } else {
        class_tree_constrained(k_n, j_n, incoming, out)
    }
}

fn class_tree_finite(k_n: usize, j_n: usize, incoming: &[f64], out: &mut [f64]) {
    let cin = &incoming[..k_n];
    let sin = |k: usize, j: usize| incoming[k_n + k * j_n + j];

    // best and runner-up template within each class
    let within: Vec<(usize, Option<usize>)> = (0..k_n)
        .map(|k| {
            let (a, b) = top_two((0..j_n).map(|j| sin(k, j)));
            (a.expect("J > 0"), b)
        })
        .collect();
    let class_best: Vec<f64> = (0..k_n).map(|k| cin[k] + sin(k, within[k].0)).collect();
    let (c1, c2) = top_two(class_best.iter().copied());
    let c1 = c1.expect("K > 0");
    let other_class = |k: usize| {
        let o = if k == c1 { c2 } else { Some(c1) };
        o.map_or(NEG_INF, |i| class_best[i])
    };

    for k in 0..k_n {
        out[k] = sin(k, within[k].0) - other_class(k);
        let (j1, j2) = within[k];
        for j in 0..j_n {
            let same_class = if j == j1 {
                j2.map_or(NEG_INF, |j2| cin[k] + sin(k, j2))
            } else {
                class_best[k]
            };
            out[k_n + k * j_n + j] = cin[k] - same_class.max(other_class(k));
        }
    }
}

/// Infinite incoming messages act as hard evidence: `+inf` forces the
/// variable on, `-inf` forces it off. Each legal configuration turns on one
/// class and one of its templates, so the `K * J` configurations are scanned
/// once per neighbor.
fn class_tree_constrained(k_n: usize, j_n: usize, incoming: &[f64], out: &mut [f64]) -> Result<()> {
    let forced_on = |i: usize| incoming[i] == INF;
    let forced_off = |i: usize| incoming[i] == NEG_INF;
    let fin = |i: usize| if incoming[i].is_finite() { incoming[i] } else { 0.0 };
    let total_on = (0..incoming.len()).filter(|&i| forced_on(i)).count();

    for v in 0..incoming.len() {
        let others_on = total_on - forced_on(v) as usize;
        let mut best = [NEG_INF; 2];
        for k in 0..k_n {
            for j in 0..j_n {
                let s = k_n + k * j_n + j;
                let members = [k, s];
                let blocked = members.iter().any(|&i| i != v && forced_off(i));
                let covered = members.iter().filter(|&&i| i != v && forced_on(i)).count();
                if blocked || covered != others_on {
                    continue;
                }
                let score: f64 = members.iter().filter(|&&i| i != v).map(|&i| fin(i)).sum();
                let on = members.contains(&v) as usize;
                best[on] = best[on].max(score);
            }
        }
        if best == [NEG_INF; 2] {
            return Err(Error::Indeterminate { factor: None });
        }
        out[v] = best[1] - best[0];
    }
    Ok(())
}
