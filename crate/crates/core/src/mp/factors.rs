//! Closed-form max-product updates for the AND, OR and POOL factors.
//!
//! Every function takes the *incoming* messages (belief minus the factor's
//! own previous message) and returns the fresh *outgoing* messages, all in
//! normalized form. Infinite inputs are handled by their limits; an update
//! whose inputs are jointly infeasible fails with [`Error::Indeterminate`].

use crate::error::{Error, Result};
use crate::ext::{relu_gap, xadd, NonNegSum, INF, NEG_INF};

/// Outgoing messages of an AND factor `b = t1 AND t2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AndMessages {
    pub t1: f64,
    pub t2: f64,
    pub b: f64,
}

/// Message to one top of an AND factor given the other top and the bottom.
///
/// `max(0, other + b) - max(0, other)`, rearranged so that `other = ±inf`
/// takes its limit.
#[inline]
pub fn and_to_top(other: f64, b: f64) -> Result<f64> {
    if other >= 0.0 {
        Ok(if b > -other { b } else { -other })
    } else {
        Ok(xadd(other, b)?.max(0.0))
    }
}

/// Message to the bottom of an AND factor: `min(t1 + t2, t1, t2)`.
#[inline]
pub fn and_to_bottom(t1: f64, t2: f64) -> f64 {
    if t1 == NEG_INF || t2 == NEG_INF {
        // either top forced off forces the bottom off
        return NEG_INF;
    }
    (t1 + t2).min(t1).min(t2)
}

pub fn and_update(t1: f64, t2: f64, b: f64) -> Result<AndMessages> {
    Ok(AndMessages {
        t1: and_to_top(t2, b)?,
        t2: and_to_top(t1, b)?,
        b: and_to_bottom(t1, t2),
    })
}

/// Indices of the largest and second largest entries, lowest index on ties.
#[inline]
pub(crate) fn top_two(values: impl Iterator<Item = f64>) -> (Option<usize>, Option<usize>) {
    let (mut i1, mut i2): (Option<(usize, f64)>, Option<(usize, f64)>) = (None, None);
    for (i, v) in values.enumerate() {
        match i1 {
            Some((_, b1)) if v <= b1 => {
                if i2.is_none_or(|(_, b2)| v > b2) {
                    i2 = Some((i, v));
                }
            }
            _ => {
                i2 = i1;
                i1 = Some((i, v));
            }
        }
    }
    (i1.map(|p| p.0), i2.map(|p| p.0))
}

/// OR factor `b = t_1 OR ... OR t_M`.
///
/// Writes the messages to the tops into `out_tops` and returns the message to
/// the bottom. An empty max is `-inf`, which makes `M = 1` a pass-through.
pub fn or_update(tops: &[f64], b: f64, out_tops: &mut [f64]) -> Result<f64> {
    if tops.is_empty() {
        return Err(Error::Shape("OR factor needs at least one top"));
    }
    debug_assert_eq!(tops.len(), out_tops.len());
    let mut pos = NonNegSum::default();
    for &t in tops {
        pos.push(t.max(0.0));
    }
    let (first, second) = top_two(tops.iter().copied());
    let first = first.expect("non-empty");
    for (m, out) in out_tops.iter_mut().enumerate() {
        let rest = pos.without(tops[m].max(0.0));
        let best_other = if m == first { second } else { Some(first) };
        let gap = best_other.map_or(INF, |i| relu_gap(tops[i]));
        *out = xadd(b, rest)?.min(gap);
    }
    let ti = tops[first];
    xadd(ti, pos.without(ti.max(0.0)))
}

/// POOL factor with per-bottom log potentials `w_m` (exactly one bottom is on
/// iff the top is on; activating bottom `m` scores `w_m`).
///
/// Returns the message to the top and writes the messages to the bottoms.
pub fn pool_update_weighted(
    t: f64,
    bottoms: &[f64],
    log_weights: &[f64],
    out_bottoms: &mut [f64],
) -> Result<f64> {
    if bottoms.is_empty() {
        return Err(Error::Shape("POOL factor needs at least one bottom"));
    }
    debug_assert_eq!(bottoms.len(), log_weights.len());
    let score = |m: usize| bottoms[m] + log_weights[m];
    let (first, second) = top_two((0..bottoms.len()).map(score));
    let first = first.expect("non-empty");
    for (m, out) in out_bottoms.iter_mut().enumerate() {
        let best_other = if m == first { second } else { Some(first) };
        let w = log_weights[m];
        let others = best_other.map_or(INF, |j| w - score(j));
        *out = xadd(t, w)?.min(others);
    }
    Ok(score(first))
}

/// POOL factor with the uniform `-log M` potential.
pub fn pool_update(t: f64, bottoms: &[f64], out_bottoms: &mut [f64]) -> Result<f64> {
    if bottoms.is_empty() {
        return Err(Error::Shape("POOL factor needs at least one bottom"));
    }
    let w = -libm::log(bottoms.len() as f64);
    let (first, second) = top_two(bottoms.iter().copied());
    let first = first.expect("non-empty");
    for (m, out) in out_bottoms.iter_mut().enumerate() {
        let best_other = if m == first { second } else { Some(first) };
        let others = best_other.map_or(INF, |j| -bottoms[j]);
        *out = xadd(t, w)?.min(others);
    }
    Ok(bottoms[first] + w)
}

/// Damped message assignment `(1 - alpha) * old + alpha * fresh`.
///
/// `alpha = 1` returns `fresh` bit-for-bit. An infinite `old` has no finite
/// blend and is replaced by `fresh`.
#[inline]
pub fn damped_assign(old: f64, fresh: f64, alpha: f64) -> f64 {
    debug_assert!(alpha > 0.0 && alpha <= 1.0);
    if alpha == 1.0 || old == fresh || !old.is_finite() || !fresh.is_finite() {
        fresh
    } else {
        (1.0 - alpha) * old + alpha * fresh
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = core::f64::consts::LN_2;

    #[test]
    fn and_examples() {
        let m = and_update(1.7, 0.0, 0.0).unwrap();
        assert_eq!(m.t1, 0.0);
        assert_eq!(and_update(0.0, 5.0, 3.0).unwrap().t1, 3.0);
        assert_eq!(and_update(2.0, -1.0, 0.0).unwrap().b, -1.0);
    }

    #[test]
    fn and_infinite_limits() {
        // other top forced on: the top just sees the bottom
        assert_eq!(and_to_top(INF, -2.0).unwrap(), -2.0);
        // other top forced off: no information
        assert_eq!(and_to_top(NEG_INF, 4.0).unwrap(), 0.0);
        assert!(and_to_top(NEG_INF, INF).is_err());
        assert_eq!(and_to_bottom(INF, NEG_INF), NEG_INF);
        assert_eq!(and_to_bottom(INF, INF), INF);
    }

    #[test]
    fn or_examples() {
        let mut out = [0.0];
        assert_eq!(or_update(&[0.7], -1.2, &mut out).unwrap(), 0.7);
        assert_eq!(out[0], -1.2);

        let mut out = [0.0; 2];
        assert_eq!(or_update(&[1.0, -3.0], 0.0, &mut out).unwrap(), 1.0);
        or_update(&[1.0, 0.4], 2.0, &mut out).unwrap();
        assert_eq!(out[1], 0.0);
        assert!(or_update(&[], 0.0, &mut []).is_err());
    }

    #[test]
    fn or_bottom_off_forces_tops_off() {
        let mut out = [0.0; 3];
        or_update(&[0.3, -2.0, 1.0], NEG_INF, &mut out).unwrap();
        assert!(out.iter().all(|&m| m == NEG_INF));
    }

    #[test]
    fn pool_examples() {
        let mut out = [0.0];
        assert_eq!(pool_update(0.0, &[0.0], &mut out).unwrap(), 0.0);
        assert_eq!(out[0], 0.0);

        let mut out = [0.0; 2];
        let t = pool_update(0.0, &[1.0, -2.0], &mut out).unwrap();
        assert!((t - (1.0 - LN2)).abs() < 1e-15);
        pool_update(0.5, &[0.3, -2.0], &mut out).unwrap();
        assert!((out[0] - (0.5 - LN2)).abs() < 1e-15);
    }

    #[test]
    fn pool_top_off_forces_bottoms_off() {
        let mut out = [0.0; 4];
        pool_update(NEG_INF, &[1.0, 2.0, -1.0, 0.0], &mut out).unwrap();
        assert!(out.iter().all(|&m| m == NEG_INF));
    }

    #[test]
    fn weighted_pool_matches_uniform() {
        let b = [0.4, -1.0, 2.5];
        let w = [-libm::log(3.0); 3];
        let (mut o1, mut o2) = ([0.0; 3], [0.0; 3]);
        let t1 = pool_update(0.2, &b, &mut o1).unwrap();
        let t2 = pool_update_weighted(0.2, &b, &w, &mut o2).unwrap();
        assert!((t1 - t2).abs() < 1e-12);
        for (a, b) in o1.iter().zip(&o2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn damping() {
        assert_eq!(damped_assign(7.0, -3.25, 1.0), -3.25);
        assert_eq!(damped_assign(0.0, 4.0, 0.5), 2.0);
        assert!((damped_assign(-1.0, 3.0, 0.8) - 2.2).abs() < 1e-12);
        assert_eq!(damped_assign(NEG_INF, 1.0, 0.5), 1.0);
    }

    #[test]
    fn top_two_ties_break_low() {
        assert_eq!(top_two([1.0, 3.0, 3.0, 2.0].into_iter()), (Some(1), Some(2)));
        assert_eq!(top_two([5.0].into_iter()), (Some(0), None));
        assert_eq!(top_two([2.0, 2.0].into_iter()), (Some(0), Some(1)));
    }
}
