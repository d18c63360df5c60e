//! Exhaustive max-marginalization of a single factor.
//!
//! Used to check the closed-form updates. Infinite incoming messages are
//! treated as hard evidence: `+inf` forces the variable to 1 and `-inf`
//! forces it to 0.

use alloc::vec;
use alloc::vec::Vec;

use super::FactorKind;
use crate::error::{Error, Result};

pub const ORACLE_MAX_ARITY: usize = 20;

/// Log potential of `kind` at the assignment `x`, or `None` if illegal.
fn log_potential(kind: FactorKind, log_weights: Option<&[f64]>, x: &[bool]) -> Option<f64> {
    match kind {
        FactorKind::And => (x[2] == (x[0] && x[1])).then_some(0.0),
        FactorKind::Or => (x[0] == x[1..].iter().any(|&v| v)).then_some(0.0),
        FactorKind::Pool => {
            let on: Vec<usize> = (1..x.len()).filter(|&i| x[i]).collect();
            match (x[0], on.as_slice()) {
                (false, []) => Some(0.0),
                (true, [m]) => Some(match log_weights {
                    Some(w) => w[m - 1],
                    None => -libm::log((x.len() - 1) as f64),
                }),
                _ => None,
            }
        }
        FactorKind::AndOrTree => {
            let any = x[1..].chunks(2).any(|p| p[0] && p[1]);
            (x[0] == any).then_some(0.0)
        }
        FactorKind::ClassTree { classes, templates } => {
            let (k, j) = (classes as usize, templates as usize);
            let c_on: Vec<usize> = (0..k).filter(|&i| x[i]).collect();
            let s_on: Vec<usize> = (0..k * j).filter(|&i| x[k + i]).collect();
            match (c_on.as_slice(), s_on.as_slice()) {
                ([c], [s]) if s / j == *c => {
                    Some(-libm::log(k as f64) - libm::log(j as f64))
                }
                _ => None,
            }
        }
    }
}

/// Brute-force outgoing messages for every neighbor of a factor.
///
/// For each neighbor `v`, maximizes the factor potential plus the incoming
/// messages of the other neighbors over all legal assignments with `v = 1`
/// and with `v = 0`, and returns the difference.
pub fn oracle_factor_update(
    kind: FactorKind,
    log_weights: Option<&[f64]>,
    incoming: &[f64],
) -> Result<Vec<f64>> {
    let n = incoming.len();
    if n > ORACLE_MAX_ARITY {
        return Err(Error::ArityTooLarge { arity: n, max: ORACLE_MAX_ARITY });
    }
    if !kind.check_arity(n) {
        return Err(Error::Shape("arity does not match factor kind"));
    }
    let mut best = vec![[f64::NEG_INFINITY; 2]; n];
    let mut x = vec![false; n];
    for bits in 0u32..(1u32 << n) {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = bits >> i & 1 == 1;
        }
        let Some(pot) = log_potential(kind, log_weights, &x) else {
            continue;
        };
        // violated hard evidence, and the finite part of the score
        let mut violated: Option<usize> = None;
        let mut violations = 0;
        let mut score = pot;
        for i in 0..n {
            let m = incoming[i];
            if (m == f64::INFINITY && !x[i]) || (m == f64::NEG_INFINITY && x[i]) {
                violations += 1;
                violated = Some(i);
            } else if x[i] && m.is_finite() {
                score += m;
            }
        }
        if violations > 1 {
            continue;
        }
        for v in 0..n {
            if violations == 1 && violated != Some(v) {
                continue;
            }
            let own = if x[v] && incoming[v].is_finite() { incoming[v] } else { 0.0 };
            let slot = &mut best[v][x[v] as usize];
            *slot = slot.max(score - own);
        }
    }
    best.iter()
        .map(|&[v0, v1]| {
            if v0 == f64::NEG_INFINITY && v1 == f64::NEG_INFINITY {
                Err(Error::Indeterminate { factor: None })
            } else {
                Ok(v1 - v0)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    const LN2: f64 = core::f64::consts::LN_2;

    #[test]
    fn and_example() {
        let out = oracle_factor_update(FactorKind::And, None, &[0.0, 5.0, 3.0]).unwrap();
        assert_eq!(out[0], 3.0);
    }

    #[test]
    fn or_example() {
        let out = oracle_factor_update(FactorKind::Or, None, &[0.0, 1.0, -3.0]).unwrap();
        assert_eq!(out[0], 1.0);
    }

    #[test]
    fn pool_example() {
        let out = oracle_factor_update(FactorKind::Pool, None, &[0.0, 1.0, -2.0]).unwrap();
        assert!((out[0] - (1.0 - LN2)).abs() < 1e-12);
    }

    #[test]
    fn arity_limit() {
        let inc = vec![0.0; 21];
        assert!(matches!(
            oracle_factor_update(FactorKind::Or, None, &inc),
            Err(Error::ArityTooLarge { .. })
        ));
    }

    #[test]
    fn hard_evidence() {
        // pool top forced off: every bottom must be off
        let out = oracle_factor_update(FactorKind::Pool, None, &[f64::NEG_INFINITY, 1.0, 2.0]).unwrap();
        assert_eq!(out[1], f64::NEG_INFINITY);
        assert_eq!(out[2], f64::NEG_INFINITY);
    }
}
