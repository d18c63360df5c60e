//! Extended-real arithmetic on log-domain messages.
//!
//! Messages are plain `f64` values holding `m(1) - m(0)`. Infinite values are
//! genuine IEEE infinities: `+inf` means "the variable must be 1", `-inf`
//! means "the variable must be 0". Any operation that would evaluate
//! `+inf + -inf` is rejected instead of producing NaN.

use crate::error::{Error, Result};

/// A normalized max-product message, `m(y=1) - m(y=0)`.
pub type MessageValue = f64;

pub const INF: f64 = f64::INFINITY;
pub const NEG_INF: f64 = f64::NEG_INFINITY;

const INDETERMINATE: Error = Error::Indeterminate { factor: None };

/// `a + b`, refusing opposite infinities.
#[inline]
pub fn xadd(a: f64, b: f64) -> Result<f64> {
    let s = a + b;
    if s.is_nan() {
        Err(INDETERMINATE)
    } else {
        Ok(s)
    }
}

/// `a - b`, refusing same-signed infinities.
#[inline]
pub fn xsub(a: f64, b: f64) -> Result<f64> {
    xadd(a, -b)
}

/// `max(0, t) - t`, written so that it stays defined at `t = -inf`.
#[inline]
pub fn relu_gap(t: f64) -> f64 {
    if t >= 0.0 {
        0.0
    } else {
        -t
    }
}

/// Sum of non-negative extended reals with removal of single terms.
///
/// Terms equal to `+inf` are counted rather than added so that one of them
/// can be taken back out exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonNegSum {
    finite: f64,
    infinite: u32,
}

impl NonNegSum {
    #[inline]
    pub fn push(&mut self, v: f64) {
        debug_assert!(v >= 0.0);
        if v == INF {
            self.infinite += 1;
        } else {
            self.finite += v;
        }
    }

    #[inline]
    pub fn total(&self) -> f64 {
        if self.infinite > 0 {
            INF
        } else {
            self.finite
        }
    }

    /// Total with the single term `v` (previously pushed) left out.
    #[inline]
    pub fn without(&self, v: f64) -> f64 {
        if v == INF {
            if self.infinite > 1 {
                INF
            } else {
                self.finite
            }
        } else if self.infinite > 0 {
            INF
        } else {
            self.finite - v
        }
    }
}

/// Running sum of extended reals that may contain both infinities.
///
/// This is what a variable's belief accumulator looks like: individual
/// messages can be removed again, and contradictions (`+inf` and `-inf` both
/// present) only become an error when the sum is actually read.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExtSum {
    pub finite: f64,
    pub pos: u32,
    pub neg: u32,
}

impl ExtSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        if v == INF {
            self.pos += 1;
        } else if v == NEG_INF {
            self.neg += 1;
        } else {
            self.finite += v;
        }
    }

    #[inline]
    pub fn remove(&mut self, v: f64) {
        if v == INF {
            self.pos -= 1;
        } else if v == NEG_INF {
            self.neg -= 1;
        } else {
            self.finite -= v;
        }
    }

    #[inline]
    pub fn value(&self) -> Result<f64> {
        match (self.pos > 0, self.neg > 0) {
            (true, true) => Err(INDETERMINATE),
            (true, false) => Ok(INF),
            (false, true) => Ok(NEG_INF),
            (false, false) => Ok(self.finite),
        }
    }

    /// Value with one contained term `v` excluded, plus an extra term `extra`.
    #[inline]
    pub fn value_without(&self, v: f64, extra: f64) -> Result<f64> {
        let mut s = *self;
        s.remove(v);
        s.add(extra);
        s.value()
    }
}
