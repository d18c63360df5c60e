//! Bit-packed binary arrays.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    fn zeros(len: usize) -> Self {
        Bits { words: vec![0; len.div_ceil(64)], len }
    }

    #[inline]
    fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Binary array of shape `(features, rows, cols)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryTensor3 {
    dims: [usize; 3],
    bits: Bits,
}

impl BinaryTensor3 {
    pub fn zeros(f: usize, h: usize, w: usize) -> Result<Self> {
        if f == 0 || h == 0 || w == 0 {
            return Err(Error::Shape("tensor dims must be positive"));
        }
        let len = f.checked_mul(h).and_then(|x| x.checked_mul(w)).ok_or(Error::Shape("tensor too large"))?;
        Ok(BinaryTensor3 { dims: [f, h, w], bits: Bits::zeros(len) })
    }

    pub fn from_fn(f: usize, h: usize, w: usize, mut value: impl FnMut(usize, usize, usize) -> bool) -> Result<Self> {
        let mut t = Self::zeros(f, h, w)?;
        for a in 0..f {
            for r in 0..h {
                for c in 0..w {
                    if value(a, r, c) {
                        t.set(a, r, c, true);
                    }
                }
            }
        }
        Ok(t)
    }

    /// Builds a tensor from row-major `0/1` values.
    pub fn from_bits(f: usize, h: usize, w: usize, values: &[bool]) -> Result<Self> {
        if values.len() != f * h * w {
            return Err(Error::Shape("value count does not match dims"));
        }
        Self::from_fn(f, h, w, |a, r, c| values[(a * h + r) * w + c])
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, f: usize, r: usize, c: usize) -> usize {
        (f * self.dims[1] + r) * self.dims[2] + c
    }

    #[inline]
    pub fn get(&self, f: usize, r: usize, c: usize) -> bool {
        self.bits.get(self.index(f, r, c))
    }

    #[inline]
    pub fn set(&mut self, f: usize, r: usize, c: usize, v: bool) {
        let i = self.index(f, r, c);
        self.bits.set(i, v);
    }

    #[inline]
    pub fn get_flat(&self, i: usize) -> bool {
        self.bits.get(i)
    }

    #[inline]
    pub fn set_flat(&mut self, i: usize, v: bool) {
        self.bits.set(i, v);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones()
    }

    /// Row-major iterator over all entries.
    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(|i| self.bits.get(i))
    }

    /// Number of positions where `self` and `other` differ.
    pub fn hamming(&self, other: &Self) -> Result<usize> {
        if self.dims != other.dims {
            return Err(Error::Shape("hamming distance needs equal dims"));
        }
        Ok(self.bits.words.iter().zip(&other.bits.words).map(|(a, b)| (a ^ b).count_ones() as usize).sum())
    }

    /// Elementwise XOR, the disagreement indicator of two tensors.
    pub fn xor(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::Shape("xor needs equal dims"));
        }
        let mut out = self.clone();
        for (w, o) in out.bits.words.iter_mut().zip(&other.bits.words) {
            *w ^= o;
        }
        Ok(out)
    }

    /// One feature plane as a new single-channel tensor.
    pub fn plane(&self, f: usize) -> Self {
        let [_, h, w] = self.dims;
        Self::from_fn(1, h, w, |_, r, c| self.get(f, r, c)).expect("valid dims")
    }
}

/// Binary array of shape `(channels_below, features, rows, cols)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryTensor4 {
    dims: [usize; 4],
    bits: Bits,
}

impl BinaryTensor4 {
    pub fn zeros(a: usize, f: usize, h: usize, w: usize) -> Result<Self> {
        if a == 0 || f == 0 || h == 0 || w == 0 {
            return Err(Error::Shape("tensor dims must be positive"));
        }
        let len = [a, f, h, w]
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(Error::Shape("tensor too large"))?;
        Ok(BinaryTensor4 { dims: [a, f, h, w], bits: Bits::zeros(len) })
    }

    pub fn from_fn(
        a: usize,
        f: usize,
        h: usize,
        w: usize,
        mut value: impl FnMut(usize, usize, usize, usize) -> bool,
    ) -> Result<Self> {
        let mut t = Self::zeros(a, f, h, w)?;
        for i in 0..t.len() {
            let (aa, ff, r, c) = t.unravel(i);
            if value(aa, ff, r, c) {
                t.bits.set(i, true);
            }
        }
        Ok(t)
    }

    #[inline]
    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, a: usize, f: usize, r: usize, c: usize) -> usize {
        ((a * self.dims[1] + f) * self.dims[2] + r) * self.dims[3] + c
    }

    #[inline]
    pub fn unravel(&self, i: usize) -> (usize, usize, usize, usize) {
        let [_, f, h, w] = self.dims;
        (i / (f * h * w), i / (h * w) % f, i / w % h, i % w)
    }

    #[inline]
    pub fn get(&self, a: usize, f: usize, r: usize, c: usize) -> bool {
        self.bits.get(self.index(a, f, r, c))
    }

    #[inline]
    pub fn set(&mut self, a: usize, f: usize, r: usize, c: usize, v: bool) {
        let i = self.index(a, f, r, c);
        self.bits.set(i, v);
    }

    #[inline]
    pub fn get_flat(&self, i: usize) -> bool {
        self.bits.get(i)
    }

    #[inline]
    pub fn set_flat(&mut self, i: usize, v: bool) {
        self.bits.set(i, v);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(|i| self.bits.get(i))
    }

    /// Whether feature `f` has any active weight.
    pub fn feature_used(&self, f: usize) -> bool {
        let [a_n, _, h, w] = self.dims;
        (0..a_n).any(|a| (0..h).any(|r| (0..w).any(|c| self.get(a, f, r, c))))
    }

    /// Keeps only the listed features, in order.
    pub fn select_features(&self, keep: &[usize]) -> Result<Self> {
        let [a_n, _, h, w] = self.dims;
        Self::from_fn(a_n, keep.len(), h, w, |a, f, r, c| self.get(a, keep[f], r, c))
    }
}
