//! Fixed-size bitsets over the points of one system.

use alloc::vec;
use alloc::vec::Vec;

const W: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PointSet {
    len: usize,
    words: Vec<u64>,
}

impl core::fmt::Debug for PointSet {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl PointSet {
    pub fn empty(len: usize) -> Self {
        PointSet { len, words: vec![0; len.div_ceil(W)] }
    }

    pub fn full(len: usize) -> Self {
        let mut s = PointSet { len, words: vec![!0; len.div_ceil(W)] };
        s.trim();
        s
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut s = PointSet::empty(len);
        for i in 0..len {
            if f(i) {
                s.insert(i);
            }
        }
        s
    }

    fn trim(&mut self) {
        let rem = self.len % W;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// Universe size.
    pub fn universe(&self) -> usize {
        self.len
    }

    pub fn contains(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / W] >> (i % W) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / W] |= 1 << (i % W);
    }

    pub fn remove(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / W] &= !(1 << (i % W));
    }

    pub fn set(&mut self, i: usize, v: bool) {
        if v {
            self.insert(i)
        } else {
            self.remove(i)
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.len
    }

    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            core::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * W + b)
            })
        })
    }

    fn zip(&self, other: &PointSet, op: impl Fn(u64, u64) -> u64) -> PointSet {
        assert_eq!(self.len, other.len, "point sets over different systems");
        let mut out = PointSet {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(&a, &b)| op(a, b)).collect(),
        };
        out.trim();
        out
    }

    pub fn and(&self, other: &PointSet) -> PointSet {
        self.zip(other, |a, b| a & b)
    }

    pub fn or(&self, other: &PointSet) -> PointSet {
        self.zip(other, |a, b| a | b)
    }

    pub fn minus(&self, other: &PointSet) -> PointSet {
        self.zip(other, |a, b| a & !b)
    }

    /// `!self | other`
    pub fn implies(&self, other: &PointSet) -> PointSet {
        self.zip(other, |a, b| !a | b)
    }

    pub fn complement(&self) -> PointSet {
        let mut out = PointSet { len: self.len, words: self.words.iter().map(|w| !w).collect() };
        out.trim();
        out
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        assert_eq!(self.len, other.len, "point sets over different systems");
        self.words.iter().zip(&other.words).all(|(&a, &b)| a & !b == 0)
    }
}
