use std::fmt;

use super::StateId;

/// Fixed-width set of states backed by 64-bit words.
///
/// Bits past `len` in the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SatSet {
    len: usize,
    words: Vec<u64>,
}

impl SatSet {
    pub fn empty(len: usize) -> Self {
        SatSet { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn full(len: usize) -> Self {
        let mut set = SatSet { len, words: vec![!0; len.div_ceil(64)] };
        set.clear_tail();
        set
    }

    pub fn from_states(len: usize, states: impl IntoIterator<Item = StateId>) -> Self {
        let mut set = Self::empty(len);
        for s in states {
            set.insert(s);
        }
        set
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// Width of the set (the model's state count).
    pub fn width(&self) -> usize {
        self.len
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn contains(&self, s: StateId) -> bool {
        let i = s.index();
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Inserts `s`, returning true if it was absent.
    #[inline]
    pub fn insert(&mut self, s: StateId) -> bool {
        let i = s.index();
        assert!(i < self.len, "state {i} outside set of width {}", self.len);
        let word = &mut self.words[i / 64];
        let mask = 1u64 << (i % 64);
        let fresh = *word & mask == 0;
        *word |= mask;
        fresh
    }

    #[inline]
    pub fn remove(&mut self, s: StateId) {
        let i = s.index();
        if i < self.len {
            self.words[i / 64] &= !(1u64 << (i % 64));
        }
    }

    /// Sets every bit in `start..end`.
    pub fn insert_range(&mut self, start: usize, end: usize) {
        assert!(start <= end && end <= self.len);
        let mut i = start;
        while i < end {
            if i.is_multiple_of(64) && end - i >= 64 {
                self.words[i / 64] = !0;
                i += 64;
            } else {
                self.words[i / 64] |= 1u64 << (i % 64);
                i += 1;
            }
        }
    }

    /// True when any bit in `start..end` is set.
    pub fn any_in_range(&self, start: usize, end: usize) -> bool {
        let mut i = start;
        while i < end {
            if i.is_multiple_of(64) && end - i >= 64 {
                if self.words[i / 64] != 0 {
                    return true;
                }
                i += 64;
            } else {
                if self.words[i / 64] >> (i % 64) & 1 == 1 {
                    return true;
                }
                i += 1;
            }
        }
        false
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn check_width(&self, other: &SatSet) {
        assert_eq!(self.len, other.len, "set width mismatch");
    }

    pub fn union_with(&mut self, other: &SatSet) {
        self.check_width(other);
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a |= b);
    }

    pub fn intersect_with(&mut self, other: &SatSet) {
        self.check_width(other);
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a &= b);
    }

    pub fn difference_with(&mut self, other: &SatSet) {
        self.check_width(other);
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a &= !b);
    }

    pub fn complement(&self) -> SatSet {
        let mut out = SatSet { len: self.len, words: self.words.iter().map(|w| !w).collect() };
        out.clear_tail();
        out
    }

    pub fn is_subset(&self, other: &SatSet) -> bool {
        self.check_width(other);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn first(&self) -> Option<StateId> {
        self.iter().next()
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(StateId::new(wi * 64 + bit))
            })
        })
    }
}

impl fmt::Debug for SatSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|s| s.index())).finish()
    }
}
