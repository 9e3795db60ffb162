//! Permutations in one-line form, intervals and index sets of `Z_n`, and
//! deterministic generators.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bijection of `{0, .., n-1}`; `images[i]` is the image of `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Parse {
                token: String::new(),
                reason: "empty permutation".into(),
            });
        }
        let n = images.len();
        let mut seen = vec![false; n];
        for &v in &images {
            if v >= n {
                return Err(Error::Parse {
                    token: v.to_string(),
                    reason: format!("value out of range for n = {n}"),
                });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::Parse {
                    token: v.to_string(),
                    reason: format!("duplicate value {v}"),
                });
            }
        }
        Ok(Self { images })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    pub fn reverse(n: usize) -> Self {
        Self {
            images: (0..n).rev().collect(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.images.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    #[inline]
    pub fn image(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.images.iter().enumerate() {
            inv[v] = i;
        }
        Self { images: inv }
    }

    /// `i -> n-1-σ(i)`, the vertical reflection.
    pub fn complement(&self) -> Self {
        let n = self.len();
        Self {
            images: self.images.iter().map(|&v| n - 1 - v).collect(),
        }
    }

    /// `i -> σ(n-1-i)`, the horizontal reflection.
    pub fn reversed(&self) -> Self {
        Self {
            images: self.images.iter().rev().copied().collect(),
        }
    }

    /// The pattern of `σ` restricted to `indices` (ascending), standardized to
    /// `{0, .., r-1}`. Returns `None` for an empty index set.
    pub fn restrict(&self, indices: &[usize]) -> Option<Self> {
        if indices.is_empty() {
            return None;
        }
        Some(Self {
            images: standardize(indices.iter().map(|&i| self.images[i])),
        })
    }
}

/// Replaces distinct values by their ranks.
pub fn standardize<I: IntoIterator<Item = usize>>(values: I) -> Vec<usize> {
    let values: Vec<usize> = values.into_iter().collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by_key(|&i| values[i]);
    let mut ranks = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r;
    }
    ranks
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(images: Vec<usize>) -> Result<Self> {
        Self::new(images)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.images
    }
}

impl FromStr for Permutation {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut images = Vec::new();
        for token in text.split_whitespace() {
            let v: usize = token.parse().map_err(|_| Error::Parse {
                token: token.to_string(),
                reason: "not a nonnegative integer".into(),
            })?;
            images.push(v);
        }
        Self::new(images)
    }
}

/// Parses the one-line file format.
pub fn parse_permutation(text: &str) -> Result<Permutation> {
    text.parse()
}

/// One line of space-separated images, without the trailing newline.
impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.images.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// The permutation file format: one line, newline terminated.
pub fn format_permutation(p: &Permutation) -> String {
    format!("{p}\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Identity,
    Reverse,
    Interleave,
    Random,
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "reverse" => Ok(Self::Reverse),
            "interleave" => Ok(Self::Interleave),
            "random" => Ok(Self::Random),
            other => Err(Error::Param(format!("unknown generator kind {other:?}"))),
        }
    }
}

pub fn generate(kind: GeneratorKind, n: usize, seed: u64) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::Param("n must be at least 1".into()));
    }
    let images = match kind {
        GeneratorKind::Identity => (0..n).collect(),
        GeneratorKind::Reverse => (0..n).rev().collect(),
        GeneratorKind::Interleave => {
            if !n.is_multiple_of(2) {
                return Err(Error::Param(format!("interleave needs even n, got {n}")));
            }
            (0..n).map(|i| i ^ 1).collect()
        }
        GeneratorKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v: Vec<usize> = (0..n).collect();
            // Fisher–Yates.
            v.shuffle(&mut rng);
            v
        }
    };
    Ok(Permutation { images })
}

/// Half-open range `[lo, hi)` of indices or values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "[usize; 2]", from = "[usize; 2]")]
pub struct Interval {
    pub lo: usize,
    pub hi: usize,
}

impl Interval {
    #[inline]
    pub const fn new(lo: usize, hi: usize) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    #[inline]
    pub const fn len(&self) -> usize {
        self.hi - self.lo
    }

    #[inline]
    pub const fn is_empty(&self) -> bool {
        self.hi == self.lo
    }

    #[inline]
    pub fn contains(&self, x: usize) -> bool {
        self.lo <= x && x < self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi).max(lo);
        Interval { lo, hi }
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn iter(&self) -> std::ops::Range<usize> {
        self.lo..self.hi
    }
}

impl From<Interval> for [usize; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl From<[usize; 2]> for Interval {
    fn from([lo, hi]: [usize; 2]) -> Self {
        Interval { lo, hi: hi.max(lo) }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

/// Sorted set of distinct indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexSet {
    members: Vec<usize>,
}

impl IndexSet {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Self { members }
    }

    pub fn from_sorted_unchecked(members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Self { members }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    pub fn in_range(&self, n: usize) -> bool {
        self.members.last().is_none_or(|&m| m < n)
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut v = self.members.clone();
        v.extend_from_slice(&other.members);
        IndexSet::new(v)
    }
}

impl From<Interval> for IndexSet {
    fn from(i: Interval) -> Self {
        Self {
            members: i.iter().collect(),
        }
    }
}

impl FromIterator<usize> for IndexSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        IndexSet::new(iter.into_iter().collect())
    }
}

/// A set of indices given either as an interval or as an explicit set.
#[derive(Debug, Clone, Copy)]
pub enum Subset<'a> {
    Interval(Interval),
    Set(&'a IndexSet),
}

impl Subset<'_> {
    pub fn len(&self) -> usize {
        match self {
            Subset::Interval(i) => i.len(),
            Subset::Set(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn for_each(&self, mut f: impl FnMut(usize)) {
        match self {
            Subset::Interval(i) => i.iter().for_each(&mut f),
            Subset::Set(s) => s.members().iter().copied().for_each(&mut f),
        }
    }
}

impl From<Interval> for Subset<'_> {
    fn from(i: Interval) -> Self {
        Subset::Interval(i)
    }
}

impl<'a> From<&'a IndexSet> for Subset<'a> {
    fn from(s: &'a IndexSet) -> Self {
        Subset::Set(s)
    }
}
