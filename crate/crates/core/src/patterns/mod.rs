//! Pattern occurrence counting and the structural consequences of having few
//! occurrences: concentration, pseudomonotone subsets and pair deletion.

mod destroy;
mod structure;

use std::ops::ControlFlow;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{IndexSet, Permutation};

pub use destroy::{
    destroy_pattern, verify_destroyed, DeletionAudit, DeletionSet, DestroyCheck, DestroyOutcome,
    DESTROY_MAX_N, VERIFY_MAX_M,
};
pub use structure::{
    concentration_intervals, longest_increasing, longest_monotone, pseudomonotone_subset,
    scatter_property, BlockConcentration, ConcentrationFamily, PseudomonotoneReport, ScatterReport,
    ScatterWitness,
};

/// Largest pattern length handled by the exact counters.
pub const MAX_EXACT_M: usize = 6;

/// Enumeration-based counters refuse inputs with more than this many
/// candidate index sets.
pub const ENUMERATION_GUARD: f64 = 2e9;

/// A pattern `τ ∈ 𝔖_m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pattern(Permutation);

impl Pattern {
    pub fn new(tau: Permutation) -> Self {
        Self(tau)
    }

    pub fn from_images(images: &[usize]) -> Result<Self> {
        Permutation::new(images.to_vec()).map(Self)
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }

    pub fn perm(&self) -> &Permutation {
        &self.0
    }

    pub fn images(&self) -> &[usize] {
        self.0.images()
    }
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse().map(Self)
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// All of `𝔖_m` in lexicographic order.
pub fn all_patterns(m: usize) -> Vec<Pattern> {
    (0..m)
        .permutations(m)
        .map(|p| Pattern(Permutation::new(p).expect("permutations of 0..m are valid")))
        .collect()
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Binary indexed tree over `0..n` counting inserted values.
struct Fenwick(Vec<u64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Self(vec![0; n + 1])
    }

    fn add(&mut self, v: usize) {
        let mut i = v + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted values `< v`.
    fn below(&self, v: usize) -> u64 {
        let mut i = v;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// `#{i < j : σ(i) < σ(j)}` for each `j`.
fn smaller_before(images: &[usize]) -> Vec<u64> {
    let mut bit = Fenwick::new(images.len());
    images
        .iter()
        .map(|&v| {
            let c = bit.below(v);
            bit.add(v);
            c
        })
        .collect()
}

fn count_len2(images: &[usize], tau: &[usize]) -> u64 {
    let n = images.len() as u64;
    let ascents: u64 = smaller_before(images).iter().sum();
    if tau == [0, 1] {
        ascents
    } else {
        n * (n - 1) / 2 - ascents
    }
}

/// All six length-3 counts from, for each middle point, how many earlier and
/// later points lie below or above it.
fn counts_len3(images: &[usize]) -> [u64; 6] {
    let n = images.len() as u64;
    let ll = smaller_before(images);
    let (mut c012, mut c210, mut low_mid, mut high_mid) = (0, 0, 0, 0);
    let (mut first_low, mut first_high) = (0, 0);
    for (j, &v) in images.iter().enumerate() {
        let j = j as u64;
        let l_less = ll[j as usize];
        let l_greater = j - l_less;
        let r_less = v as u64 - l_less;
        let r_greater = n - 1 - j - r_less;
        c012 += l_less * r_greater;
        c210 += l_greater * r_less;
        low_mid += l_greater * r_greater;
        high_mid += l_less * r_less;
        first_low += r_greater * r_greater.saturating_sub(1) / 2;
        first_high += r_less * r_less.saturating_sub(1) / 2;
    }
    let c021 = first_low - c012;
    let c120 = high_mid - c021;
    let c201 = first_high - c210;
    let c102 = low_mid - c201;
    // lexicographic: 012, 021, 102, 120, 201, 210
    [c012, c021, c102, c120, c201, c210]
}

fn lex_rank3(tau: &[usize]) -> usize {
    match tau {
        [0, 1, 2] => 0,
        [0, 2, 1] => 1,
        [1, 0, 2] => 2,
        [1, 2, 0] => 3,
        [2, 0, 1] => 4,
        _ => 5,
    }
}

/// For each position `d` of `τ`, the earlier positions holding the nearest
/// smaller and nearest larger value; an occurrence's image at `d` must lie
/// strictly between the images chosen there.
fn neighbours(tau: &[usize]) -> Vec<(Option<usize>, Option<usize>)> {
    (0..tau.len())
        .map(|d| {
            let below = (0..d).filter(|&e| tau[e] < tau[d]).max_by_key(|&e| tau[e]);
            let above = (0..d).filter(|&e| tau[e] > tau[d]).min_by_key(|&e| tau[e]);
            (below, above)
        })
        .collect()
}

/// Visits every occurrence of `τ` in `σ` as an increasing index tuple, in
/// lexicographic order, until the visitor breaks.
pub fn for_each_occurrence<B>(
    sigma: &Permutation,
    tau: &Pattern,
    mut visit: impl FnMut(&[usize]) -> ControlFlow<B>,
) -> Option<B> {
    let images = sigma.images();
    let m = tau.m();
    if m == 0 || m > images.len() {
        return None;
    }
    let nb = neighbours(tau.images());
    let mut idx = vec![0usize; m];
    fn rec<B>(
        d: usize,
        start: usize,
        images: &[usize],
        nb: &[(Option<usize>, Option<usize>)],
        idx: &mut Vec<usize>,
        visit: &mut impl FnMut(&[usize]) -> ControlFlow<B>,
    ) -> ControlFlow<B> {
        let m = idx.len();
        let (below, above) = nb[d];
        let lo = below.map(|e| images[idx[e]]);
        let hi = above.map(|e| images[idx[e]]);
        for i in start..=images.len() - (m - d) {
            let v = images[i];
            if lo.is_some_and(|l| v <= l) || hi.is_some_and(|h| v >= h) {
                continue;
            }
            idx[d] = i;
            if d + 1 == m {
                visit(idx)?;
            } else {
                rec(d + 1, i + 1, images, nb, idx, visit)?;
            }
        }
        ControlFlow::Continue(())
    }
    match rec(0, 0, images, &nb, &mut idx, &mut visit) {
        ControlFlow::Break(b) => Some(b),
        ControlFlow::Continue(()) => None,
    }
}

pub(crate) fn guard_enumeration(n: usize, m: usize) -> Result<()> {
    let cands = binomial(n, m);
    if cands > ENUMERATION_GUARD {
        return Err(Error::Guard(format!(
            "C({n}, {m}) = {cands:.3e} index sets exceed the enumeration limit {ENUMERATION_GUARD:.0e}"
        )));
    }
    Ok(())
}

/// `Λ^τ(σ)`, optionally counting only index sets inside `restriction`.
///
/// Lengths 1 to 3 use closed-form counts from a Fenwick tree in
/// `O(n log n)`; lengths 4 to 6 use a pruned enumeration.
pub fn count_pattern(
    sigma: &Permutation,
    tau: &Pattern,
    restriction: Option<&IndexSet>,
) -> Result<u64> {
    let restricted;
    let sigma = match restriction {
        None => sigma,
        Some(set) => {
            if !set.in_range(sigma.len()) {
                return Err(Error::Param("restriction index out of range".into()));
            }
            match sigma.restrict(set.members()) {
                None => return Ok(0),
                Some(p) => {
                    restricted = p;
                    &restricted
                }
            }
        }
    };
    let n = sigma.len();
    let m = tau.m();
    if m > MAX_EXACT_M {
        return Err(Error::Guard(format!(
            "exact counting supports m <= {MAX_EXACT_M}; use the integral estimator for m = {m}"
        )));
    }
    if m > n {
        return Ok(0);
    }
    let images = sigma.images();
    Ok(match m {
        1 => n as u64,
        2 => count_len2(images, tau.images()),
        3 => counts_len3(images)[lex_rank3(tau.images())],
        _ => {
            guard_enumeration(n, m)?;
            let mut c = 0u64;
            for_each_occurrence::<()>(sigma, tau, |_| {
                c += 1;
                ControlFlow::Continue(())
            });
            c
        }
    })
}

/// First occurrence of `τ`, if any.
pub fn find_occurrence(sigma: &Permutation, tau: &Pattern) -> Option<Vec<usize>> {
    for_each_occurrence(sigma, tau, |idx| ControlFlow::Break(idx.to_vec()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalityReport {
    pub universal: bool,
    /// Lexicographically first pattern that does not occur.
    pub missing: Option<Pattern>,
}

/// Whether every `τ ∈ 𝔖_m` occurs in `σ`.
pub fn universality_check(sigma: &Permutation, m: usize) -> Result<UniversalityReport> {
    if m == 0 || m > MAX_EXACT_M {
        return Err(Error::Param(format!(
            "universality is checked for 1 <= m <= {MAX_EXACT_M}"
        )));
    }
    if m > 3 {
        guard_enumeration(sigma.len(), m)?;
    }
    for tau in all_patterns(m) {
        if find_occurrence(sigma, &tau).is_none() {
            return Ok(UniversalityReport {
                universal: false,
                missing: Some(tau),
            });
        }
    }
    Ok(UniversalityReport {
        universal: true,
        missing: None,
    })
}
