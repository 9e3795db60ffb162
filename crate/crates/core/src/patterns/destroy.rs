use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::{
    concentration_intervals, count_pattern, for_each_occurrence, guard_enumeration, Pattern,
};
use crate::dominance::DominanceTable;
use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::uniformity::{uniform_partition, UniformStrategy};

/// Largest `n` for which a deletion set is materialized.
pub const DESTROY_MAX_N: usize = 2048;

/// Largest pattern length `verify_destroyed` enumerates.
pub const VERIFY_MAX_M: usize = 4;

/// Unordered index pairs, stored as sorted `(i, j)` with `i < j`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeletionSet(Vec<(usize, usize)>);

impl DeletionSet {
    /// Normalizes, sorts and deduplicates; pairs `{i, i}` are dropped.
    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut v: Vec<(usize, usize)> = pairs
            .into_iter()
            .filter(|(i, j)| i != j)
            .map(|(i, j)| (i.min(j), i.max(j)))
            .collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    /// Every pair of `0..n`.
    pub fn all(n: usize) -> Self {
        Self(
            (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
        )
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.0.binary_search(&(i.min(j), i.max(j))).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn in_range(&self, n: usize) -> bool {
        self.0.last().is_none_or(|&(_, j)| j < n)
    }
}

/// Pair counts per deletion rule, with the corresponding bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionAudit {
    /// Pairs touching `C_0` or a point outside every kept interval.
    pub rule_a: usize,
    /// Pairs inside one block.
    pub rule_b: usize,
    /// Pairs whose images are within `12εn`.
    pub rule_c: usize,
    /// Size of the union.
    pub total: usize,
    pub bound_a: f64,
    pub bound_b: f64,
    pub bound_c: f64,
    pub k: usize,
    pub exceptional_size: usize,
    pub unconcentrated: usize,
    /// Whether `Λ^τ(σ) < (εn/2km)^m` was established, which makes the set
    /// destroy every occurrence.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestroyOutcome {
    pub deletion: DeletionSet,
    pub audit: DeletionAudit,
}

/// Builds the union of the three deletion rules over a uniform partition
/// and its pruned concentration families.
pub fn destroy_pattern(
    table: &DominanceTable,
    tau: &Pattern,
    eps: f64,
    m_start: usize,
) -> Result<DestroyOutcome> {
    let m = tau.m();
    if m < 2 {
        return Err(Error::Param(
            "destruction needs a pattern of length >= 2".into(),
        ));
    }
    if !(eps > 0.0 && eps < 1.0 / (2.0 * m as f64)) {
        return Err(Error::Param(format!(
            "need 0 < ε < 1/(2m) = {}, got {eps}",
            1.0 / (2.0 * m as f64)
        )));
    }
    let perm = table.perm();
    let n = perm.len();
    if n > DESTROY_MAX_N {
        return Err(Error::Guard(format!(
            "deletion sets are materialized for n <= {DESTROY_MAX_N}, got {n}"
        )));
    }
    let u = uniform_partition(table, eps, m_start.clamp(1, n), UniformStrategy::Coarsest)?.uniform;
    let k = u.partition.k();
    // the certificate is only computed when exact counting is affordable
    let lambda = count_pattern(perm, tau, None).ok();
    let family = concentration_intervals(perm, &u, tau, lambda)?;

    let mut block_of = vec![None; n];
    let mut concentrated = vec![false; n];
    for (s, b) in family.blocks.iter().enumerate() {
        let need = eps * b.block.len() as f64;
        let kept: Vec<&[f64; 2]> = b
            .intervals
            .iter()
            .zip(&b.counts)
            .filter(|(_, &c)| c as f64 >= need - 1e-9)
            .map(|(iv, _)| iv)
            .collect();
        for x in b.block.iter() {
            block_of[x] = Some(s);
            let y = perm.image(x) as f64 / n as f64;
            concentrated[x] = kept
                .iter()
                .any(|iv| iv[0] - 1e-12 <= y && y < iv[1] - 1e-12);
        }
    }
    let reach = 12.0 * eps * n as f64 + 1e-9;
    let (mut ra, mut rb, mut rc) = (0, 0, 0);
    let mut pairs = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            let a = !concentrated[x] || !concentrated[y];
            let b = block_of[x].is_some() && block_of[x] == block_of[y];
            let c = (perm.image(x).abs_diff(perm.image(y)) as f64) <= reach;
            ra += a as usize;
            rb += b as usize;
            rc += c as usize;
            if a || b || c {
                pairs.push((x, y));
            }
        }
    }
    let nn = (n * n) as f64;
    let audit = DeletionAudit {
        rule_a: ra,
        rule_b: rb,
        rule_c: rc,
        total: pairs.len(),
        bound_a: (8 * m + 1) as f64 * eps * nn,
        bound_b: nn / (2 * k) as f64,
        bound_c: 12.0 * eps * nn + n as f64,
        k,
        exceptional_size: u.partition.exceptional_size(),
        unconcentrated: concentrated.iter().filter(|&&c| !c).count(),
        certified: family.certified,
    };
    Ok(DestroyOutcome {
        deletion: DeletionSet(pairs),
        audit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestroyCheck {
    pub destroyed: bool,
    /// An occurrence containing no deleted pair.
    pub witness: Option<Vec<usize>>,
    /// Occurrences examined before stopping.
    pub examined: u64,
}

/// Whether every occurrence of `τ` contains both points of some deleted pair.
pub fn verify_destroyed(
    perm: &Permutation,
    tau: &Pattern,
    deletion: &DeletionSet,
) -> Result<DestroyCheck> {
    let m = tau.m();
    if m > VERIFY_MAX_M {
        return Err(Error::Guard(format!(
            "exhaustive verification supports m <= {VERIFY_MAX_M}"
        )));
    }
    if !deletion.in_range(perm.len()) {
        return Err(Error::Param("deletion set index out of range".into()));
    }
    guard_enumeration(perm.len(), m)?;
    let mut examined = 0u64;
    let witness = for_each_occurrence(perm, tau, |idx| {
        examined += 1;
        let hit =
            (0..idx.len()).any(|a| (a + 1..idx.len()).any(|b| deletion.contains(idx[a], idx[b])));
        if hit {
            ControlFlow::Continue(())
        } else {
            ControlFlow::Break(idx.to_vec())
        }
    });
    Ok(DestroyCheck {
        destroyed: witness.is_none(),
        witness,
        examined,
    })
}
