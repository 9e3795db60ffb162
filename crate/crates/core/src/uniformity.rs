//! (ε, ℱ)-uniform partitions: every long enough subinterval of a block has an
//! image distribution ε-near the block's reference CDF.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdf::{StepCdf, TOL};
use crate::density::{atom_pos, cdf_l};
use crate::dominance::DominanceTable;
use crate::error::{Error, Result};
use crate::perm::{IndexSet, Interval, Permutation};
use crate::regularity::{
    is_regular_pair, min_sub_len, regular_partition, EquitablePartition, PairCheckMode,
    RegularityLimits,
};

/// Blocks longer than this are verified on lattice endpoints only.
pub const EXACT_BLOCK_LIMIT: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformPartition {
    pub partition: EquitablePartition,
    pub family: Vec<StepCdf>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformViolation {
    /// 0-based block index.
    pub block: usize,
    #[serde(rename = "I")]
    pub interval: Interval,
    pub alpha: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityCheck {
    pub uniform: bool,
    pub exceptional_ok: bool,
    /// Largest nearness violation (or smallest slack) found over all blocks.
    pub worst: Option<UniformViolation>,
    pub exact: bool,
}

/// How `uniform_partition` looks for a partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniformStrategy {
    /// Try `k = m, 2m, 4m, …, n` equitable blocks with their own distributions
    /// as the family, bumping `k` up whenever `n mod k > εn`; blocks that fail
    /// verification move to `C_0`. Returns the first `k` whose exceptional set
    /// stays within `εn`.
    #[default]
    Coarsest,
    /// Build an `ε²/4`-regular partition with blocks of length at most `εn/4`,
    /// drop blocks with more than `εk/2` ε-irregular partners, then verify.
    Regularity,
}

/// Worst nearness gap of `L(I,·)` against `f` over subintervals `I` of
/// `block` with `|I| ≥ min_len`, scanning `I` with fixed `lo` and growing `hi`.
///
/// With the images of `I` sorted as `v_0 < … < v_{r-1}` and atoms at
/// `a_j = (v_j+1)/n`, the sandwich reduces to `(j+1)/r ≤ f(a_j+ε) + ε` and
/// `f(a_j-ε⁻) - ε ≤ j/r` for every rank `j`, so each `I` costs `O(|I|)`.
fn block_worst(
    perm: &Permutation,
    block: Interval,
    f: &StepCdf,
    eps: f64,
    endpoints: &[usize],
    min_len: usize,
    stop_at_violation: bool,
) -> (f64, Interval, f64) {
    let n = perm.len();
    let upper: Vec<f64> = block
        .iter()
        .map(|x| f.eval_clamped(atom_pos(perm.image(x), n) + eps))
        .collect();
    let lower: Vec<f64> = block
        .iter()
        .map(|x| f.eval_left_clamped(atom_pos(perm.image(x), n) - eps))
        .collect();
    let mut worst = (f64::NEG_INFINITY, block, 0.0);
    // (image, upper bound, lower bound) kept sorted by image
    let mut sorted: Vec<(usize, f64, f64)> = Vec::with_capacity(block.len());
    for (ai, &lo) in endpoints.iter().enumerate() {
        sorted.clear();
        let mut filled = lo;
        for &hi in &endpoints[ai + 1..] {
            for x in filled..hi {
                let v = perm.image(x);
                let at = sorted.partition_point(|e| e.0 < v);
                sorted.insert(at, (v, upper[x - block.lo], lower[x - block.lo]));
            }
            filled = hi;
            if hi - lo < min_len {
                continue;
            }
            let inv_r = 1.0 / sorted.len() as f64;
            let mut local = (f64::NEG_INFINITY, 0usize);
            for (j, &(_, up, low)) in sorted.iter().enumerate() {
                let jf = j as f64;
                let gap = ((jf + 1.0) * inv_r - up).max(low - jf * inv_r) - eps;
                if gap > local.0 {
                    local = (gap, j);
                }
            }
            if local.0 > worst.0 {
                worst = (
                    local.0,
                    Interval::new(lo, hi),
                    atom_pos(sorted[local.1].0, n),
                );
            }
            if stop_at_violation && worst.0 > TOL {
                return worst;
            }
        }
    }
    worst
}

fn block_endpoints(block: Interval, eps: f64, exact: bool) -> Vec<usize> {
    if exact {
        return (block.lo..=block.hi).collect();
    }
    let step = ((eps * block.len() as f64 / 4.0).ceil() as usize).max(1);
    let mut pts: Vec<usize> = (block.lo..block.hi).step_by(step).collect();
    pts.push(block.hi);
    pts
}

fn check_blocks(
    perm: &Permutation,
    u: &UniformPartition,
    stop_at_violation: bool,
) -> Result<(Vec<(f64, Interval, f64)>, bool)> {
    let p = &u.partition;
    p.validate()?;
    if p.n != perm.len() {
        return Err(Error::Contract(
            "partition and permutation sizes differ".into(),
        ));
    }
    if u.family.len() != p.k() {
        return Err(Error::Contract(format!(
            "family has {} functions for {} blocks",
            u.family.len(),
            p.k()
        )));
    }
    let exact = p.block_len() <= EXACT_BLOCK_LIMIT;
    let eps = u.epsilon;
    let min_len = min_sub_len(eps, p.block_len());
    let per_block = p
        .blocks
        .par_iter()
        .zip(u.family.par_iter())
        .map(|(&b, f)| {
            let pts = block_endpoints(b, eps, exact);
            block_worst(perm, b, f, eps, &pts, min_len, stop_at_violation)
        })
        .collect();
    Ok((per_block, exact))
}

/// Checks the uniformity conditions exactly for blocks up to
/// [`EXACT_BLOCK_LIMIT`] long, on lattice endpoints (step `⌈ε|C_s|/4⌉`) above.
pub fn verify_uniform(perm: &Permutation, u: &UniformPartition) -> Result<UniformityCheck> {
    let (per_block, exact) = check_blocks(perm, u, false)?;
    Ok(summarize(u, &per_block, exact))
}

fn summarize(
    u: &UniformPartition,
    per_block: &[(f64, Interval, f64)],
    exact: bool,
) -> UniformityCheck {
    let exceptional_ok =
        u.partition.exceptional_size() as f64 <= u.epsilon * u.partition.n as f64 + 1e-9;
    let worst = per_block.iter().enumerate().fold(
        None::<UniformViolation>,
        |acc, (block, &(gap, interval, alpha))| match acc {
            Some(a) if a.gap >= gap => Some(a),
            _ => Some(UniformViolation {
                block,
                interval,
                alpha,
                gap,
            }),
        },
    );
    let blocks_ok = worst.is_none_or(|w| w.gap <= TOL);
    UniformityCheck {
        uniform: blocks_ok && exceptional_ok,
        exceptional_ok,
        worst,
        exact,
    }
}

/// The family `f_s = L(C_s, ·)`.
pub fn canonical_family(perm: &Permutation, p: &EquitablePartition) -> Result<Vec<StepCdf>> {
    p.blocks.iter().map(|&b| cdf_l(perm, b.into())).collect()
}

/// Moves the listed blocks (0-based) into the exceptional set.
pub fn drop_blocks(p: &EquitablePartition, bad: &[usize]) -> Result<EquitablePartition> {
    let mut zero = p.exceptional.members().to_vec();
    let mut blocks = Vec::with_capacity(p.k());
    for (s, &b) in p.blocks.iter().enumerate() {
        if bad.contains(&s) {
            zero.extend(b.iter());
        } else {
            blocks.push(b);
        }
    }
    EquitablePartition::new(p.n, blocks, IndexSet::new(zero))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformOutcome {
    pub uniform: UniformPartition,
    pub check: UniformityCheck,
    pub strategy: UniformStrategy,
    /// Block counts attempted, in order.
    pub tried: Vec<usize>,
    /// Blocks moved to `C_0` by the construction (0-based, before removal).
    pub dropped_blocks: Vec<usize>,
}

pub fn uniform_partition(
    table: &DominanceTable,
    eps: f64,
    m: usize,
    strategy: UniformStrategy,
) -> Result<UniformOutcome> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Param(format!("ε must lie in (0, 1/2), got {eps}")));
    }
    let n = table.n();
    if m == 0 || m > n {
        return Err(Error::Param(format!("need 1 <= m <= n, got m = {m}")));
    }
    match strategy {
        UniformStrategy::Coarsest => coarsest(table.perm(), eps, m),
        UniformStrategy::Regularity => via_regularity(table, eps, m),
    }
}

fn coarsest(perm: &Permutation, eps: f64, m: usize) -> Result<UniformOutcome> {
    let n = perm.len();
    let mut tried = Vec::new();
    let mut k = m;
    loop {
        // skip block counts whose leftover tail alone exceeds the budget
        while (n % k) as f64 > eps * n as f64 + 1e-9 {
            k += 1;
        }
        tried.push(k);
        let p = EquitablePartition::equitable(n, k)?;
        let family = canonical_family(perm, &p)?;
        let candidate = UniformPartition {
            partition: p,
            family,
            epsilon: eps,
        };
        let (per_block, exact) = check_blocks(perm, &candidate, true)?;
        let bad: Vec<usize> = (0..k).filter(|&s| per_block[s].0 > TOL).collect();
        let dropped_size =
            candidate.partition.exceptional_size() + bad.len() * candidate.partition.block_len();
        if dropped_size as f64 <= eps * n as f64 + 1e-9 && bad.len() < k {
            // blocks that passed were scanned completely, so their results stand
            let p = drop_blocks(&candidate.partition, &bad)?;
            let kept: Vec<(f64, Interval, f64)> = (0..k)
                .filter(|s| !bad.contains(s))
                .map(|s| per_block[s])
                .collect();
            let family = candidate
                .family
                .into_iter()
                .enumerate()
                .filter(|(s, _)| !bad.contains(s))
                .map(|(_, f)| f)
                .collect();
            let uniform = UniformPartition {
                partition: p,
                family,
                epsilon: eps,
            };
            let check = summarize(&uniform, &kept, exact);
            return Ok(UniformOutcome {
                uniform,
                check,
                strategy: UniformStrategy::Coarsest,
                tried,
                dropped_blocks: bad,
            });
        }
        if k == n {
            return Err(Error::Contract(
                "singleton blocks failed verification".into(),
            ));
        }
        k = (2 * k).min(n);
    }
}

fn via_regularity(table: &DominanceTable, eps: f64, m: usize) -> Result<UniformOutcome> {
    let n = table.n();
    let perm = table.perm();
    let fine = eps * eps / 4.0;
    let start = m.max((4.0 / eps - 1e-9).ceil() as usize).min(n);
    let outcome = regular_partition(table, fine, start, &RegularityLimits::default())?;
    if !outcome.is_regular() {
        return Err(Error::RefinementExhausted(format!(
            "no {fine}-regular partition after {} iterations: {:?}",
            outcome.iterations.len(),
            outcome.status
        )));
    }
    let p = outcome.partition;
    let k = p.k();
    let mut partners = vec![0usize; k];
    for ip in &outcome.report.irregular_pairs {
        let r = is_regular_pair(
            table,
            p.blocks[ip.s],
            p.blocks[ip.t],
            eps,
            PairCheckMode::Auto,
        )?;
        if !r.regular {
            partners[ip.s] += 1;
        }
    }
    let limit = eps * k as f64 / 2.0;
    let bad: Vec<usize> = (0..k).filter(|&s| partners[s] as f64 > limit).collect();
    let p = drop_blocks(&p, &bad)?;
    let family = canonical_family(perm, &p)?;
    let uniform = UniformPartition {
        partition: p,
        family,
        epsilon: eps,
    };
    let check = verify_uniform(perm, &uniform)?;
    Ok(UniformOutcome {
        uniform,
        check,
        strategy: UniformStrategy::Regularity,
        tried: vec![start],
        dropped_blocks: bad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::{generate, GeneratorKind};

    fn via_nearness(perm: &Permutation, u: &UniformPartition) -> f64 {
        let eps = u.epsilon;
        let min_len = min_sub_len(eps, u.partition.block_len());
        let mut worst = f64::NEG_INFINITY;
        for (b, f) in u.partition.blocks.iter().zip(&u.family) {
            for lo in b.lo..b.hi {
                for hi in lo + min_len..=b.hi {
                    let l = cdf_l(perm, Interval::new(lo, hi).into()).unwrap();
                    worst = worst.max(l.eps_near(f, eps).gap);
                }
            }
        }
        worst
    }

    #[test]
    fn fast_check_agrees_with_general_nearness() {
        for seed in 0..12u64 {
            let n = 60 + seed as usize;
            let perm = generate(GeneratorKind::Random, n, seed).unwrap();
            let k = 2 + seed as usize % 3;
            let p = EquitablePartition::equitable(n, k).unwrap();
            for eps in [0.1, 0.2, 0.3] {
                let family = canonical_family(&perm, &p).unwrap();
                let u = UniformPartition {
                    partition: p.clone(),
                    family,
                    epsilon: eps,
                };
                let fast = verify_uniform(&perm, &u).unwrap().worst.unwrap().gap;
                let slow = via_nearness(&perm, &u);
                assert!(
                    (fast - slow).abs() < 1e-9,
                    "seed {seed} eps {eps}: {fast} vs {slow}"
                );
            }
        }
    }

    #[test]
    fn epsilon_one_is_self_near() {
        let perm = generate(GeneratorKind::Random, 100, 3).unwrap();
        let p = EquitablePartition::equitable(100, 5).unwrap();
        let u = UniformPartition {
            family: canonical_family(&perm, &p).unwrap(),
            partition: p,
            epsilon: 1.0,
        };
        assert!(verify_uniform(&perm, &u).unwrap().uniform);
    }

    #[test]
    fn corrupted_reference_is_caught() {
        let n = 400;
        let eps = 0.2;
        let perm = generate(GeneratorKind::Random, n, 9).unwrap();
        let t = DominanceTable::new(&perm).unwrap();
        let mut out = uniform_partition(&t, eps, 4, UniformStrategy::Coarsest).unwrap();
        assert!(out.check.uniform);
        assert_eq!(out.uniform.partition.k(), 4);
        let f = &out.uniform.family[0];
        let shifted: Vec<(f64, f64)> = f
            .knots()
            .iter()
            .map(|&(p, v)| {
                (
                    p,
                    if p >= 0.3 {
                        (v + 3.0 * eps).min(1.0)
                    } else {
                        v
                    },
                )
            })
            .collect();
        out.uniform.family[0] = StepCdf::step(shifted, 1.0).unwrap();
        let c = verify_uniform(&perm, &out.uniform).unwrap();
        assert!(!c.uniform);
        assert_eq!(c.worst.unwrap().block, 0);
    }

    #[test]
    fn coarsest_search_on_structured_inputs() {
        for kind in [
            GeneratorKind::Identity,
            GeneratorKind::Reverse,
            GeneratorKind::Interleave,
        ] {
            let perm = generate(kind, 256, 0).unwrap();
            let t = DominanceTable::new(&perm).unwrap();
            let out = uniform_partition(&t, 0.2, 4, UniformStrategy::Coarsest).unwrap();
            assert!(out.check.uniform, "{kind:?}");
            assert!(out.uniform.partition.exceptional_size() as f64 <= 0.2 * 256.0);
        }
    }

    #[test]
    fn family_jumps_are_small() {
        let perm = generate(GeneratorKind::Random, 512, 4).unwrap();
        let t = DominanceTable::new(&perm).unwrap();
        let out = uniform_partition(&t, 0.25, 4, UniformStrategy::Coarsest).unwrap();
        let len = out.uniform.partition.block_len() as f64;
        for f in &out.uniform.family {
            assert_eq!(f.eval(1.0), 1.0);
            assert!(f.jumps().iter().all(|&j| j <= 1.0 / len + 1e-12));
            assert!(f.knots().windows(2).all(|w| w[0].1 <= w[1].1));
        }
    }

    #[test]
    fn regularity_route_small() {
        let perm = generate(GeneratorKind::Random, 64, 2).unwrap();
        let t = DominanceTable::new(&perm).unwrap();
        let out = uniform_partition(&t, 0.45, 2, UniformStrategy::Regularity);
        match out {
            Ok(o) => assert!(o.uniform.partition.exceptional_size() as f64 <= 0.45 * 64.0 + 1e-9),
            Err(e) => assert!(matches!(e, Error::RefinementExhausted(_))),
        }
    }

    #[test]
    fn parameters_are_checked() {
        let t = DominanceTable::new(&Permutation::identity(10)).unwrap();
        assert!(uniform_partition(&t, 0.5, 2, UniformStrategy::Coarsest).is_err());
        assert!(uniform_partition(&t, 0.1, 0, UniformStrategy::Coarsest).is_err());
    }
}
