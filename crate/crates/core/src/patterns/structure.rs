use serde::{Deserialize, Serialize};

use super::{count_pattern, Pattern};
use crate::cdf::{Interp, StepCdf, POS_TOL};
use crate::dominance::DominanceTable;
use crate::error::{Error, Result};
use crate::perm::{IndexSet, Interval, Permutation};
use crate::uniformity::{uniform_partition, UniformPartition, UniformStrategy};

/// Concentration data for one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockConcentration {
    pub block: Interval,
    /// Disjoint half-open intervals `[a, b)` of `[0, 1)`; `x` is covered when
    /// `σ(x)/n` falls in one of them.
    pub intervals: Vec<[f64; 2]>,
    /// Number of block points covered by each interval.
    pub counts: Vec<usize>,
    pub covered: usize,
    pub covered_fraction: f64,
    /// Whether `covered ≥ |C_s|(1 - 7mε)`.
    pub mass_bound_met: bool,
    /// Mass-accumulation steps taken by the sweep.
    pub sweep_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationFamily {
    pub epsilon: f64,
    pub m: usize,
    /// Whether the supplied count is below `(εn/2km)^m`, in which case each
    /// block has at most `m - 1` intervals.
    pub certified: bool,
    pub blocks: Vec<BlockConcentration>,
}

/// First point `r ≥ start` with `f(r) - f(start⁻) ≥ target`, if any.
fn first_crossing(f: &StepCdf, start: f64, target: f64) -> Option<f64> {
    let base = f.eval_left(start);
    let knots = f.knots();
    let from = knots.partition_point(|&(p, _)| p < start - POS_TOL);
    for i in from..knots.len() {
        let (p, v) = knots[i];
        if v - base >= target - 1e-12 {
            if f.interp() == Interp::Linear && i > 0 {
                let (p0, v0) = knots[i - 1];
                let (lo, vlo) = if p0 < start {
                    (start, f.eval(start))
                } else {
                    (p0, v0)
                };
                if vlo - base >= target - 1e-12 {
                    return Some(lo);
                }
                let t = (base + target - vlo) / (v - vlo);
                return Some(lo + t * (p - lo));
            }
            return Some(p);
        }
    }
    None
}

/// Greedy sweep over `[0, top)`: alternate mass-`5ε` accumulation intervals
/// with gaps of length `4ε`. Returns both lists.
fn sweep(f: &StepCdf, eps: f64, top: f64) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let mut acc = Vec::new();
    let mut gaps = Vec::new();
    let mut start = 0.0;
    loop {
        let Some(r) = first_crossing(f, start, 5.0 * eps).filter(|&r| r < top) else {
            acc.push((start, top));
            break;
        };
        acc.push((start, r));
        let end = r + 4.0 * eps;
        if end >= top {
            gaps.push((r, top));
            break;
        }
        gaps.push((r, end));
        start = end;
    }
    (acc, gaps)
}

/// Widens each gap by `ε` into its neighbouring accumulation intervals, or
/// up to their midpoint when one is shorter than `2ε`. The outer ends of the
/// first and last accumulation intervals are not shrunk.
fn widen(acc: &[(f64, f64)], gaps: &[(f64, f64)], eps: f64, top: f64) -> Vec<(f64, f64)> {
    gaps.iter()
        .enumerate()
        .map(|(l, &(r, e))| {
            let (x, _) = acc[l];
            let a = if l == 0 || r - x >= 2.0 * eps {
                (r - eps).max(x).max(0.0)
            } else {
                0.5 * (x + r)
            };
            let b = match acc.get(l + 1) {
                None => e,
                Some(&(_, y)) if l + 2 == acc.len() => (e + eps).min(y).min(top),
                Some(&(_, y)) if y - e >= 2.0 * eps => e + eps,
                Some(&(_, y)) => 0.5 * (e + y),
            };
            (a, b)
        })
        .collect()
}

fn covers(iv: &[f64; 2], v: usize, n: usize) -> bool {
    let x = v as f64 / n as f64;
    iv[0] - POS_TOL <= x && x < iv[1] - POS_TOL
}

/// Runs the concentration sweep on every block of `u`.
///
/// The sweep works on each block's reference CDF, whose atoms sit at
/// `(v+1)/n`; the resulting intervals are shifted by `-1/n` into image
/// coordinates so that coverage reads `σ(x)/n ∈ [a, b)`. Pass the known
/// value of `Λ^τ(σ)` as `lambda` to have the interval-count bound enforced.
pub fn concentration_intervals(
    perm: &Permutation,
    u: &UniformPartition,
    tau: &Pattern,
    lambda: Option<u64>,
) -> Result<ConcentrationFamily> {
    let m = tau.m();
    let eps = u.epsilon;
    if m == 0 || eps > 1.0 / (2.0 * m as f64) + 1e-12 {
        return Err(Error::Param(format!(
            "need ε <= 1/(2m) = {}, got {eps}",
            1.0 / (2.0 * m as f64)
        )));
    }
    let n = perm.len();
    let nf = n as f64;
    let k = u.partition.k();
    let certified = lambda
        .is_some_and(|l| (l as f64) < (eps * nf / (2.0 * k as f64 * m as f64)).powi(m as i32));
    let top = 1.0 + 1.0 / nf;
    let mut blocks = Vec::with_capacity(k);
    for (&block, f) in u.partition.blocks.iter().zip(&u.family) {
        let (acc, gaps) = sweep(f, eps, top);
        let intervals: Vec<[f64; 2]> = widen(&acc, &gaps, eps, top)
            .into_iter()
            .map(|(a, b)| [(a - 1.0 / nf).max(0.0), (b - 1.0 / nf).min(1.0)])
            .filter(|iv| iv[1] > iv[0])
            .collect();
        let mut counts = vec![0usize; intervals.len()];
        let mut covered = 0;
        for x in block.iter() {
            let v = perm.image(x);
            if let Some(j) = intervals.iter().position(|iv| covers(iv, v, n)) {
                counts[j] += 1;
                covered += 1;
            }
        }
        if certified && intervals.len() > m.saturating_sub(1) {
            return Err(Error::Contract(format!(
                "block {block} needs {} intervals although Λ^τ is below the certificate",
                intervals.len()
            )));
        }
        let len = block.len() as f64;
        blocks.push(BlockConcentration {
            block,
            counts,
            covered,
            covered_fraction: covered as f64 / len,
            mass_bound_met: covered as f64 >= len * (1.0 - 7.0 * m as f64 * eps) - 1e-9,
            sweep_steps: acc.len(),
            intervals,
        });
    }
    Ok(ConcentrationFamily {
        epsilon: eps,
        m,
        certified,
        blocks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterWitness {
    #[serde(rename = "I")]
    pub i: Interval,
    #[serde(rename = "J")]
    pub j: Interval,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterReport {
    pub holds: bool,
    /// Pair maximizing `|σ(I) ∩ J| / |I|`.
    pub worst: Option<ScatterWitness>,
    pub exact: bool,
}

/// Largest `n` for which every interval pair is examined.
pub const SCATTER_EXACT_N: usize = 512;

/// Checks `|σ(I) ∩ J| ≤ γ|I|` for all intervals `|I| ≥ δn`, `|J| ≤ εn`.
/// Only windows `J` of the maximal length need checking.
pub fn scatter_property(
    table: &DominanceTable,
    delta: f64,
    eps: f64,
    gamma: f64,
) -> Result<ScatterReport> {
    for (name, x) in [("δ", delta), ("ε", eps), ("γ", gamma)] {
        if !(x > 0.0) {
            return Err(Error::Param(format!("{name} must be positive, got {x}")));
        }
    }
    let n = table.n();
    let exact = n <= SCATTER_EXACT_N;
    let i_min = ((delta * n as f64 - 1e-9).ceil() as usize).max(1);
    let w = (eps * n as f64 + 1e-9).floor() as usize;
    if w == 0 || i_min > n {
        return Ok(ScatterReport {
            holds: true,
            worst: None,
            exact,
        });
    }
    let w = w.min(n);
    let lattice = |step: usize, end: usize| -> Vec<usize> {
        let mut v: Vec<usize> = (0..end).step_by(step.max(1)).collect();
        v.push(end);
        v
    };
    let (i_step, j_step) = if exact {
        (1, 1)
    } else {
        (
            (delta * n as f64 / 4.0).ceil() as usize,
            (eps * n as f64 / 4.0).ceil() as usize,
        )
    };
    let ends = lattice(i_step, n);
    let mut starts = lattice(j_step, n - w);
    starts.dedup();
    let mut worst: Option<ScatterWitness> = None;
    for (a, &lo) in ends.iter().enumerate() {
        for &hi in &ends[a + 1..] {
            if hi - lo < i_min {
                continue;
            }
            let i = Interval::new(lo, hi);
            for &c in &starts {
                let j = Interval::new(c, c + w);
                let ratio = table.rect(i, j) as f64 / i.len() as f64;
                if worst.is_none_or(|b| ratio > b.ratio + 1e-15) {
                    worst = Some(ScatterWitness { i, j, ratio });
                }
            }
        }
    }
    Ok(ScatterReport {
        holds: worst.is_none_or(|b| b.ratio <= gamma + 1e-12),
        worst,
        exact,
    })
}

fn longest_by<T: Copy>(seq: &[T], less: impl Fn(T, T) -> bool) -> Vec<usize> {
    // tails[l] = index of the smallest possible tail of a length-(l+1) chain
    let mut tails: Vec<usize> = Vec::new();
    let mut prev = vec![usize::MAX; seq.len()];
    for (i, &x) in seq.iter().enumerate() {
        let pos = tails.partition_point(|&t| less(seq[t], x));
        if pos > 0 {
            prev[i] = tails[pos - 1];
        }
        if pos == tails.len() {
            tails.push(i);
        } else {
            tails[pos] = i;
        }
    }
    let mut out = Vec::with_capacity(tails.len());
    let mut cur = tails.last().copied();
    while let Some(i) = cur {
        out.push(i);
        cur = (prev[i] != usize::MAX).then_some(prev[i]);
    }
    out.reverse();
    out
}

/// Indices of a longest strictly increasing subsequence.
pub fn longest_increasing<T: Copy + PartialOrd>(seq: &[T]) -> Vec<usize> {
    longest_by(seq, |a, b| a < b)
}

/// Indices of a longest strictly monotone subsequence and whether it
/// increases; ties go to the increasing one.
pub fn longest_monotone<T: Copy + PartialOrd>(seq: &[T]) -> (Vec<usize>, bool) {
    let inc = longest_increasing(seq);
    let dec = longest_by(seq, |a, b| a > b);
    if dec.len() > inc.len() {
        (dec, false)
    } else {
        (inc, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudomonotoneReport {
    pub subset: IndexSet,
    pub size: usize,
    /// `min(Λ^{01}, Λ^{10})(σ|_X) / C(|X|, 2)`.
    pub delta_achieved: f64,
    pub epsilon_used: f64,
    pub k: usize,
    /// Blocks whose heaviest intervals were pairwise disjoint.
    pub disjoint_blocks: usize,
    /// Blocks kept after the monotone selection.
    pub selected_blocks: usize,
    pub increasing: bool,
    /// No disjoint intervals were found; `subset` is a single block slice.
    pub degenerate: bool,
}

/// Extracts a large subset on which `σ` is nearly monotone, following the
/// uniform-partition argument: one heavy image interval per block, pairwise
/// disjoint ones chosen greedily, then a longest monotone run of them.
pub fn pseudomonotone_subset(
    table: &DominanceTable,
    tau: &Pattern,
    delta: f64,
) -> Result<PseudomonotoneReport> {
    let m = tau.m();
    if m < 2 {
        return Err(Error::Param(
            "pseudomonotone extraction needs m >= 2".into(),
        ));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Param(format!("δ must lie in (0, 1], got {delta}")));
    }
    let perm = table.perm();
    let n = perm.len();
    let eta = delta * delta / ((m - 1) as f64).powi(4) / 100.0;
    let eps = eta / (14.0 * m as f64);
    let outcome = uniform_partition(table, eps, 4.min(n), UniformStrategy::Coarsest)?;
    let u = &outcome.uniform;
    let family = concentration_intervals(perm, u, tau, None)?;

    let heaviest: Vec<Option<[f64; 2]>> = family
        .blocks
        .iter()
        .map(|b| {
            b.counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(&x.0)))
                .map(|(j, _)| b.intervals[j])
        })
        .collect();
    let mut kept: Vec<(usize, [f64; 2])> = Vec::new();
    for (s, iv) in heaviest.iter().enumerate() {
        if let Some(iv) = *iv {
            if kept.iter().all(|(_, o)| iv[1] <= o[0] || o[1] <= iv[0]) {
                kept.push((s, iv));
            }
        }
    }
    let slice = |s: usize, iv: &[f64; 2]| -> Vec<usize> {
        u.partition.blocks[s]
            .iter()
            .filter(|&x| covers(iv, perm.image(x), n))
            .collect()
    };
    let (members, selected, increasing, degenerate) = if kept.is_empty() {
        let first = u
            .partition
            .blocks
            .first()
            .map(|b| b.iter().collect())
            .unwrap_or_default();
        (first, 0, true, true)
    } else {
        let keys: Vec<f64> = kept.iter().map(|(_, iv)| iv[0]).collect();
        let (chosen, increasing) = longest_monotone(&keys);
        let members: Vec<usize> = chosen
            .iter()
            .flat_map(|&c| slice(kept[c].0, &kept[c].1))
            .collect();
        (members, chosen.len(), increasing, false)
    };
    let subset = IndexSet::new(members);
    let r = subset.len();
    let delta_achieved = if r < 2 {
        0.0
    } else {
        let up = count_pattern(perm, &Pattern::from_images(&[0, 1])?, Some(&subset))?;
        let down = (r * (r - 1) / 2) as u64 - up;
        up.min(down) as f64 / (r * (r - 1) / 2) as f64
    };
    Ok(PseudomonotoneReport {
        size: r,
        subset,
        delta_achieved,
        epsilon_used: eps,
        k: u.partition.k(),
        disjoint_blocks: kept.len(),
        selected_blocks: selected,
        increasing,
        degenerate,
    })
}
