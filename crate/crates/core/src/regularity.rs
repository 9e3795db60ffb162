//! Equitable interval partitions, the energy index `q`, ε-regular pair
//! testing and the refinement driver that builds ε-regular partitions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dominance::DominanceTable;
use crate::error::{Error, Result};
use crate::perm::{IndexSet, Interval};

/// Absolute tolerance for comparisons of `q` values and density gaps.
pub const Q_TOL: f64 = 1e-12;

/// Above this many candidate intervals per block (`|C|²`) the automatic pair
/// check switches from the exact sweep to lattice endpoints.
pub const EXHAUSTIVE_LIMIT: usize = 1 << 24;

/// Blocks `C_1..C_k` of equal length, left to right, plus an exceptional set
/// `C_0`; together they cover `Z_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquitablePartition {
    pub n: usize,
    pub blocks: Vec<Interval>,
    pub exceptional: IndexSet,
}

impl EquitablePartition {
    pub fn new(n: usize, blocks: Vec<Interval>, exceptional: IndexSet) -> Result<Self> {
        let p = Self {
            n,
            blocks,
            exceptional,
        };
        p.validate()?;
        Ok(p)
    }

    /// `k` consecutive blocks of length `⌊n/k⌋` from 0; the rest goes to `C_0`.
    pub fn equitable(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::Param(format!(
                "need 1 <= k <= n, got k = {k}, n = {n}"
            )));
        }
        let len = n / k;
        let blocks = (0..k)
            .map(|i| Interval::new(i * len, (i + 1) * len))
            .collect();
        let exceptional = IndexSet::from_sorted_unchecked((k * len..n).collect());
        Ok(Self {
            n,
            blocks,
            exceptional,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Contract(msg));
        if !self.exceptional.in_range(self.n) {
            return bad("exceptional index out of range".into());
        }
        let len = self.block_len();
        let mut covered = vec![false; self.n];
        for &x in self.exceptional.members() {
            covered[x] = true;
        }
        let mut prev_hi = 0;
        for b in &self.blocks {
            if b.len() != len || b.is_empty() {
                return bad(format!("block {b} has length {} instead of {len}", b.len()));
            }
            if b.hi > self.n || b.lo < prev_hi {
                return bad(format!("block {b} is out of order or out of range"));
            }
            prev_hi = b.hi;
            for x in b.iter() {
                if covered[x] {
                    return bad(format!("index {x} lies in two parts"));
                }
                covered[x] = true;
            }
        }
        if let Some(x) = covered.iter().position(|c| !c) {
            return bad(format!("index {x} is not covered"));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_len(&self) -> usize {
        self.blocks.first().map_or(0, Interval::len)
    }

    pub fn exceptional_size(&self) -> usize {
        self.exceptional.len()
    }
}

/// `q(X,Y) = p(X,Y)² / (|X||Y| n²) = |X||Y| d²(X,Y) / n²`.
#[inline]
fn q_term(p: u64, x: usize, y: usize, n: usize) -> f64 {
    if x == 0 || y == 0 {
        return 0.0;
    }
    let p = p as f64;
    p * p / (x as f64 * y as f64) / (n as f64 * n as f64)
}

/// `Σ_{X ∈ cs, Y ∈ ds} q(X,Y)` for interval parts.
pub fn q_pair(table: &DominanceTable, cs: &[Interval], ds: &[Interval]) -> f64 {
    let n = table.n();
    cs.iter()
        .flat_map(|&x| ds.iter().map(move |&y| (x, y)))
        .map(|(x, y)| q_term(table.pair_count(x, y), x.len(), y.len(), n))
        .sum()
}

/// `q` of a partition of `Z_n` into interval parts, over all ordered pairs.
pub fn q_of_intervals(table: &DominanceTable, parts: &[Interval]) -> f64 {
    q_pair(table, parts, parts)
}

/// `q(P)`, with `C_0` treated as singletons.
pub fn index_q(table: &DominanceTable, p: &EquitablePartition) -> f64 {
    let n = table.n();
    let perm = table.perm();
    let blocks = &p.blocks;
    let zero = p.exceptional.members();

    let mut q = q_of_intervals(table, blocks);
    for &b in blocks {
        for &x in zero {
            // p(B, {x}) and p({x}, B)
            let below = table.rect(b, Interval::new(0, x));
            q += q_term(below, b.len(), 1, n);
            let above = b.hi.saturating_sub((perm.image(x) + 1).max(b.lo)) as u64;
            q += q_term(above, 1, b.len(), n);
        }
    }
    // singleton pairs contribute 1/n² each time σ(x) < y
    let hits: usize = zero
        .iter()
        .map(|&x| zero.len() - zero.partition_point(|&y| y <= perm.image(x)))
        .sum();
    q + hits as f64 / (n as f64 * n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairCheckMode {
    /// Exact sweep unless the block is too long, then lattice endpoints.
    #[default]
    Auto,
    Exhaustive,
    Grid,
}

/// Subinterval pair with the largest density deviation from its blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(rename = "I")]
    pub i: Interval,
    #[serde(rename = "J")]
    pub j: Interval,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub regular: bool,
    pub witness: Witness,
    pub exhaustive: bool,
}

/// Smallest admissible length for a subinterval of a block of length `len`.
pub fn min_sub_len(eps: f64, len: usize) -> usize {
    ((eps * len as f64 - 1e-9).ceil().max(1.0) as usize).min(len)
}

fn density_of(table: &DominanceTable, i: Interval, j: Interval) -> f64 {
    table.pair_count(i, j) as f64 / (i.len() as f64 * j.len() as f64)
}

/// Tests whether `(C, D)` is ε-regular: every `I ⊂ C`, `J ⊂ D` with
/// `|I| ≥ ε|C|`, `|J| ≥ ε|D|` has `|d(I,J) - d(C,D)| ≤ ε`.
///
/// For a fixed `I`, the map `t ↦ #{s ∈ I : σ(s) < t}` is nondecreasing, so
/// the mean over a window of `J`-values is smallest for the leftmost shortest
/// window and largest for the rightmost shortest one. Only `I` needs to be
/// enumerated, giving `O(|C|²)` constant-time queries.
pub fn is_regular_pair(
    table: &DominanceTable,
    c: Interval,
    d: Interval,
    eps: f64,
    mode: PairCheckMode,
) -> Result<PairCheck> {
    if c.is_empty() || d.is_empty() || c.hi > table.n() || d.hi > table.n() {
        return Err(Error::Param(format!("invalid block pair {c}, {d}")));
    }
    if !(eps > 0.0) {
        return Err(Error::Param(format!("ε must be positive, got {eps}")));
    }
    let exhaustive = match mode {
        PairCheckMode::Exhaustive => true,
        PairCheckMode::Grid => false,
        PairCheckMode::Auto => c.len() * c.len() <= EXHAUSTIVE_LIMIT,
    };
    let base = density_of(table, c, d);
    let a_min = min_sub_len(eps, c.len());
    let b_min = min_sub_len(eps, d.len());
    let j_low = Interval::new(d.lo, d.lo + b_min);
    let j_high = Interval::new(d.hi - b_min, d.hi);

    let lattice: Vec<usize> = if exhaustive {
        c.iter().chain(std::iter::once(c.hi)).collect()
    } else {
        let step = ((eps * c.len() as f64 / 4.0).ceil() as usize).max(1);
        let mut pts: Vec<usize> = (c.lo..c.hi).step_by(step).collect();
        pts.push(c.hi);
        pts
    };

    let mut best = Witness {
        i: c,
        j: d,
        gap: 0.0,
    };
    let mut best_high = false;
    for (ai, &lo) in lattice.iter().enumerate() {
        for &hi in &lattice[ai + 1..] {
            if hi - lo < a_min {
                continue;
            }
            let i = Interval::new(lo, hi);
            let g_low = base - density_of(table, i, j_low);
            if g_low > best.gap + Q_TOL {
                best = Witness {
                    i,
                    j: j_low,
                    gap: g_low,
                };
                best_high = false;
            }
            let g_high = density_of(table, i, j_high) - base;
            if g_high > best.gap + Q_TOL {
                best = Witness {
                    i,
                    j: j_high,
                    gap: g_high,
                };
                best_high = true;
            }
        }
    }
    if best_high {
        // leftmost window attaining the same count
        let target = table.pair_count(best.i, best.j);
        let starts = d.len() - b_min + 1;
        let first = (0..starts).collect::<Vec<_>>().partition_point(|&k| {
            table.pair_count(best.i, Interval::new(d.lo + k, d.lo + k + b_min)) < target
        });
        best.j = Interval::new(d.lo + first, d.lo + first + b_min);
    }
    Ok(PairCheck {
        regular: best.gap <= eps + Q_TOL,
        witness: best,
        exhaustive,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularPair {
    pub s: usize,
    pub t: usize,
    #[serde(rename = "I")]
    pub i: Interval,
    #[serde(rename = "J")]
    pub j: Interval,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub epsilon: f64,
    pub k: usize,
    pub block_length: usize,
    pub exceptional_size: usize,
    pub q: f64,
    pub regular: bool,
    /// Irregular ordered pairs `(s, t)`, diagonal included, indexed from 0.
    pub irregular_pairs: Vec<IrregularPair>,
}

/// Checks every ordered pair of blocks, in parallel, merged in `(s, t)` order.
pub fn is_regular_partition(
    table: &DominanceTable,
    p: &EquitablePartition,
    eps: f64,
) -> Result<RegularityReport> {
    check_partition_regular(table, p, eps, PairCheckMode::Auto)
}

pub fn check_partition_regular(
    table: &DominanceTable,
    p: &EquitablePartition,
    eps: f64,
    mode: PairCheckMode,
) -> Result<RegularityReport> {
    p.validate()?;
    if p.n != table.n() {
        return Err(Error::Contract(format!(
            "partition of Z_{} used with a table over Z_{}",
            p.n,
            table.n()
        )));
    }
    let k = p.k();
    let checks: Vec<Result<Option<IrregularPair>>> = (0..k * k)
        .into_par_iter()
        .map(|idx| {
            let (s, t) = (idx / k, idx % k);
            let r = is_regular_pair(table, p.blocks[s], p.blocks[t], eps, mode)?;
            Ok((!r.regular).then_some(IrregularPair {
                s,
                t,
                i: r.witness.i,
                j: r.witness.j,
                gap: r.witness.gap,
            }))
        })
        .collect();
    let mut irregular_pairs = Vec::new();
    for c in checks {
        if let Some(ip) = c? {
            irregular_pairs.push(ip);
        }
    }
    let regular = irregular_pairs.len() as f64 <= eps * (k * k) as f64 + 1e-9
        && p.exceptional_size() as f64 <= eps * p.n as f64 + 1e-9;
    Ok(RegularityReport {
        epsilon: eps,
        k,
        block_length: p.block_len(),
        exceptional_size: p.exceptional_size(),
        q: index_q(table, p),
        regular,
        irregular_pairs,
    })
}

/// `C` split as `[sub, left remainder, right remainder]`, empty pieces dropped.
pub fn tripartition(c: Interval, sub: Interval) -> Vec<Interval> {
    [
        sub,
        Interval::new(c.lo, sub.lo),
        Interval::new(sub.hi, c.hi),
    ]
    .into_iter()
    .filter(|x| !x.is_empty())
    .collect()
}

/// Splits `C` and `D` along a violating witness and checks the index gain
/// `q(𝒞,𝒟) ≥ q(C,D) + ε⁴|C||D|/n²`.
pub fn exploit_irregular(
    table: &DominanceTable,
    c: Interval,
    d: Interval,
    c1: Interval,
    d1: Interval,
    eps: f64,
) -> Result<(Vec<Interval>, Vec<Interval>)> {
    if !c.contains_interval(&c1) || !d.contains_interval(&d1) || c1.is_empty() || d1.is_empty() {
        return Err(Error::Contract(format!(
            "witness {c1} x {d1} does not lie in {c} x {d}"
        )));
    }
    if c1.len() < min_sub_len(eps, c.len()) || d1.len() < min_sub_len(eps, d.len()) {
        return Err(Error::Contract(format!(
            "witness {c1} x {d1} is too short for ε = {eps}"
        )));
    }
    let gap = (density_of(table, c1, d1) - density_of(table, c, d)).abs();
    if gap <= eps {
        return Err(Error::Contract(format!(
            "witness {c1} x {d1} deviates by {gap}, not more than ε = {eps}"
        )));
    }
    let cs = tripartition(c, c1);
    let ds = tripartition(d, d1);
    let n = table.n() as f64;
    let gain = q_pair(table, &cs, &ds) - q_pair(table, &[c], &[d]);
    let want = eps.powi(4) * c.len() as f64 * d.len() as f64 / (n * n);
    if gain < want - Q_TOL {
        return Err(Error::Contract(format!("index gain {gain} below {want}")));
    }
    Ok((cs, ds))
}

/// Knobs standing in for the block-size floors of the existence proof.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityLimits {
    /// Defaults to `⌈2/ε⁵⌉`.
    pub max_iterations: Option<usize>,
    pub max_parts: usize,
    pub min_block: usize,
    /// Each refined cell is cut into pieces of length `⌊c / divisor⌋`.
    pub rechunk_divisor: usize,
}

impl Default for RegularityLimits {
    fn default() -> Self {
        Self {
            max_iterations: None,
            max_parts: 4096,
            min_block: 1,
            rechunk_divisor: 81,
        }
    }
}

/// `⌈2/ε⁵⌉`.
pub fn iteration_bound(eps: f64) -> usize {
    (2.0 / eps.powi(5) - 1e-9).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub partition: EquitablePartition,
    pub q_before: f64,
    /// `q` of the common refinement before re-chunking.
    pub q_refined: f64,
    pub q_after: f64,
    pub irregular: usize,
    /// Whether the counts guarantee a gain of at least `ε⁵/2`.
    pub half_eps5_applies: bool,
    pub exceptional_growth: usize,
}

pub fn refine_step(
    table: &DominanceTable,
    p: &EquitablePartition,
    eps: f64,
    limits: &RegularityLimits,
) -> Result<RefineOutcome> {
    let report = is_regular_partition(table, p, eps)?;
    refine_with_report(table, p, &report, limits)
}

fn refine_with_report(
    table: &DominanceTable,
    p: &EquitablePartition,
    report: &RegularityReport,
    limits: &RegularityLimits,
) -> Result<RefineOutcome> {
    if report.regular {
        return Err(Error::Contract("partition is already ε-regular".into()));
    }
    let eps = report.epsilon;
    let k = p.k();
    let c = p.block_len();
    let n = p.n;

    let mut cuts: Vec<Vec<usize>> = p.blocks.iter().map(|b| vec![b.lo, b.hi]).collect();
    for ip in &report.irregular_pairs {
        let (cs, ds) = exploit_irregular(table, p.blocks[ip.s], p.blocks[ip.t], ip.i, ip.j, eps)?;
        cuts[ip.s].extend(cs.iter().flat_map(|x| [x.lo, x.hi]));
        cuts[ip.t].extend(ds.iter().flat_map(|x| [x.lo, x.hi]));
    }
    let cells: Vec<Vec<Interval>> = cuts
        .into_iter()
        .map(|mut v| {
            v.sort_unstable();
            v.dedup();
            v.windows(2).map(|w| Interval::new(w[0], w[1])).collect()
        })
        .collect();

    let mut refined = cells.concat();
    refined.extend(
        p.exceptional
            .members()
            .iter()
            .map(|&x| Interval::new(x, x + 1)),
    );
    let q_before = report.q;
    let q_refined = q_of_intervals(table, &refined);
    let nf = n as f64;
    let irregular = report.irregular_pairs.len();
    let promised = irregular as f64 * eps.powi(4) * (c * c) as f64 / (nf * nf);
    if q_refined < q_before + promised - Q_TOL {
        return Err(Error::Contract(format!(
            "common refinement gained {} < {promised}",
            q_refined - q_before
        )));
    }
    let kc = (k * c) as f64 / nf;
    let half_eps5_applies = irregular as f64 > eps * (k * k) as f64 && kc * kc >= 0.5;

    let min_block = limits.min_block.max(1);
    let divisor = limits.rechunk_divisor.min(c / min_block);
    if divisor == 0 {
        return Err(Error::RefinementExhausted(format!(
            "blocks of length {c} cannot be cut into pieces of length >= {min_block}"
        )));
    }
    let d = c / divisor;
    let mut blocks = Vec::new();
    let mut zero: Vec<usize> = p.exceptional.members().to_vec();
    for cell in cells.iter().flatten() {
        let pieces = cell.len() / d;
        blocks.extend((0..pieces).map(|i| Interval::new(cell.lo + i * d, cell.lo + (i + 1) * d)));
        zero.extend(cell.lo + pieces * d..cell.hi);
    }
    let exceptional_growth = zero.len() - p.exceptional_size();
    let partition = EquitablePartition::new(n, blocks, IndexSet::new(zero))?;
    let q_after = index_q(table, &partition);
    if q_after < q_refined - Q_TOL {
        return Err(Error::Contract(format!(
            "re-chunking lowered q from {q_refined} to {q_after}"
        )));
    }
    Ok(RefineOutcome {
        partition,
        q_before,
        q_refined,
        q_after,
        irregular,
        half_eps5_applies,
        exceptional_growth,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub q: f64,
    pub k: usize,
    pub exceptional_size: usize,
    pub irregular: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum DriverStatus {
    Regular,
    LimitExhausted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularOutcome {
    pub partition: EquitablePartition,
    pub report: RegularityReport,
    pub iterations: Vec<IterationRecord>,
    pub status: DriverStatus,
}

impl RegularOutcome {
    pub fn is_regular(&self) -> bool {
        self.status == DriverStatus::Regular
    }
}

/// Refines an equitable `m`-part partition until it is ε-regular or a limit
/// is reached. The returned partition is always the last one checked.
pub fn regular_partition(
    table: &DominanceTable,
    eps: f64,
    m: usize,
    limits: &RegularityLimits,
) -> Result<RegularOutcome> {
    if !(eps > 0.0 && eps <= 0.25) {
        return Err(Error::Param(format!("ε must lie in (0, 1/4], got {eps}")));
    }
    let n = table.n();
    if m == 0 || m > n {
        return Err(Error::Param(format!("need 1 <= m <= n, got m = {m}")));
    }
    let max_iterations = limits
        .max_iterations
        .unwrap_or_else(|| iteration_bound(eps));
    let mut partition = EquitablePartition::equitable(n, m)?;
    let mut iterations = Vec::new();
    loop {
        let report = is_regular_partition(table, &partition, eps)?;
        iterations.push(IterationRecord {
            q: report.q,
            k: report.k,
            exceptional_size: report.exceptional_size,
            irregular: report.irregular_pairs.len(),
        });
        let stop = |reason: String, partition, report| {
            Ok(RegularOutcome {
                partition,
                report,
                iterations: iterations.clone(),
                status: DriverStatus::LimitExhausted(reason),
            })
        };
        if report.regular {
            return Ok(RegularOutcome {
                partition,
                report,
                iterations,
                status: DriverStatus::Regular,
            });
        }
        if report.exceptional_size as f64 > eps * n as f64 {
            return stop("exceptional set exceeds εn".into(), partition, report);
        }
        if iterations.len() > max_iterations {
            return stop(
                format!("reached {max_iterations} refinement steps"),
                partition,
                report,
            );
        }
        match refine_with_report(table, &partition, &report, limits) {
            Ok(step) if step.partition.k() > limits.max_parts => {
                return stop(
                    format!(
                        "next partition would have {} > {} parts",
                        step.partition.k(),
                        limits.max_parts
                    ),
                    partition,
                    report,
                );
            }
            Ok(step) => partition = step.partition,
            Err(Error::RefinementExhausted(reason)) => return stop(reason, partition, report),
            Err(e) => return Err(e),
        }
    }
}
