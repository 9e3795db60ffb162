//! Quasirandomness statistics: discrepancies, separability, subsequence
//! balance, character sums and translation variance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cdf::StepCdf;
use crate::dominance::DominanceTable;
use crate::error::{Error, Result};
use crate::patterns::{binomial, count_pattern, Pattern};
use crate::perm::{IndexSet, Interval, Permutation};
use crate::uniformity::{uniform_partition, UniformStrategy};

/// Largest `n` for which `discrepancy` runs in exact mode.
pub const EXACT_DISCREPANCY_MAX_N: usize = 512;

/// `D*(σ) = max_{x,y} |N(x,y) - xy/n|` over initial intervals `[0,x)`,
/// `[0,y)`, where `N(x,y) = |σ([0,x)) ∩ [0,y)|`.
pub fn discrepancy_star(table: &DominanceTable) -> f64 {
    let n = table.n();
    if n == 0 {
        return 0.0;
    }
    let mut best = 0i64;
    for x in 0..=n {
        for y in 0..=n {
            let d = (n as i64 * i64::from(table.count(x, y)) - (x * y) as i64).abs();
            best = best.max(d);
        }
    }
    best as f64 / n as f64
}

/// For a fixed row interval, `max_J |σ(I) ∩ J| - |I||J|/n` in absolute
/// value is the range of `h(y) = n·N_I(y) - |I|·y` over the column grid.
fn row_range(table: &DominanceTable, i: Interval, ys: &[usize]) -> (i64, usize, usize) {
    let n = table.n() as i64;
    let len = i.len() as i64;
    let (mut lo, mut hi) = ((i64::MAX, 0), (i64::MIN, 0));
    for &y in ys {
        let c = i64::from(table.count(i.hi, y)) - i64::from(table.count(i.lo, y));
        let h = n * c - len * y as i64;
        if h < lo.0 {
            lo = (h, y);
        }
        if h > hi.0 {
            hi = (h, y);
        }
    }
    (hi.0 - lo.0, lo.1.min(hi.1), lo.1.max(hi.1))
}

/// Largest discrepancy over intervals with endpoints on the given grids,
/// scaled by `n`, with its witness.
fn grid_discrepancy(
    table: &DominanceTable,
    xs: &[usize],
    ys: &[usize],
) -> (i64, Interval, Interval) {
    let mut best = (0, Interval::new(0, 0), Interval::new(0, 0));
    for (a, &lo) in xs.iter().enumerate() {
        for &hi in &xs[a + 1..] {
            let i = Interval::new(lo, hi);
            let (r, y0, y1) = row_range(table, i, ys);
            if r > best.0 {
                best = (r, i, Interval::new(y0, y1));
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyMode {
    Exact,
    /// `[D*, 4D*]` from writing a rectangle as four initial ones.
    Bounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyBounds {
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
    /// Maximizing pair in exact mode.
    pub witness: Option<(Interval, Interval)>,
}

/// `D(σ) = max_{I,J} ||σ(I) ∩ J| - |I||J|/n|` over all intervals. Exact mode
/// costs `O(n³)`: for each `I` the best `J` comes from the range of a prefix
/// function.
pub fn discrepancy(table: &DominanceTable, mode: DiscrepancyMode) -> Result<DiscrepancyBounds> {
    let n = table.n();
    match mode {
        DiscrepancyMode::Bounded => {
            let d = discrepancy_star(table);
            Ok(DiscrepancyBounds {
                lower: d,
                upper: 4.0 * d,
                exact: false,
                witness: None,
            })
        }
        DiscrepancyMode::Exact => {
            if n > EXACT_DISCREPANCY_MAX_N {
                return Err(Error::Guard(format!(
                    "exact discrepancy is limited to n <= {EXACT_DISCREPANCY_MAX_N}, got {n}"
                )));
            }
            if n == 0 {
                return Ok(DiscrepancyBounds {
                    lower: 0.0,
                    upper: 0.0,
                    exact: true,
                    witness: None,
                });
            }
            let all: Vec<usize> = (0..=n).collect();
            let (r, i, j) = grid_discrepancy(table, &all, &all);
            let d = r as f64 / n as f64;
            Ok(DiscrepancyBounds {
                lower: d,
                upper: d,
                exact: true,
                witness: Some((i, j)),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityStat {
    pub value: f64,
    pub grid: usize,
    /// `I ∩ K` and `J ∩ K′` at the maximum.
    pub rows: Interval,
    pub cols: Interval,
}

/// Separability deviation over grid-aligned intervals `I, J, K, K′`.
///
/// Both sums depend only on `A = I ∩ K` and `B = J ∩ K′`: the first is the
/// number of `x ∈ A` with `σ(x) ∈ B`, the second `|A||B|/n`. Taking
/// `I = K = A` and `J = K′ = B` shows every grid pair is attained, so the
/// statistic is the grid-restricted discrepancy.
pub fn separability_stat(table: &DominanceTable, grid: usize) -> Result<SeparabilityStat> {
    if grid == 0 {
        return Err(Error::Param("grid step must be at least 1".into()));
    }
    let n = table.n();
    let mut pts: Vec<usize> = (0..n).step_by(grid).collect();
    pts.push(n);
    let (r, rows, cols) = grid_discrepancy(table, &pts, &pts);
    Ok(SeparabilityStat {
        value: if n == 0 { 0.0 } else { r as f64 / n as f64 },
        grid,
        rows,
        cols,
    })
}

fn preimage_slice(perm: &Permutation, i: Interval, j: Interval) -> IndexSet {
    IndexSet::from_sorted_unchecked(i.iter().filter(|&x| j.contains(perm.image(x))).collect())
}

fn check_range(n: usize, ivs: &[Interval]) -> Result<()> {
    if ivs.iter().any(|iv| iv.hi > n || iv.lo > iv.hi) {
        return Err(Error::Param(format!("intervals must lie in [0, {n}]")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSubseqStat {
    /// `|I ∩ σ⁻¹(J)|`.
    pub size: usize,
    /// `Λ^{01} - Λ^{10}` on the restriction.
    pub difference: i64,
    /// Whether `|I|, |J| ≥ n/2`.
    pub in_regime: bool,
}

pub fn two_subseq_stat(perm: &Permutation, i: Interval, j: Interval) -> Result<TwoSubseqStat> {
    let n = perm.len();
    check_range(n, &[i, j])?;
    let set = preimage_slice(perm, i, j);
    let r = set.len() as i64;
    let up = count_pattern(perm, &Pattern::from_images(&[0, 1])?, Some(&set))? as i64;
    let total = r * (r - 1) / 2;
    Ok(TwoSubseqStat {
        size: set.len(),
        difference: 2 * up - total,
        in_regime: 2 * i.len() >= n && 2 * j.len() >= n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MSubseqStat {
    pub size: usize,
    pub count: u64,
    /// `C(|σ(I) ∩ J|, m) / m!`.
    pub target: f64,
    pub deviation: f64,
}

pub fn m_subseq_stat(
    perm: &Permutation,
    tau: &Pattern,
    i: Interval,
    j: Interval,
) -> Result<MSubseqStat> {
    let m = tau.m();
    if m > 4 {
        return Err(Error::Guard(
            "the m-subsequence statistic supports m <= 4".into(),
        ));
    }
    check_range(perm.len(), &[i, j])?;
    let set = preimage_slice(perm, i, j);
    let count = count_pattern(perm, tau, Some(&set))?;
    let fact: f64 = (1..=m).map(|x| x as f64).product();
    let target = binomial(set.len(), m) / fact;
    Ok(MSubseqStat {
        size: set.len(),
        count,
        target,
        deviation: (count as f64 - target).abs(),
    })
}

/// `|Σ_{s ∈ σ(I)} e(-ks/n)|` for `k = 1, …, k_max`.
pub fn eigenvalue_stat(perm: &Permutation, i: Interval, k_max: usize) -> Result<Vec<f64>> {
    let n = perm.len();
    check_range(n, &[i])?;
    if k_max == 0 || k_max >= n {
        return Err(Error::Param(format!("need 1 <= k_max < n, got {k_max}")));
    }
    Ok((1..=k_max)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for x in i.iter() {
                // reduce before scaling to keep the angle small
                let t = (k * perm.image(x)) % n;
                let a = -2.0 * PI * t as f64 / n as f64;
                re += a.cos();
                im += a.sin();
            }
            re.hypot(im)
        })
        .collect())
}

/// `Σ_{k ∈ Z_n} (|σ(I) ∩ (J+k)| - |I||J|/n)²` with cyclic shifts.
pub fn translation_stat(perm: &Permutation, i: Interval, j: Interval) -> Result<f64> {
    let n = perm.len();
    check_range(n, &[i, j])?;
    if n == 0 {
        return Ok(0.0);
    }
    let mut prefix = vec![0usize; 2 * n + 1];
    let mut member = vec![false; n];
    for x in i.iter() {
        member[perm.image(x)] = true;
    }
    for t in 0..2 * n {
        prefix[t + 1] = prefix[t] + usize::from(member[t % n]);
    }
    let mean = (i.len() * j.len()) as f64 / n as f64;
    Ok((0..n)
        .map(|k| {
            let a = j.lo + k;
            let c = if j.len() >= n {
                i.len()
            } else {
                prefix[a + j.len()] - prefix[a]
            };
            (c as f64 - mean).powi(2)
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiUniformCheck {
    pub quasirandom: bool,
    pub k: usize,
    pub exceptional_size: usize,
    /// Block with the largest nearness gap against the identity CDF.
    pub worst_block: Option<usize>,
    pub worst_gap: f64,
}

/// Builds a uniform partition at `ε` and checks that every reference CDF is
/// `2ε`-near the identity.
pub fn quasirandom_via_uniformity(
    table: &DominanceTable,
    eps: f64,
    m: usize,
) -> Result<QuasiUniformCheck> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Param(format!("ε must lie in (0, 1/2), got {eps}")));
    }
    let out = uniform_partition(table, eps, m, UniformStrategy::Coarsest)?;
    let id = StepCdf::identity();
    let mut worst: Option<(usize, f64)> = None;
    for (s, f) in out.uniform.family.iter().enumerate() {
        let g = f.eps_near(&id, 2.0 * eps).gap;
        if worst.is_none_or(|(_, w)| g > w) {
            worst = Some((s, g));
        }
    }
    Ok(QuasiUniformCheck {
        quasirandom: worst.is_some_and(|(_, g)| g <= 0.0),
        k: out.uniform.partition.k(),
        exceptional_size: out.uniform.partition.exceptional_size(),
        worst_block: worst.map(|w| w.0),
        worst_gap: worst.map_or(f64::INFINITY, |w| w.1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasirandomReport {
    pub n: usize,
    pub d_star: f64,
    pub d_lower: f64,
    pub d_upper: f64,
    pub d_exact: bool,
    pub separability: SeparabilityStat,
    /// `Λ^{01} - Λ^{10}` on the whole permutation.
    pub two_subseq: i64,
    /// `m`-subsequence deviation for `τ = 012` on the whole permutation.
    pub m_subseq: f64,
    /// Translation variance for `I = J = [0, ⌊n/2⌋)`.
    pub translation: f64,
    /// Character-sum magnitudes over `σ([0, ⌊n/2⌋))` for `k = 1, 2, …`.
    pub eigenvalue_profile: Vec<f64>,
    pub near_identity: Option<QuasiUniformCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub separability_grid: Option<usize>,
    pub k_max: usize,
    /// `ε` for the uniform-partition check; skipped when absent.
    pub uniform_eps: Option<f64>,
    pub m: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            separability_grid: None,
            k_max: 16,
            uniform_eps: Some(0.15),
            m: 4,
        }
    }
}

/// All statistics at once; exact discrepancy when `n` allows it.
pub fn quasirandom_report(
    table: &DominanceTable,
    opts: &ReportOptions,
) -> Result<QuasirandomReport> {
    let perm = table.perm();
    let n = perm.len();
    if n < 2 {
        return Err(Error::Param("a quasirandomness report needs n >= 2".into()));
    }
    let d_star = discrepancy_star(table);
    let mode = if n <= EXACT_DISCREPANCY_MAX_N {
        DiscrepancyMode::Exact
    } else {
        DiscrepancyMode::Bounded
    };
    let d = discrepancy(table, mode)?;
    let grid = opts.separability_grid.unwrap_or((n / 32).max(1));
    let all = Interval::new(0, n);
    let half = Interval::new(0, n / 2);
    let m_subseq = if n >= 3 {
        m_subseq_stat(perm, &Pattern::from_images(&[0, 1, 2])?, all, all)?.deviation
    } else {
        0.0
    };
    let near_identity = match opts.uniform_eps {
        Some(eps) => Some(quasirandom_via_uniformity(table, eps, opts.m.clamp(1, n))?),
        None => None,
    };
    Ok(QuasirandomReport {
        n,
        d_star,
        d_lower: d.lower,
        d_upper: d.upper,
        d_exact: d.exact,
        separability: separability_stat(table, grid)?,
        two_subseq: two_subseq_stat(perm, all, all)?.difference,
        m_subseq,
        translation: translation_stat(perm, half, half)?,
        eigenvalue_profile: eigenvalue_stat(perm, half, opts.k_max.clamp(1, n - 1))?,
        near_identity,
    })
}
