//! Ordered-simplex integrals against block CDFs and the pattern-count
//! estimator built on them.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdf::{StepCdf, POS_TOL};
use crate::error::{Error, Result};
use crate::patterns::{binomial, count_pattern, Pattern};
use crate::perm::Permutation;
use crate::uniformity::UniformPartition;

/// `omega_integral` refuses families with more block tuples than this.
pub const TUPLE_GUARD: f64 = 1e7;

/// Integrand of `∫ α(x_1) df_1(x_1) ⋯ df_r(x_r)` over `x_1 < ⋯ < x_r ≤ β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexSpec {
    pub beta: f64,
    /// `f_1, …, f_r` in integration order.
    pub cdfs: Vec<StepCdf>,
    /// Nondecreasing weight with values in `[0, 1]`; `α ≡ 1` when absent.
    pub weight: Option<StepCdf>,
}

/// Polynomial in a local coordinate, lowest degree first.
type Poly = Vec<f64>;

fn poly_eval(p: &Poly, u: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

/// `c + d ∫_0^u p`.
fn poly_integrate(p: &Poly, d: f64, c: f64) -> Poly {
    let mut out = Vec::with_capacity(p.len() + 1);
    out.push(c);
    out.extend(p.iter().enumerate().map(|(i, a)| d * a / (i + 1) as f64));
    out
}

fn atom(f: &StepCdf, x: f64) -> f64 {
    f.eval(x) - f.eval_left(x)
}

/// Mass density of `f` inside `(a, b)`, which holds no knot of `f`.
fn density_on(f: &StepCdf, a: f64, b: f64) -> f64 {
    ((f.eval_left(b) - f.eval(a)) / (b - a)).max(0.0)
}

/// Exact value for step and piecewise-linear inputs.
///
/// A sweep over the merged knot grid keeps, for each stage `j`, the mass of
/// `x_1 < ⋯ < x_j ≤ x`. Inside a grid cell every density is constant and
/// the stages are polynomials; at a grid point the atoms update each stage
/// from the previous stage's value strictly to the left, so coinciding atoms
/// contribute nothing.
fn simplex_core(cdfs: &[&StepCdf], weight: Option<&StepCdf>, beta: f64) -> f64 {
    let r = cdfs.len();
    if r == 0 {
        return 1.0;
    }
    let mut grid: Vec<f64> = cdfs
        .iter()
        .copied()
        .chain(weight)
        .flat_map(|f| f.knots().iter().map(|&(p, _)| p))
        .filter(|&p| p <= beta + POS_TOL)
        .chain([0.0, beta])
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= POS_TOL);
    let alpha = |x: f64| weight.map_or(1.0, |w| w.eval(x));
    // stage[j] = mass of the first j+1 coordinates ordered and ≤ current x
    let mut stage = vec![0.0f64; r];
    let apply_atoms = |stage: &mut Vec<f64>, x: f64| {
        for j in (0..r).rev() {
            let below = if j == 0 { alpha(x) } else { stage[j - 1] };
            stage[j] += atom(cdfs[j], x) * below;
        }
    };
    for (i, &x) in grid.iter().enumerate() {
        if i > 0 {
            let a = grid[i - 1];
            let h = x - a;
            if h > 0.0 {
                let slope = weight.map_or(0.0, |w| density_on(w, a, x));
                let mut prev: Poly = vec![alpha(a), slope];
                for j in 0..r {
                    let next = poly_integrate(&prev, density_on(cdfs[j], a, x), stage[j]);
                    stage[j] = poly_eval(&next, h);
                    prev = next;
                }
            }
        }
        apply_atoms(&mut stage, x);
    }
    stage[r - 1]
}

pub fn simplex_integral(spec: &SimplexSpec) -> Result<f64> {
    if spec.cdfs.is_empty() {
        return Err(Error::Param("a simplex integral needs r >= 1".into()));
    }
    if !(spec.beta >= 0.0) || !spec.beta.is_finite() {
        return Err(Error::Param(format!(
            "β must be a finite nonnegative number, got {}",
            spec.beta
        )));
    }
    let cdfs: Vec<&StepCdf> = spec.cdfs.iter().collect();
    Ok(simplex_core(&cdfs, spec.weight.as_ref(), spec.beta))
}

/// The form `|C_1|^m Σ_{s_0<⋯<s_{m-1}} ∧_j df_{s_{τ⁻¹(j)}}(x_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaForm {
    pub block_len: usize,
    pub tau: Pattern,
    pub family: Vec<StepCdf>,
}

/// Integral of the form over `x_1 < ⋯ < x_m ≤ β`, summing one simplex
/// integral per increasing block tuple.
pub fn omega_integral(form: &OmegaForm, beta: f64) -> Result<f64> {
    let m = form.tau.m();
    let k = form.family.len();
    if m == 0 || m > k {
        return Err(Error::Param(format!(
            "need 1 <= m <= k, got m = {m}, k = {k}"
        )));
    }
    let tuples = binomial(k, m);
    if tuples > TUPLE_GUARD {
        return Err(Error::Guard(format!(
            "C({k}, {m}) = {tuples:.3e} block tuples exceed the limit {TUPLE_GUARD:.0e}"
        )));
    }
    let inv = form.tau.perm().inverse();
    let combos: Vec<Vec<usize>> = (0..k).combinations(m).collect();
    let parts: Vec<f64> = combos
        .par_iter()
        .map(|s| {
            let cdfs: Vec<&StepCdf> = (0..m).map(|j| &form.family[s[inv.image(j)]]).collect();
            simplex_core(&cdfs, None, beta)
        })
        .collect();
    // summed in a fixed order so results do not depend on thread scheduling
    let sum: f64 = parts.iter().sum();
    Ok((form.block_len as f64).powi(m as i32) * sum)
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|i| i as f64).product()
}

/// `(20√ε m² + 4/k) n^m / (m-1)!`.
pub fn estimate_bound(n: usize, m: usize, k: usize, eps: f64) -> f64 {
    (20.0 * eps.sqrt() * (m * m) as f64 + 4.0 / k as f64) * (n as f64).powi(m as i32)
        / factorial(m.saturating_sub(1))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    /// Also integrate the smoothed family over `[0, 1+δ]`.
    pub smoothed: bool,
    /// Smoothing width; `√ε` when absent.
    pub delta: Option<f64>,
    /// Attach the exact count when the exact engine accepts the input.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEstimate {
    pub estimate: f64,
    pub bound: f64,
    pub exact: Option<u64>,
    pub epsilon: f64,
    pub k: usize,
    pub m: usize,
    pub smoothed_estimate: Option<f64>,
}

impl PatternEstimate {
    /// Whether the exact count, when known, lies within the bound.
    pub fn within_bound(&self) -> Option<bool> {
        self.exact
            .map(|c| (c as f64 - self.estimate).abs() <= self.bound)
    }
}

/// Estimates `Λ^τ(σ)` by integrating the partition's family over the
/// ordered simplex.
pub fn estimate_pattern_count(
    perm: &Permutation,
    u: &UniformPartition,
    tau: &Pattern,
    opts: &EstimateOptions,
) -> Result<PatternEstimate> {
    let eps = u.epsilon;
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::Param(format!(
            "the estimator needs 0 < ε <= 1/2, got {eps}"
        )));
    }
    if u.family.len() != u.partition.k() {
        return Err(Error::Param(
            "family size differs from the block count".into(),
        ));
    }
    let m = tau.m();
    let k = u.partition.k();
    let form = OmegaForm {
        block_len: u.partition.block_len(),
        tau: tau.clone(),
        family: u.family.clone(),
    };
    let estimate = omega_integral(&form, 1.0)?;
    let smoothed_estimate = if opts.smoothed {
        let delta = opts.delta.unwrap_or(eps.sqrt());
        let family = u
            .family
            .iter()
            .map(|f| f.convolve_smooth(delta))
            .collect::<Result<Vec<_>>>()?;
        Some(omega_integral(&OmegaForm { family, ..form }, 1.0 + delta)?)
    } else {
        None
    };
    let exact = if opts.exact {
        count_pattern(perm, tau, None).ok()
    } else {
        None
    };
    Ok(PatternEstimate {
        estimate,
        bound: estimate_bound(perm.len(), m, k, eps),
        exact,
        epsilon: eps,
        k,
        m,
        smoothed_estimate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingComparison {
    pub f_integral: f64,
    pub g_integral: f64,
    pub difference: f64,
    /// `r(a+1)(B+1)ε`.
    pub bound: f64,
    /// Each `f_j` is ε-near `g_j`.
    pub near: bool,
    /// Each `g_j` is `(B, ε)`-Lipschitz.
    pub lipschitz: bool,
    pub within_bound: bool,
}

impl SmoothingComparison {
    pub fn certified(&self) -> bool {
        self.near && self.lipschitz
    }
}

/// Integrates both families over the simplex and compares the gap with the
/// bound that holds under the nearness and Lipschitz hypotheses. Failed
/// hypotheses are reported, not raised.
pub fn compare_under_smoothing(
    fs: &[StepCdf],
    gs: &[StepCdf],
    eps: f64,
    b: f64,
    beta: f64,
    weight: Option<&StepCdf>,
) -> Result<SmoothingComparison> {
    if fs.len() != gs.len() || fs.is_empty() {
        return Err(Error::Param(
            "the two families must be nonempty and of equal size".into(),
        ));
    }
    if !(eps > 0.0) || !(b >= 0.0) {
        return Err(Error::Param(format!(
            "need ε > 0 and B >= 0, got {eps}, {b}"
        )));
    }
    let a = fs
        .iter()
        .chain(gs)
        .map(StepCdf::domain_end)
        .fold(0.0, f64::max);
    if !(0.0..=a + POS_TOL).contains(&beta) {
        return Err(Error::Param(format!("β must lie in [0, {a}], got {beta}")));
    }
    let near = fs.iter().zip(gs).all(|(f, g)| f.eps_near(g, eps).near);
    let lipschitz = gs
        .iter()
        .map(|g| g.lipschitz_modulus(eps))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .all(|l| l <= b + 1e-9);
    let f_refs: Vec<&StepCdf> = fs.iter().collect();
    let g_refs: Vec<&StepCdf> = gs.iter().collect();
    let f_integral = simplex_core(&f_refs, weight, beta);
    let g_integral = simplex_core(&g_refs, weight, beta);
    let difference = (f_integral - g_integral).abs();
    let bound = fs.len() as f64 * (a + 1.0) * (b + 1.0) * eps;
    Ok(SmoothingComparison {
        f_integral,
        g_integral,
        difference,
        bound,
        near,
        lipschitz,
        within_bound: difference <= bound + 1e-12,
    })
}
