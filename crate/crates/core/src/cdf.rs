//! Nondecreasing distribution functions on `[0, a]`: exact step functions and
//! continuous piecewise-linear ones, with ε-nearness, Lipschitz moduli and
//! box-kernel smoothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for every CDF comparison.
pub const TOL: f64 = 1e-9;

/// Arguments within this distance of a knot are treated as the knot itself,
/// so that sums like `(v+1)/n + ε` that equal a knot mathematically are not
/// misread after rounding.
pub const POS_TOL: f64 = 1e-12;

/// Number of chords per knot interval when smoothing a piecewise-linear input
/// (the exact result is piecewise quadratic there).
const LINEAR_SMOOTH_SUBDIVISIONS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    /// Right-continuous: the value of the last knot at or left of `x`.
    Step,
    /// Linear between knots; `0` left of the first knot (a jump there is
    /// allowed), constant right of the last.
    Linear,
}

/// A CDF given by knots `(position, value)`. Positions strictly increase,
/// values are nondecreasing in `[0, 1]` and the last value is `1`. Left of
/// the first knot the function is `0`; right of `domain_end` it is `1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCdf {
    knots: Vec<(f64, f64)>,
    domain_end: f64,
    interp: Interp,
}

/// Outcome of an ε-nearness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nearness {
    pub near: bool,
    /// Argument of the largest violation (or of the smallest slack).
    pub alpha: f64,
    /// Largest value of `f(α) - g(α+ε) - ε` or `g(α-ε) - ε - f(α)`; positive
    /// means the sandwich fails.
    pub gap: f64,
}

impl StepCdf {
    pub fn step(knots: Vec<(f64, f64)>, domain_end: f64) -> Result<Self> {
        Self::build(knots, domain_end, Interp::Step)
    }

    pub fn linear(knots: Vec<(f64, f64)>, domain_end: f64) -> Result<Self> {
        Self::build(knots, domain_end, Interp::Linear)
    }

    fn build(mut knots: Vec<(f64, f64)>, domain_end: f64, interp: Interp) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Param("a CDF needs at least one knot".into()));
        }
        let mut prev: Option<(f64, f64)> = None;
        for &(p, v) in &knots {
            if !(p.is_finite() && v.is_finite()) || p < 0.0 || !(-TOL..=1.0 + TOL).contains(&v) {
                return Err(Error::Param(format!("bad knot ({p}, {v})")));
            }
            if let Some((pp, pv)) = prev {
                if p <= pp || v < pv - TOL {
                    return Err(Error::Param(format!(
                        "knots must have increasing positions and nondecreasing values at ({p}, {v})"
                    )));
                }
            }
            prev = Some((p, v));
        }
        let last = knots.last_mut().unwrap();
        if (last.1 - 1.0).abs() > TOL {
            return Err(Error::Param(format!("final value {} is not 1", last.1)));
        }
        last.1 = 1.0;
        if domain_end < last.0 || !domain_end.is_finite() {
            return Err(Error::Param(format!(
                "domain end {domain_end} precedes the last knot {}",
                last.0
            )));
        }
        for k in &mut knots {
            k.1 = k.1.clamp(0.0, 1.0);
        }
        Ok(Self {
            knots,
            domain_end,
            interp,
        })
    }

    /// `x ↦ x` on `[0, 1]`.
    pub fn identity() -> Self {
        Self {
            knots: vec![(0.0, 0.0), (1.0, 1.0)],
            domain_end: 1.0,
            interp: Interp::Linear,
        }
    }

    /// All mass at `at ∈ [0, 1]`.
    pub fn unit_step(at: f64) -> Self {
        Self {
            knots: vec![(at, 1.0)],
            domain_end: at.max(1.0),
            interp: Interp::Step,
        }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn domain_end(&self) -> f64 {
        self.domain_end
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    /// Index of the last knot with position `<= x`.
    fn last_at_or_before(&self, x: f64) -> Option<usize> {
        let k = self.knots.partition_point(|&(p, _)| p <= x + POS_TOL);
        k.checked_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let Some(i) = self.last_at_or_before(x) else {
            return 0.0;
        };
        match self.interp {
            Interp::Step => self.knots[i].1,
            Interp::Linear => self.interp_from(i, x),
        }
    }

    fn interp_from(&self, i: usize, x: f64) -> f64 {
        let (p0, v0) = self.knots[i];
        match self.knots.get(i + 1) {
            None => v0,
            Some(&(p1, v1)) => v0 + (v1 - v0) * ((x - p0) / (p1 - p0)).clamp(0.0, 1.0),
        }
    }

    /// `lim_{y ↑ x} f(y)`.
    pub fn eval_left(&self, x: f64) -> f64 {
        let k = self.knots.partition_point(|&(p, _)| p < x - POS_TOL);
        if k == 0 {
            return 0.0;
        }
        match self.interp {
            Interp::Step => self.knots[k - 1].1,
            Interp::Linear => self.interp_from(k - 1, x),
        }
    }

    /// Evaluation under the convention `g(α) = g(0)` for `α < 0`.
    #[inline]
    pub fn eval_clamped(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.eval(0.0)
        } else {
            self.eval(x)
        }
    }

    #[inline]
    pub fn eval_left_clamped(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.eval(0.0)
        } else {
            self.eval_left(x)
        }
    }

    /// Mass of `[a, b)`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.eval_left(b) - self.eval_left(a)
    }

    /// Sizes of the jumps (atoms) of the function.
    pub fn jumps(&self) -> Vec<f64> {
        match self.interp {
            Interp::Step => {
                let mut prev = 0.0;
                self.knots
                    .iter()
                    .map(|&(_, v)| {
                        let j = v - prev;
                        prev = v;
                        j
                    })
                    .collect()
            }
            Interp::Linear => vec![self.knots[0].1],
        }
    }

    fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots.iter().map(|k| k.0)
    }

    /// Whether `self` is ε-near `g`: `g(α-ε) - ε ≤ f(α) ≤ g(α+ε) + ε` for
    /// every `α`, both functions being constant left of `0`.
    ///
    /// Letting `α` run over `[-ε, end]` rather than `[0, end]` makes the
    /// relation symmetric in `f` and `g`. Both sides are piecewise constant or
    /// linear between the knots of `f` and the `±ε` translates of the knots of
    /// `g`, so checking values and left limits there is exact.
    pub fn eps_near(&self, g: &StepCdf, eps: f64) -> Nearness {
        let f = self;
        let end = f.domain_end.max(g.domain_end);
        let start = -eps;
        let mut crit: Vec<f64> = vec![start, 0.0, end];
        crit.extend(f.positions());
        for p in g.positions() {
            crit.push(p - eps);
            crit.push(p + eps);
        }
        crit.retain(|&c| (start..=end).contains(&c));
        crit.sort_by(f64::total_cmp);
        crit.dedup();

        let mut worst = (f64::NEG_INFINITY, 0.0);
        let mut consider = |gap: f64, alpha: f64| {
            if gap > worst.0 {
                worst = (gap, alpha);
            }
        };
        for &c in &crit {
            let fc = f.eval_clamped(c);
            consider(fc - g.eval_clamped(c + eps) - eps, c);
            consider(g.eval_clamped(c - eps) - eps - fc, c);
            if c > start {
                let fl = f.eval_left_clamped(c);
                consider(fl - g.eval_left_clamped(c + eps) - eps, c);
                consider(g.eval_left_clamped(c - eps) - eps - fl, c);
            }
        }
        Nearness {
            near: worst.0 <= TOL,
            alpha: worst.1,
            gap: worst.0,
        }
    }

    /// Smallest `B` with `f(x+ε) - f(x) ≤ Bε` for all `x ∈ [0, domain_end]`.
    pub fn lipschitz_modulus(&self, eps: f64) -> Result<f64> {
        Ok(self.max_window_increment(eps)? / eps)
    }

    /// `sup_x f(x+ε) - f(x)` over `x ∈ [0, domain_end]`.
    pub fn max_window_increment(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::Param(format!("window must be positive, got {eps}")));
        }
        let end = self.domain_end;
        let mut crit: Vec<f64> = vec![0.0, end];
        for p in self.positions() {
            crit.push(p);
            crit.push(p - eps);
        }
        crit.retain(|&c| (0.0..=end).contains(&c));
        let mut best = 0.0f64;
        for &c in &crit {
            best = best.max(self.eval(c + eps) - self.eval(c));
            if c > 0.0 {
                best = best.max(self.eval_left(c + eps) - self.eval_left(c));
            }
        }
        Ok(best)
    }

    /// `∫_0^x f(s) ds` with `f = 0` left of the first knot.
    fn antiderivative(&self) -> impl Fn(f64) -> f64 + '_ {
        // cumulative integrals at each knot
        let mut acc = Vec::with_capacity(self.knots.len());
        let mut total = 0.0;
        for (i, &(p, v)) in self.knots.iter().enumerate() {
            acc.push(total);
            if let Some(&(q, w)) = self.knots.get(i + 1) {
                total += match self.interp {
                    Interp::Step => v * (q - p),
                    Interp::Linear => 0.5 * (v + w) * (q - p),
                };
            }
        }
        move |x: f64| {
            let Some(i) = self.last_at_or_before(x) else {
                return 0.0;
            };
            let (p, v) = self.knots[i];
            let dx = x - p;
            match (self.interp, self.knots.get(i + 1)) {
                (Interp::Linear, Some(&(q, w))) => {
                    acc[i] + v * dx + 0.5 * (w - v) / (q - p) * dx * dx
                }
                _ => acc[i] + v * dx,
            }
        }
    }

    /// `f̃(t) = δ⁻¹ ∫_{-δ}^0 f(t+s) ds`, a CDF on `[0, domain_end + δ]`.
    ///
    /// For step input the result is piecewise linear with knots at the input
    /// positions and their `+δ` translates, and is exact. Piecewise-linear
    /// input gives a piecewise-quadratic result, stored as chords.
    pub fn convolve_smooth(&self, delta: f64) -> Result<StepCdf> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Param(format!(
                "smoothing width must be positive, got {delta}"
            )));
        }
        let end = self.domain_end + delta;
        let big_f = self.antiderivative();
        let mut pos: Vec<f64> = vec![0.0, end];
        for p in self.positions() {
            pos.push(p);
            pos.push(p + delta);
        }
        pos.retain(|&c| (0.0..=end).contains(&c));
        pos.sort_by(f64::total_cmp);
        pos.dedup();
        if self.interp == Interp::Linear {
            let mut fine = Vec::with_capacity(pos.len() * LINEAR_SMOOTH_SUBDIVISIONS);
            for w in pos.windows(2) {
                for j in 0..LINEAR_SMOOTH_SUBDIVISIONS {
                    fine.push(w[0] + (w[1] - w[0]) * j as f64 / LINEAR_SMOOTH_SUBDIVISIONS as f64);
                }
            }
            fine.push(end);
            fine.dedup();
            pos = fine;
        }
        let mut knots: Vec<(f64, f64)> = Vec::with_capacity(pos.len());
        let mut prev = 0.0f64;
        for &t in &pos {
            let v = ((big_f(t) - big_f(t - delta)) / delta).clamp(prev, 1.0);
            knots.push((t, v));
            prev = v;
        }
        knots.last_mut().unwrap().1 = 1.0;
        StepCdf::linear(knots, end)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CdfRepr {
    Step(Vec<[f64; 2]>),
    Linear {
        linear: Vec<[f64; 2]>,
        domain_end: f64,
    },
}

impl Serialize for StepCdf {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.knots.iter().map(|&(p, v)| [p, v]).collect();
        match self.interp {
            Interp::Step => CdfRepr::Step(pairs),
            Interp::Linear => CdfRepr::Linear {
                linear: pairs,
                domain_end: self.domain_end,
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StepCdf {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let to_knots = |v: Vec<[f64; 2]>| v.into_iter().map(|[p, x]| (p, x)).collect::<Vec<_>>();
        match CdfRepr::deserialize(d)? {
            CdfRepr::Step(v) => {
                let end = v.last().map_or(1.0, |k| k[0].max(1.0));
                StepCdf::step(to_knots(v), end)
            }
            CdfRepr::Linear { linear, domain_end } => StepCdf::linear(to_knots(linear), domain_end),
        }
        .map_err(serde::de::Error::custom)
    }
}
