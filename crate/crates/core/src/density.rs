//! Pair counts `p(S,T)`, densities `d(S,T)` and image distributions `L(S,·)`.

use crate::cdf::StepCdf;
use crate::dominance::DominanceTable;
use crate::error::{Error, Result};
use crate::perm::{Interval, Permutation, Subset};

/// Position at which the image value `v` enters the distribution of a set:
/// `L(S, α)` counts `v` exactly when `α > v/n`, and on the grid `α = k/n` this
/// is the right-continuous jump at `(v+1)/n`.
#[inline]
pub fn atom_pos(v: usize, n: usize) -> f64 {
    (v + 1) as f64 / n as f64
}

fn check_subset(s: &Subset<'_>, n: usize) -> Result<()> {
    let ok = match s {
        Subset::Interval(i) => i.hi <= n,
        Subset::Set(set) => set.in_range(n),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Param(format!("index set out of range for n = {n}")))
    }
}

/// `|{(s,t) ∈ S×T : σ(s) < t}|`.
pub fn pair_count(table: &DominanceTable, s: Subset<'_>, t: Interval) -> Result<u64> {
    let n = table.n();
    check_subset(&s, n)?;
    check_subset(&Subset::Interval(t), n)?;
    Ok(match s {
        Subset::Interval(i) => table.pair_count(i, t),
        Subset::Set(set) => set
            .members()
            .iter()
            .map(|&x| {
                let above = table.perm().image(x) + 1;
                t.hi.saturating_sub(above.max(t.lo)) as u64
            })
            .sum(),
    })
}

/// `p(S,T) / (|S||T|)`.
pub fn density(table: &DominanceTable, s: Subset<'_>, t: Interval) -> Result<f64> {
    if s.is_empty() || t.is_empty() {
        return Err(Error::EmptySet);
    }
    let p = pair_count(table, s, t)?;
    Ok(p as f64 / (s.len() as f64 * t.len() as f64))
}

/// The distribution `α ↦ |σ(S) ∩ [0, αn)| / |S|` as an exact step function
/// with one knot per image of `S`.
pub fn cdf_l(perm: &Permutation, s: Subset<'_>) -> Result<StepCdf> {
    let n = perm.len();
    check_subset(&s, n)?;
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut images = Vec::with_capacity(s.len());
    s.for_each(|x| images.push(perm.image(x)));
    Ok(cdf_of_values(&mut images, n))
}

/// Step CDF of a multiset-free collection of image values in `Z_n`.
pub(crate) fn cdf_of_values(values: &mut [usize], n: usize) -> StepCdf {
    values.sort_unstable();
    let total = values.len() as f64;
    let knots = values
        .iter()
        .enumerate()
        .map(|(r, &v)| (atom_pos(v, n), (r + 1) as f64 / total))
        .collect();
    StepCdf::step(knots, 1.0).expect("sorted distinct values give a valid CDF")
}
