//! Dense 2-D dominance counts with O(1) rectangle and pair-count queries.

use crate::error::{Error, Result};
use crate::perm::{Interval, Permutation};

/// Default largest `n` for which a dense table is built.
pub const DEFAULT_MAX_N: usize = 1 << 14;

/// `counts[x][y] = #{s < x : σ(s) < y}` together with its running sum over
/// `y`, `pairs[x][y] = Σ_{t < y} counts[x][t] = p([0,x), [0,y))`.
///
/// Both grids are `(n+1) × (n+1)`, row-major.
#[derive(Debug, Clone)]
pub struct DominanceTable {
    perm: Permutation,
    n: usize,
    counts: Vec<u32>,
    pairs: Vec<u32>,
}

impl DominanceTable {
    pub fn new(perm: &Permutation) -> Result<Self> {
        Self::with_cap(perm, DEFAULT_MAX_N)
    }

    /// Bytes a table over `Z_n` occupies.
    pub fn required_bytes(n: usize) -> u64 {
        let side = n as u64 + 1;
        side * side * 2 * std::mem::size_of::<u32>() as u64
    }

    pub fn with_cap(perm: &Permutation, max_n: usize) -> Result<Self> {
        let n = perm.len();
        // pairs[n][n] = n(n-1)/2 must fit in u32
        if n > max_n || n > 92_681 {
            return Err(Error::Resource {
                n,
                required_bytes: Self::required_bytes(n),
                cap: max_n.min(92_681),
            });
        }
        let w = n + 1;
        let mut counts = vec![0u32; w * w];
        let mut pairs = vec![0u32; w * w];
        for x in 0..n {
            let v = perm.image(x);
            let (prev, next) = counts.split_at_mut((x + 1) * w);
            let prev = &prev[x * w..];
            for y in 0..w {
                next[y] = prev[y] + u32::from(v < y);
            }
        }
        for x in 0..w {
            let row = &counts[x * w..(x + 1) * w];
            let out = &mut pairs[x * w..(x + 1) * w];
            let mut acc = 0u32;
            for y in 0..w {
                out[y] = acc;
                acc += row[y];
            }
        }
        Ok(Self {
            perm: perm.clone(),
            n,
            counts,
            pairs,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    /// `#{s < x : σ(s) < y}`.
    #[inline]
    pub fn count(&self, x: usize, y: usize) -> u32 {
        self.counts[x * (self.n + 1) + y]
    }

    #[inline]
    fn pairs_at(&self, x: usize, y: usize) -> u64 {
        u64::from(self.pairs[x * (self.n + 1) + y])
    }

    /// `|{s ∈ I : σ(s) ∈ J}|`.
    #[inline]
    pub fn rect(&self, i: Interval, j: Interval) -> u64 {
        let c = |x, y| u64::from(self.count(x, y));
        c(i.hi, j.hi) + c(i.lo, j.lo) - c(i.lo, j.hi) - c(i.hi, j.lo)
    }

    /// `p(S, T) = |{(s,t) ∈ S × T : σ(s) < t}|` for intervals.
    #[inline]
    pub fn pair_count(&self, s: Interval, t: Interval) -> u64 {
        self.pairs_at(s.hi, t.hi) + self.pairs_at(s.lo, t.lo)
            - self.pairs_at(s.lo, t.hi)
            - self.pairs_at(s.hi, t.lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::{generate, GeneratorKind};

    #[test]
    fn two_point_tables() {
        let id = DominanceTable::new(&Permutation::identity(2)).unwrap();
        assert_eq!(id.count(2, 2), 2);
        assert_eq!(id.count(1, 1), 1);
        assert_eq!(id.count(1, 2), 1);
        assert_eq!(id.count(2, 1), 1);
        let rev = DominanceTable::new(&Permutation::reverse(2)).unwrap();
        assert_eq!(rev.count(1, 1), 0);
    }

    #[test]
    fn matches_brute_force() {
        for seed in 0..100u64 {
            let n = 1 + (seed as usize * 7) % 64;
            let p = generate(GeneratorKind::Random, n, seed).unwrap();
            let t = DominanceTable::new(&p).unwrap();
            assert_eq!(t.count(n, n) as usize, n);
            for x in 0..=n {
                for y in 0..=n {
                    let brute = (0..x).filter(|&s| p.image(s) < y).count();
                    assert_eq!(t.count(x, y) as usize, brute);
                }
            }
            for x in 0..n {
                for y in 0..=n {
                    let d = t.count(x + 1, y) - t.count(x, y);
                    assert!(d <= 1);
                }
            }
        }
    }

    #[test]
    fn pair_count_against_loops() {
        let p = generate(GeneratorKind::Random, 20, 3).unwrap();
        let t = DominanceTable::new(&p).unwrap();
        for (a, b, c, d) in [(0, 20, 0, 20), (3, 9, 5, 17), (4, 4, 0, 5), (0, 1, 0, 20)] {
            let s = Interval::new(a, b);
            let tt = Interval::new(c, d);
            let brute = s
                .iter()
                .flat_map(|x| tt.iter().map(move |y| (x, y)))
                .filter(|&(x, y)| p.image(x) < y)
                .count() as u64;
            assert_eq!(t.pair_count(s, tt), brute);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let p = Permutation::identity(10);
        match DominanceTable::with_cap(&p, 8) {
            Err(Error::Resource { required_bytes, .. }) => {
                assert_eq!(required_bytes, DominanceTable::required_bytes(10))
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
