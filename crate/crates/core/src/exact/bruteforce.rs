use num_bigint::BigUint;

use super::ColorDistribution;
use crate::error::{Error, Result};
use crate::tree::{check_colors, LeafColoring, TreeShape, STAR};

/// Largest number of candidate assignments the enumerator will visit.
pub const BRUTEFORCE_LIMIT: f64 = 1e8;

/// `Ω_ℓ(X, c)` by explicit enumeration of every proper coloring consistent
/// with `x`. Vertices are assigned in level order; colored leaves are pinned
/// to their value. Used as an oracle, so it refuses instances whose search
/// space `k^(internal vertices + ⋆ leaves)` exceeds [`BRUTEFORCE_LIMIT`].
pub fn root_counts_bruteforce(shape: &TreeShape, k: usize, x: &LeafColoring) -> Result<Vec<u64>> {
    check_colors(k)?;
    x.check_shape(shape)?;
    let stars = x.values().iter().filter(|&&v| v == STAR).count();
    let free = shape.internal_count() + stars;
    let space = (k as f64).powi(free as i32);
    if space > BRUTEFORCE_LIMIT {
        return Err(Error::Capacity(format!(
            "enumeration would visit {space:.3e} assignments (limit {BRUTEFORCE_LIMIT:e})"
        )));
    }
    let mut search = Search {
        branching: shape.branching(),
        internal: shape.internal_count(),
        k: k as u8,
        leaves: x.values(),
        colors: vec![0; shape.vertex_count()],
        counts: vec![0; k],
    };
    search.assign(0);
    Ok(search.counts)
}

/// Normalized root counts from [`root_counts_bruteforce`], as exact rationals.
pub fn root_marginal_bruteforce(shape: &TreeShape, k: usize, x: &LeafColoring) -> Result<ColorDistribution> {
    let counts: Vec<BigUint> = root_counts_bruteforce(shape, k, x)?
        .into_iter()
        .map(BigUint::from)
        .collect();
    ColorDistribution::from_counts(&counts)
}

struct Search<'a> {
    branching: usize,
    internal: usize,
    k: u8,
    leaves: &'a [u8],
    colors: Vec<u8>,
    counts: Vec<u64>,
}

impl Search<'_> {
    fn assign(&mut self, v: usize) {
        if v == self.colors.len() {
            self.counts[self.colors[0] as usize - 1] += 1;
            return;
        }
        let parent = if v == 0 { 0 } else { self.colors[(v - 1) / self.branching] };
        let pinned = if v >= self.internal { self.leaves[v - self.internal] } else { STAR };
        for c in 1..=self.k {
            if c == parent || (pinned != STAR && c != pinned) {
                continue;
            }
            self.colors[v] = c;
            self.assign(v + 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ratio;

    #[test]
    fn examples() {
        let s = TreeShape::new(2, 1).unwrap();
        let d = root_marginal_bruteforce(&s, 3, &LeafColoring::new(3, vec![1, 1]).unwrap()).unwrap();
        assert_eq!(d, ColorDistribution::Rational(vec![ratio(0, 1), ratio(1, 2), ratio(1, 2)]));
        let d = root_marginal_bruteforce(&s, 3, &LeafColoring::stars(3, 2).unwrap()).unwrap();
        assert_eq!(d, ColorDistribution::Rational(vec![ratio(1, 3); 3]));
        let s = TreeShape::new(2, 2).unwrap();
        let d = root_marginal_bruteforce(&s, 3, &LeafColoring::new(3, vec![1, 2, 1, 2]).unwrap()).unwrap();
        assert_eq!(d, ColorDistribution::Rational(vec![ratio(1, 2), ratio(1, 2), ratio(0, 1)]));
    }

    #[test]
    fn counts_all_colorings_of_free_tree() {
        let s = TreeShape::new(2, 1).unwrap();
        let c = root_counts_bruteforce(&s, 3, &LeafColoring::stars(3, 2).unwrap()).unwrap();
        assert_eq!(c, vec![4, 4, 4]);
    }

    #[test]
    fn guard_is_a_hard_error() {
        let s = TreeShape::new(3, 2).unwrap();
        let all = LeafColoring::stars(5, 9).unwrap();
        assert!(matches!(root_counts_bruteforce(&s, 5, &all), Err(Error::Capacity(_))));
    }

    #[test]
    fn infeasible_boundary() {
        let s = TreeShape::new(3, 1).unwrap();
        let x = LeafColoring::new(3, vec![1, 2, 3]).unwrap();
        assert!(matches!(root_marginal_bruteforce(&s, 3, &x), Err(Error::InfeasibleBoundary(_))));
    }
}
