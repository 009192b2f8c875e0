//! Exact conditional marginals and extension counts.
//!
//! The root marginal `P_ℓ(X, ·)` is evaluated by the bottom-up recursion
//! `P_h(X, c) ∝ Π_i (1 − P_{h−1}(X_i, c))` in one of two backends: exact
//! rationals (zero tolerance, small trees) or log-domain `f64` (deep trees).
//! [`root_marginal_bruteforce`] enumerates colorings directly and serves as
//! the independent oracle for the recursion.

mod bias;
mod bruteforce;
pub(crate) mod fold;
mod vertex;

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{check_color, check_colors, is_allowed, LeafColoring, TreeShape};

pub use bias::{exact_bias, leaf_law, BiasReport, ENUMERATION_LIMIT};
pub use bruteforce::{root_counts_bruteforce, root_marginal_bruteforce, BRUTEFORCE_LIMIT};
pub use vertex::vertex_conditional_marginal;

use fold::{root_acc, root_acc_split, Counting, FloatMarginal, RationalMarginal};

/// Numeric backend for marginal computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Rational,
    #[default]
    Float,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Rational => "rational",
            Backend::Float => "float",
        })
    }
}

/// A probability vector over the colors `1..=k` (index `c − 1` is color `c`).
#[derive(Debug, Clone, PartialEq)]
pub enum ColorDistribution {
    Rational(Vec<BigRational>),
    Float(Vec<f64>),
}

/// A single probability in either backend.
#[derive(Debug, Clone, PartialEq)]
pub enum Probability {
    Exact(BigRational),
    Approx(f64),
}

impl Probability {
    pub fn to_f64(&self) -> f64 {
        match self {
            Probability::Exact(r) => ratio_to_f64(r),
            Probability::Approx(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            Probability::Exact(r) => Some(r),
            Probability::Approx(_) => None,
        }
    }
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl ColorDistribution {
    /// Uniform distribution over `k` colors.
    pub fn uniform(k: usize, backend: Backend) -> Self {
        match backend {
            Backend::Rational => ColorDistribution::Rational(vec![ratio(1, k as i64); k]),
            Backend::Float => ColorDistribution::Float(vec![1.0 / k as f64; k]),
        }
    }

    /// Normalizes nonnegative integer weights exactly.
    pub fn from_counts(counts: &[BigUint]) -> Result<Self> {
        let total: BigUint = counts.iter().sum();
        if total.is_zero() {
            return Err(Error::InfeasibleBoundary("all colors have zero weight".into()));
        }
        let total = BigInt::from(total);
        Ok(ColorDistribution::Rational(
            counts
                .iter()
                .map(|c| BigRational::new(BigInt::from(c.clone()), total.clone()))
                .collect(),
        ))
    }

    pub fn k(&self) -> usize {
        match self {
            ColorDistribution::Rational(w) => w.len(),
            ColorDistribution::Float(w) => w.len(),
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            ColorDistribution::Rational(_) => Backend::Rational,
            ColorDistribution::Float(_) => Backend::Float,
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            ColorDistribution::Rational(w) => w.iter().map(ratio_to_f64).collect(),
            ColorDistribution::Float(w) => w.clone(),
        }
    }

    pub fn as_rational(&self) -> Option<&[BigRational]> {
        match self {
            ColorDistribution::Rational(w) => Some(w),
            ColorDistribution::Float(_) => None,
        }
    }

    /// Weight of color `c` (1-based).
    pub fn get(&self, c: usize) -> Probability {
        match self {
            ColorDistribution::Rational(w) => Probability::Exact(w[c - 1].clone()),
            ColorDistribution::Float(w) => Probability::Approx(w[c - 1]),
        }
    }

    /// Weights rendered as text: `"p/q"` strings for rationals, numbers for floats.
    pub fn to_json_weights(&self) -> serde_json::Value {
        match self {
            ColorDistribution::Rational(w) => w.iter().map(|r| r.to_string()).collect(),
            ColorDistribution::Float(w) => w.iter().copied().collect(),
        }
    }
}

/// Largest weight, `p^max`.
pub fn p_max(dist: &ColorDistribution) -> Probability {
    match dist {
        ColorDistribution::Rational(w) => {
            Probability::Exact(w.iter().max().cloned().unwrap_or_else(BigRational::zero))
        }
        ColorDistribution::Float(w) => Probability::Approx(w.iter().copied().fold(0.0, f64::max)),
    }
}

/// Total variation distance between two distributions over the same colors.
/// Exact when both are rational.
pub fn total_variation(a: &ColorDistribution, b: &ColorDistribution) -> Probability {
    match (a, b) {
        (ColorDistribution::Rational(x), ColorDistribution::Rational(y)) => {
            let sum: BigRational = x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum();
            Probability::Exact(sum / ratio(2, 1))
        }
        _ => {
            let (x, y) = (a.to_f64(), b.to_f64());
            Probability::Approx(0.5 * x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum::<f64>())
        }
    }
}

fn check_input(shape: &TreeShape, k: usize, x: &LeafColoring) -> Result<()> {
    check_colors(k)?;
    x.check_shape(shape)?;
    if x.k() != k {
        return Err(Error::Validation(format!("coloring uses k={}, expected k={k}", x.k())));
    }
    Ok(())
}

/// `P_ℓ(X, ·)`, the law of the root color given the leaf coloring `x`.
///
/// With `forbidden_root = Some(c)` the root is additionally conditioned to
/// avoid `c`, as when the root hangs below a parent of color `c`.
pub fn root_marginal(
    shape: &TreeShape,
    k: usize,
    x: &LeafColoring,
    forbidden_root: Option<usize>,
    backend: Backend,
) -> Result<ColorDistribution> {
    check_input(shape, k, x)?;
    if let Some(c) = forbidden_root {
        check_color(k, c)?;
    }
    if !is_allowed(shape, k, x)? {
        return Err(Error::InfeasibleBoundary(format!("leaf coloring {x} has no proper extension")));
    }
    let infeasible = || {
        Error::InfeasibleBoundary(format!(
            "no extension of {x} avoids color {} at the root",
            forbidden_root.unwrap_or(0)
        ))
    };
    let (b, d, leaves) = (shape.branching(), shape.depth(), x.values());
    match backend {
        Backend::Rational => {
            let r = RationalMarginal { k };
            let mut acc = root_acc(&r, b, d, leaves).expect("allowedness was checked");
            if let Some(c) = forbidden_root {
                acc[c - 1] = BigRational::zero();
            }
            let total: BigRational = acc.iter().sum();
            if total.is_zero() {
                return Err(infeasible());
            }
            Ok(ColorDistribution::Rational(acc.into_iter().map(|a| a / &total).collect()))
        }
        Backend::Float => {
            let mut out = vec![0.0; k];
            if float_root_marginal(shape, k, leaves, forbidden_root, &mut out) {
                Ok(ColorDistribution::Float(out))
            } else {
                Err(infeasible())
            }
        }
    }
}

/// Float-backend root marginal on a raw leaf slice, without validation.
/// Writes the distribution into `out` and returns `false` on zero mass.
/// This is the hot path used by the Monte Carlo estimators.
pub fn float_root_marginal(
    shape: &TreeShape,
    k: usize,
    leaves: &[u8],
    forbidden_root: Option<usize>,
    out: &mut [f64],
) -> bool {
    const PARALLEL_LEAVES: usize = 1 << 16;
    let r = FloatMarginal::new(k);
    let (b, d) = (shape.branching(), shape.depth());
    let acc = if leaves.len() >= PARALLEL_LEAVES {
        root_acc_split(&r, b, d, leaves)
    } else {
        root_acc(&r, b, d, leaves)
    };
    let Some(mut acc) = acc else {
        return false;
    };
    if let Some(c) = forbidden_root {
        acc[c - 1] = f64::NEG_INFINITY;
    }
    let Some(total) = FloatMarginal::normalize(&acc, out) else {
        return false;
    };
    out.iter_mut().for_each(|w| *w /= total);
    true
}

/// `Ω_ℓ(X, c)` for every root color `c`: the number of proper colorings
/// consistent with `x` that give the root color `c`.
pub fn root_counts(shape: &TreeShape, k: usize, x: &LeafColoring) -> Result<Vec<BigUint>> {
    check_input(shape, k, x)?;
    Ok(subtree_counts(shape.branching(), shape.depth(), k, x.values()))
}

pub(crate) fn subtree_counts(branching: usize, depth: usize, k: usize, leaves: &[u8]) -> Vec<BigUint> {
    root_acc(&Counting { k }, branching, depth, leaves).expect("counting never reports zero mass")
}

/// Number of proper colorings of the whole tree consistent with `x`.
pub fn count_extensions(shape: &TreeShape, k: usize, x: &LeafColoring) -> Result<BigUint> {
    Ok(root_counts(shape, k, x)?.into_iter().sum())
}

/// Exact total variation between `P_ℓ(X, ·)` and `P_ℓ(Y, ·)`.
pub fn tv_root(
    shape: &TreeShape,
    k: usize,
    x: &LeafColoring,
    y: &LeafColoring,
    backend: Backend,
) -> Result<Probability> {
    let px = root_marginal(shape, k, x, None, backend)?;
    let py = root_marginal(shape, k, y, None, backend)?;
    Ok(total_variation(&px, &py))
}

/// Total number of proper colorings of the tree, `k (k−1)^{N−1}`.
pub fn total_colorings(shape: &TreeShape, k: usize) -> BigUint {
    BigUint::from(k) * BigUint::from(k - 1).pow(shape.vertex_count() as u32 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(b: usize, d: usize) -> TreeShape {
        TreeShape::new(b, d).unwrap()
    }

    fn leaves(k: usize, v: &[u8]) -> LeafColoring {
        LeafColoring::new(k, v.to_vec()).unwrap()
    }

    fn rational(v: &[(i64, i64)]) -> ColorDistribution {
        ColorDistribution::Rational(v.iter().map(|&(n, d)| ratio(n, d)).collect())
    }

    #[test]
    fn forced_root() {
        let d = root_marginal(&shape(2, 1), 3, &leaves(3, &[1, 2]), None, Backend::Rational).unwrap();
        assert_eq!(d, rational(&[(0, 1), (0, 1), (1, 1)]));
    }

    #[test]
    fn free_boundary_is_uniform() {
        for (b, dep, k) in [(2, 1, 3), (2, 3, 4), (3, 2, 5)] {
            let s = shape(b, dep);
            let x = LeafColoring::stars(k, s.leaf_count()).unwrap();
            let d = root_marginal(&s, k, &x, None, Backend::Rational).unwrap();
            assert_eq!(d, ColorDistribution::uniform(k, Backend::Rational));
            let f = root_marginal(&s, k, &x, None, Backend::Float).unwrap().to_f64();
            assert!(f.iter().all(|p| (p - 1.0 / k as f64).abs() < 1e-12));
        }
    }

    #[test]
    fn two_level_example() {
        // Frozen by enumeration of the 7-vertex tree: the root is 1 or 2 with
        // equal probability.
        let d = root_marginal(&shape(2, 2), 3, &leaves(3, &[1, 2, 1, 2]), None, Backend::Rational)
            .unwrap();
        assert_eq!(d, rational(&[(1, 2), (1, 2), (0, 1)]));
    }

    #[test]
    fn forbidden_root_conditions_away_one_color() {
        let s = shape(2, 1);
        let x = LeafColoring::stars(4, 2).unwrap();
        let d = root_marginal(&s, 4, &x, Some(1), Backend::Rational).unwrap();
        assert_eq!(d, rational(&[(0, 1), (1, 3), (1, 3), (1, 3)]));
        let forced = leaves(3, &[1, 2]);
        assert!(matches!(
            root_marginal(&s, 3, &forced, Some(3), Backend::Rational),
            Err(Error::InfeasibleBoundary(_))
        ));
        assert!(matches!(
            root_marginal(&s, 3, &forced, Some(3), Backend::Float),
            Err(Error::InfeasibleBoundary(_))
        ));
    }

    #[test]
    fn disallowed_boundary_is_rejected() {
        let err = root_marginal(&shape(3, 1), 3, &leaves(3, &[1, 2, 3]), None, Backend::Float);
        assert!(matches!(err, Err(Error::InfeasibleBoundary(_))));
    }

    #[test]
    fn depth_zero() {
        let s = shape(2, 0);
        let d = root_marginal(&s, 3, &leaves(3, &[2]), None, Backend::Rational).unwrap();
        assert_eq!(d, rational(&[(0, 1), (1, 1), (0, 1)]));
        let d = root_marginal(&s, 3, &leaves(3, &[0]), Some(2), Backend::Float).unwrap();
        assert_eq!(d.to_f64(), vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn extension_counts() {
        assert_eq!(count_extensions(&shape(2, 0), 3, &leaves(3, &[0])).unwrap(), 3u32.into());
        assert_eq!(count_extensions(&shape(2, 1), 3, &leaves(3, &[0, 0])).unwrap(), 12u32.into());
        assert_eq!(count_extensions(&shape(3, 1), 3, &leaves(3, &[1, 2, 3])).unwrap(), 0u32.into());
        let s = shape(3, 2);
        let all = LeafColoring::stars(4, 9).unwrap();
        assert_eq!(count_extensions(&s, 4, &all).unwrap(), total_colorings(&s, 4));
    }

    #[test]
    fn p_max_examples() {
        assert_eq!(p_max(&rational(&[(1, 3), (1, 3), (1, 3)])).exact().unwrap(), &ratio(1, 3));
        assert_eq!(p_max(&rational(&[(0, 1), (0, 1), (1, 1)])).exact().unwrap(), &ratio(1, 1));
        assert_eq!(p_max(&rational(&[(1, 2), (1, 2), (0, 1)])).exact().unwrap(), &ratio(1, 2));
    }

    #[test]
    fn tv_examples() {
        let s = shape(2, 1);
        let tv = |a: &[u8], b: &[u8]| {
            tv_root(&s, 3, &leaves(3, a), &leaves(3, b), Backend::Rational)
                .unwrap()
                .exact()
                .cloned()
                .unwrap()
        };
        assert_eq!(tv(&[1, 2], &[1, 2]), ratio(0, 1));
        assert_eq!(tv(&[1, 2], &[2, 1]), ratio(0, 1));
        assert_eq!(tv(&[1, 1], &[2, 2]), ratio(1, 2));
        let bad = tv_root(&shape(3, 1), 3, &leaves(3, &[1, 2, 3]), &leaves(3, &[1, 1, 1]), Backend::Rational);
        assert!(matches!(bad, Err(Error::InfeasibleBoundary(_))));
    }

    #[test]
    fn float_backend_agrees_with_rational_including_stars() {
        let s = shape(3, 2);
        let k = 4;
        let mut state = 12345u64;
        for _ in 0..300 {
            let v: Vec<u8> = (0..9)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 33) % (k as u64 + 1)) as u8
                })
                .collect();
            let x = leaves(k, &v);
            let Ok(exact) = root_marginal(&s, k, &x, None, Backend::Rational) else {
                continue;
            };
            let approx = root_marginal(&s, k, &x, None, Backend::Float).unwrap();
            for (p, q) in exact.to_f64().iter().zip(approx.to_f64()) {
                assert!((p - q).abs() < 1e-12, "{x}: {p} vs {q}");
            }
        }
    }

    #[test]
    fn float_backend_survives_deep_trees() {
        // Each root color collects ≥ 1100 factors of 1/2: every linear-domain
        // product underflows to zero.
        let b = 2200;
        let s = shape(b, 2);
        let x = LeafColoring::new(3, (0..b * b).map(|i| if (i / b) % 2 == 0 { 1 } else { 2 }).collect())
            .unwrap();
        let d = root_marginal(&s, 3, &x, None, Backend::Float).unwrap().to_f64();
        assert!((d[0] - 0.5).abs() < 1e-12 && (d[1] - 0.5).abs() < 1e-12);
        assert!(d[2] < 1e-300);
    }
}
