//! Exact root bias by enumeration of all full leaf colorings.
//!
//! For `X ~ μ_ℓ` let `g_c(X) = k · P_ℓ(X, c)`. Then
//! `α_c = E|P_ℓ(X, c) − 1/k|` is the average bias of the root given the
//! leaves, and `β_c = |μ↓↑_c(c) − 1/k|` is the bias after going down from a
//! root of color `c` to the leaves and back up.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::{ratio, root_marginal, subtree_counts, total_colorings, Backend};
use crate::error::{Error, Result};
use crate::tree::{check_color, check_colors, LeafColoring, TreeShape};

/// Largest number of leaf colorings the exact enumerations will visit.
pub const ENUMERATION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    /// `α_c` for colors `1..=k` (index `c − 1`).
    pub alpha: Vec<BigRational>,
    /// `β_c` for colors `1..=k`.
    pub beta: Vec<BigRational>,
    /// `down_up[c−1][c'−1] = μ↓↑_c(c')`.
    pub down_up: Vec<Vec<BigRational>>,
    pub exact: bool,
}

impl BiasReport {
    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    /// Checks `β_c/(k−1) ≤ α_c ≤ √β_c` for every color, exactly
    /// (the upper bound is compared as `α_c² ≤ β_c`).
    pub fn satisfies_sandwich(&self) -> bool {
        let km1 = ratio(self.k() as i64 - 1, 1);
        self.alpha
            .iter()
            .zip(&self.beta)
            .all(|(a, b)| b / &km1 <= *a && a * a <= *b)
    }

    /// Exact total variation between `μ↓↑_{c1}` and `μ↓↑_{c2}`.
    pub fn down_up_tv(&self, c1: usize, c2: usize) -> BigRational {
        let (r1, r2) = (&self.down_up[c1 - 1], &self.down_up[c2 - 1]);
        let sum: BigRational = r1.iter().zip(r2).map(|(p, q)| (p - q).abs()).sum();
        sum / ratio(2, 1)
    }
}

fn for_each_full_coloring(
    shape: &TreeShape,
    k: usize,
    mut f: impl FnMut(&[u8]) -> Result<()>,
) -> Result<()> {
    let n = shape.leaf_count();
    let space = (k as f64).powi(n as i32);
    if space > ENUMERATION_LIMIT {
        return Err(Error::Capacity(format!(
            "{space:.3e} leaf colorings exceed the enumeration limit {ENUMERATION_LIMIT:e}"
        )));
    }
    let mut values = vec![1u8; n];
    loop {
        f(&values)?;
        let Some(i) = values.iter().position(|&v| (v as usize) < k) else {
            return Ok(());
        };
        values[i] += 1;
        values[..i].iter_mut().for_each(|v| *v = 1);
    }
}

/// Exact law of the leaf coloring: `μ_ℓ(X)` when `root` is `None`, the
/// root-conditioned `μ↓_{c,ℓ}(X)` otherwise. Colorings with zero weight are
/// omitted.
pub fn leaf_law(shape: &TreeShape, k: usize, root: Option<usize>) -> Result<Vec<(LeafColoring, BigRational)>> {
    check_colors(k)?;
    if let Some(c) = root {
        check_color(k, c)?;
    }
    let total = BigInt::from(match root {
        None => total_colorings(shape, k),
        Some(_) => total_colorings(shape, k) / BigUint::from(k),
    });
    let mut law = Vec::new();
    for_each_full_coloring(shape, k, |values| {
        let omega = subtree_counts(shape.branching(), shape.depth(), k, values);
        let weight = match root {
            None => omega.into_iter().sum::<BigUint>(),
            Some(c) => omega[c - 1].clone(),
        };
        if !weight.is_zero() {
            law.push((
                LeafColoring::new(k, values.to_vec())?,
                BigRational::new(BigInt::from(weight), total.clone()),
            ));
        }
        Ok(())
    })?;
    Ok(law)
}

/// Computes `α_{c,ℓ}`, `β_{c,ℓ}` and the full down-up kernel exactly.
pub fn exact_bias(shape: &TreeShape, k: usize) -> Result<BiasReport> {
    check_colors(k)?;
    let uniform = ratio(1, k as i64);
    let mut alpha_num = vec![BigRational::zero(); k];
    // Σ_X Ω(X, c) · P(X, c')
    let mut down_up_num = vec![vec![BigRational::zero(); k]; k];
    // Σ_X Ω(X, c)
    let mut column = vec![BigUint::zero(); k];

    for_each_full_coloring(shape, k, |values| {
        let omega = subtree_counts(shape.branching(), shape.depth(), k, values);
        let weight: BigUint = omega.iter().sum();
        if weight.is_zero() {
            return Ok(());
        }
        let x = LeafColoring::new(k, values.to_vec())?;
        let p = root_marginal(shape, k, &x, None, Backend::Rational)?;
        let p = p.as_rational().expect("rational backend");
        let weight = BigRational::from(BigInt::from(weight));
        for c in 0..k {
            alpha_num[c] += &weight * (&p[c] - &uniform).abs();
            let om = BigRational::from(BigInt::from(omega[c].clone()));
            for c2 in 0..k {
                down_up_num[c][c2] += &om * &p[c2];
            }
            column[c] += &omega[c];
        }
        Ok(())
    })?;

    let total = BigRational::from(BigInt::from(total_colorings(shape, k)));
    let alpha = alpha_num.into_iter().map(|a| a / &total).collect();
    let down_up: Vec<Vec<BigRational>> = down_up_num
        .into_iter()
        .zip(column)
        .map(|(row, col)| {
            let col = BigRational::from(BigInt::from(col));
            row.into_iter().map(|v| v / &col).collect()
        })
        .collect();
    let beta = (0..k).map(|c| (&down_up[c][c] - &uniform).abs()).collect();
    Ok(BiasReport {
        alpha,
        beta,
        down_up,
        exact: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_zero_closed_form() {
        let s = TreeShape::new(2, 0).unwrap();
        let r = exact_bias(&s, 3).unwrap();
        for c in 0..3 {
            assert_eq!(r.alpha[c], ratio(4, 9));
            assert_eq!(r.beta[c], ratio(2, 3));
        }
        for k in 3..7i64 {
            let r = exact_bias(&s, k as usize).unwrap();
            assert_eq!(r.alpha[0], ratio(2 * (k - 1), k * k));
        }
        assert!(r.satisfies_sandwich());
    }

    #[test]
    fn down_up_rows_are_distributions() {
        let s = TreeShape::new(2, 2).unwrap();
        let r = exact_bias(&s, 3).unwrap();
        for row in &r.down_up {
            assert_eq!(row.iter().sum::<BigRational>(), ratio(1, 1));
        }
        let km1 = ratio(2, 3);
        assert!(r.alpha.iter().chain(&r.beta).all(|v| *v >= ratio(0, 1) && *v <= km1));
        assert!(r.satisfies_sandwich());
        assert_eq!(r.down_up_tv(1, 1), ratio(0, 1));
    }

    #[test]
    fn leaf_laws_sum_to_one() {
        let s = TreeShape::new(2, 2).unwrap();
        for root in [None, Some(1), Some(3)] {
            let law = leaf_law(&s, 3, root).unwrap();
            assert_eq!(law.iter().map(|(_, p)| p).sum::<BigRational>(), ratio(1, 1));
        }
        // Given the root, the two leaves of a depth-1 tree are independent
        // and uniform on the other colors.
        let s = TreeShape::new(2, 1).unwrap();
        let law = leaf_law(&s, 3, Some(1)).unwrap();
        let p = law.iter().find(|(x, _)| x.values() == [2, 3]).unwrap();
        assert_eq!(p.1, ratio(1, 4));
    }

    #[test]
    fn guard() {
        let s = TreeShape::new(3, 3).unwrap();
        assert!(matches!(exact_bias(&s, 3), Err(Error::Capacity(_))));
    }
}
