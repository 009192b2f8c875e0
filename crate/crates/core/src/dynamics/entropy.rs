//! Entropy functionals under the uniform law on proper colorings.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::Serialize;

use super::matrix::{StateSpace, TransitionMatrix};
use crate::error::{Error, Result};
use crate::tree::TreeShape;

fn x_ln_x(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `Ent(f) = E[f ln f] − E[f] ln E[f]` with `E` uniform over the entries.
pub fn entropy_functional(f: &[f64]) -> Result<f64> {
    if f.is_empty() {
        return Err(Error::Validation("empty test function".into()));
    }
    if let Some(x) = f.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::Validation(format!("test function has entry {x}")));
    }
    Ok(uniform_entropy(f.iter().copied()))
}

fn uniform_entropy(f: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = f.clone().count() as f64;
    let mean = f.clone().sum::<f64>() / n;
    let e_flnf = f.map(x_ln_x).sum::<f64>() / n;
    (e_flnf - x_ln_x(mean)).max(0.0)
}

/// `E[Ent(f | σ outside B_v)]`: the entropy left after averaging over the
/// classes of states that agree outside the block.
fn conditional_entropy(space: &StateSpace, v: usize, f: &[f64]) -> f64 {
    let m = space.len() as f64;
    space
        .groups(v)
        .iter()
        .map(|g| g.len() as f64 / m * uniform_entropy(g.iter().map(|&x| f[x])))
        .sum()
}

/// `(P_v f)(x)`: the average of `f` over the class of `x` outside `B_v`.
fn block_average(space: &StateSpace, v: usize, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for g in space.groups(v) {
        let mean = g.iter().map(|&x| f[x]).sum::<f64>() / g.len() as f64;
        for &x in g {
            out[x] = mean;
        }
    }
    out
}

fn check_f(space: &StateSpace, f: &[f64]) -> Result<()> {
    if f.len() != space.len() {
        return Err(Error::Validation(format!(
            "test function has {} entries for {} states",
            f.len(),
            space.len()
        )));
    }
    entropy_functional(f).map(|_| ())
}

/// `E_ℓ(f) = Σ_v E[Ent(f | σ outside B_v)]`.
pub fn local_entropy_sum(f: &[f64], shape: &TreeShape, k: usize, block_depth: usize) -> Result<f64> {
    let space = StateSpace::new(shape, k, block_depth)?;
    check_f(&space, f)?;
    Ok(local_sum(&space, f))
}

fn local_sum(space: &StateSpace, f: &[f64]) -> f64 {
    (0..space.shape().vertex_count()).map(|v| conditional_entropy(space, v, f)).sum()
}

/// The two entropy relations of the block dynamics, evaluated for one `f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyCheck {
    pub ent_f: f64,
    pub ent_pf: f64,
    pub local_sum: f64,
    /// `max_v |Ent(f) − Ent(P_v f) − E[Ent(f | outside B_v)]|`.
    pub max_block_residual: f64,
    /// `Ent(f) − Ent(Pf) − E_ℓ(f)/N`, nonnegative by convexity.
    pub convexity_slack: f64,
}

pub fn entropy_checks(matrix: &TransitionMatrix, f: &[f64]) -> Result<EntropyCheck> {
    let space = matrix.space();
    check_f(space, f)?;
    let n = space.shape().vertex_count();
    let ent_f = uniform_entropy(f.iter().copied());
    let mut max_block_residual = 0.0f64;
    let mut local_sum = 0.0;
    for v in 0..n {
        let cond = conditional_entropy(space, v, f);
        let pv = block_average(space, v, f);
        let residual = ent_f - uniform_entropy(pv.iter().copied()) - cond;
        max_block_residual = max_block_residual.max(residual.abs());
        local_sum += cond;
    }
    let ent_pf = uniform_entropy(matrix.apply(f).into_iter());
    Ok(EntropyCheck {
        ent_f,
        ent_pf,
        local_sum,
        max_block_residual,
        convexity_slack: ent_f - ent_pf - local_sum / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyRatioReport {
    pub trials: usize,
    pub states: usize,
    pub vertices: usize,
    /// `min_f E_ℓ(f)/Ent(f)` over the sampled test functions.
    pub min_ratio: f64,
    pub mean_ratio: f64,
}

/// Samples `trials` test functions with i.i.d. log-normal entries and
/// reports the smallest `E_ℓ(f)/Ent(f)`.
pub fn entropy_ratio_report<R: Rng + ?Sized>(
    shape: &TreeShape,
    k: usize,
    block_depth: usize,
    trials: usize,
    rng: &mut R,
) -> Result<EntropyRatioReport> {
    let space = StateSpace::new(shape, k, block_depth)?;
    let law = LogNormal::new(0.0, 1.0).expect("valid parameters");
    let mut min_ratio = f64::INFINITY;
    let mut total = 0.0;
    let mut used = 0;
    for _ in 0..trials {
        let f: Vec<f64> = (0..space.len()).map(|_| law.sample(rng)).collect();
        let ent = uniform_entropy(f.iter().copied());
        if ent <= 0.0 {
            continue;
        }
        let r = local_sum(&space, &f) / ent;
        min_ratio = min_ratio.min(r);
        total += r;
        used += 1;
    }
    Ok(EntropyRatioReport {
        trials: used,
        states: space.len(),
        vertices: shape.vertex_count(),
        min_ratio,
        mean_ratio: total / used.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::build_transition_matrix;
    use crate::rng::RandomSource;

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_functional(&[2.0; 5]).unwrap(), 0.0);
        let m = 7usize;
        let mut f = vec![0.0; m];
        f[3] = 1.0;
        let e = entropy_functional(&f).unwrap();
        assert!((e - (m as f64).ln() / m as f64).abs() < 1e-15);
        let f = [0.5, 1.5, 3.0, 0.1];
        let g: Vec<f64> = f.iter().map(|x| 4.0 * x).collect();
        assert!((entropy_functional(&g).unwrap() - 4.0 * entropy_functional(&f).unwrap()).abs() < 1e-12);
        assert!(entropy_functional(&[1.0, -1.0]).is_err());
        assert!(entropy_functional(&[]).is_err());
    }

    #[test]
    fn whole_tree_block_erases_all_entropy() {
        let s = TreeShape::new(2, 1).unwrap();
        let space = StateSpace::new(&s, 3, 1).unwrap();
        let law = LogNormal::new(0.0, 1.0).unwrap();
        let mut rng = RandomSource::new(2);
        let f: Vec<f64> = (0..12).map(|_| law.sample(&mut rng)).collect();
        let ent = entropy_functional(&f).unwrap();
        // The root's block is the whole tree: conditioning on nothing.
        assert!((conditional_entropy(&space, 0, &f) - ent).abs() < 1e-12);
        // Leaf blocks add more, so the ratio is at least one.
        let r = entropy_ratio_report(&s, 3, 1, 20, &mut rng).unwrap();
        assert!(r.min_ratio >= 1.0 - 1e-12 && r.min_ratio < 3.0);
        assert_eq!(local_entropy_sum(&[1.0; 12], &s, 3, 1).unwrap(), 0.0);
    }

    #[test]
    fn identities_on_glauber() {
        let s = TreeShape::new(2, 1).unwrap();
        let p = build_transition_matrix(&s, 4, 0).unwrap();
        let law = LogNormal::new(0.0, 1.0).unwrap();
        let mut rng = RandomSource::new(3);
        for _ in 0..50 {
            let f: Vec<f64> = (0..36).map(|_| law.sample(&mut rng)).collect();
            let c = entropy_checks(&p, &f).unwrap();
            assert!(c.max_block_residual < 1e-10);
            assert!(c.convexity_slack >= -1e-10);
        }
    }
}
