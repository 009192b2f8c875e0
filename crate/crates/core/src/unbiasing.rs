//! Recursive unbiasing classifiers for leaf colorings and Monte Carlo
//! estimates of the probability that a typical coloring fails them.

use serde::Serialize;

use crate::broadcast::LeafSampler;
use crate::error::{Error, Result};
use crate::exact::float_root_marginal;
use crate::rng::{par_blocks, RandomSource};
use crate::stats::{Summary, TailEstimate};
use crate::tree::{check_colors, ColorSet, LeafColoring, TreeShape, STAR};

/// Relative slack for comparing integer counts with real thresholds, so that
/// an exact tie rounded down by `powf` still counts as meeting the bound.
const TIE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnbiasingParams {
    epsilon: f64,
}

impl UnbiasingParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0 / 3.0) {
            return Err(Error::Validation(format!("epsilon {epsilon} is outside (0, 1/3]")));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `Δ^{ε/2}`: the number of unused colors a depth-1 block needs.
    pub fn base_threshold(&self, branching: usize) -> f64 {
        (branching as f64).powf(self.epsilon / 2.0)
    }

    /// `Δ^{1−ε}`: how many non-unbiasing children a vertex may have.
    pub fn step_threshold(&self, branching: usize) -> f64 {
        (branching as f64).powf(1.0 - self.epsilon)
    }
}

/// `ε = min{C − 1, 1/3}` where `k = C·Δ/ln Δ`.
pub fn epsilon_from(k: usize, branching: usize) -> Result<UnbiasingParams> {
    let c = k as f64 * (branching as f64).ln() / branching as f64;
    if c <= 1.0 {
        return Err(Error::Regime(format!(
            "k = {k}, Δ = {branching} gives C = {c:.4} ≤ 1; pass epsilon explicitly"
        )));
    }
    UnbiasingParams::new((c - 1.0).min(1.0 / 3.0))
}

/// Number of colors in `1..=k` that do not appear in `block`.
pub fn count_unused_colors(block: &[u8], k: usize) -> usize {
    let mut seen = ColorSet::default();
    for &x in block {
        if x != STAR {
            seen.insert(x);
        }
    }
    k - seen.len()
}

fn at_least(count: usize, threshold: f64) -> bool {
    count as f64 >= threshold * (1.0 - TIE_SLACK)
}

fn at_most(count: usize, threshold: f64) -> bool {
    count as f64 <= threshold * (1.0 + TIE_SLACK)
}

/// Unbiasing status of every vertex with height `h ≥ 1`. Entry `h − 1` holds
/// the statuses of the height-`h` vertices, left to right.
pub fn unbiasing_levels(
    shape: &TreeShape,
    k: usize,
    params: &UnbiasingParams,
    x: &LeafColoring,
) -> Result<Vec<Vec<bool>>> {
    check_colors(k)?;
    x.check_shape(shape)?;
    if shape.depth() == 0 {
        return Err(Error::Domain("unbiasing is defined for depth ≥ 1".into()));
    }
    let b = shape.branching();
    Ok(levels_unchecked(b, shape.depth(), k, params, x.values()))
}

fn levels_unchecked(b: usize, depth: usize, k: usize, params: &UnbiasingParams, leaves: &[u8]) -> Vec<Vec<bool>> {
    let base = params.base_threshold(b);
    let step = params.step_threshold(b);
    let mut levels = Vec::with_capacity(depth);
    levels.push(
        leaves
            .chunks_exact(b)
            .map(|block| at_least(count_unused_colors(block, k), base))
            .collect::<Vec<bool>>(),
    );
    for _ in 1..depth {
        let below = levels.last().unwrap();
        let next = below
            .chunks_exact(b)
            .map(|kids| at_most(kids.iter().filter(|&&u| !u).count(), step))
            .collect();
        levels.push(next);
    }
    levels
}

fn highly_from_levels(levels: &[Vec<bool>], depth: usize, epsilon: f64) -> bool {
    let min_h = ((epsilon * depth as f64).ceil() as usize).max(1);
    levels[min_h - 1..].iter().all(|l| l.iter().all(|&u| u))
}

pub fn is_unbiasing(shape: &TreeShape, k: usize, params: &UnbiasingParams, x: &LeafColoring) -> Result<bool> {
    let levels = unbiasing_levels(shape, k, params, x)?;
    Ok(levels[shape.depth() - 1][0])
}

/// Every vertex `v` with `h(v) ≥ max(εℓ, 1)` is unbiasing.
pub fn is_highly_unbiasing(
    shape: &TreeShape,
    k: usize,
    params: &UnbiasingParams,
    x: &LeafColoring,
) -> Result<bool> {
    let levels = unbiasing_levels(shape, k, params, x)?;
    Ok(highly_from_levels(&levels, shape.depth(), params.epsilon))
}

/// Copy of `x` with the given leaf positions set to ⋆.
pub fn star_out(x: &LeafColoring, positions: &[usize]) -> Result<LeafColoring> {
    let mut values = x.values().to_vec();
    for &i in positions {
        let slot = values
            .get_mut(i)
            .ok_or_else(|| Error::Index(format!("leaf {i} out of range")))?;
        *slot = STAR;
    }
    LeafColoring::new(x.k(), values)
}

/// Monte Carlo estimate of `q_ℓ = Pr_{X∼μ_ℓ}[X is not unbiasing]`, or of
/// the probability of not being highly unbiasing when `highly` is set.
pub fn estimate_q(
    shape: &TreeShape,
    k: usize,
    params: &UnbiasingParams,
    samples: u64,
    highly: bool,
    rng: &mut RandomSource,
) -> Result<TailEstimate> {
    if shape.depth() == 0 {
        return Err(Error::Domain("unbiasing is defined for depth ≥ 1".into()));
    }
    if samples == 0 {
        return Err(Error::Validation("samples must be at least 1".into()));
    }
    let (b, d) = (shape.branching(), shape.depth());
    let blocks = par_blocks(rng, samples, |r, n| -> Result<u64> {
        let mut sampler = LeafSampler::new(shape, k)?;
        let mut fails = 0;
        for _ in 0..n {
            let leaves = sampler.sample(r, None)?;
            let levels = levels_unchecked(b, d, k, params, leaves);
            let ok = if highly {
                highly_from_levels(&levels, d, params.epsilon)
            } else {
                levels[d - 1][0]
            };
            fails += u64::from(!ok);
        }
        Ok(fails)
    });
    let mut fails = 0;
    for f in blocks {
        fails += f?;
    }
    TailEstimate::from_counts(fails, samples)
}

/// How large the root marginal gets on unbiasing colorings, next to the
/// reference scale `Δ^{−ε/2}`. Reported for inspection only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PmaxReport {
    pub samples: u64,
    pub unbiasing: u64,
    pub mean_pmax: f64,
    pub max_pmax: f64,
    pub reference: f64,
}

pub fn unbiasing_pmax_report(
    shape: &TreeShape,
    k: usize,
    params: &UnbiasingParams,
    samples: u64,
    rng: &mut RandomSource,
) -> Result<PmaxReport> {
    if shape.depth() == 0 {
        return Err(Error::Domain("unbiasing is defined for depth ≥ 1".into()));
    }
    let (b, d) = (shape.branching(), shape.depth());
    let blocks = par_blocks(rng, samples, |r, n| -> Result<(Summary, f64)> {
        let mut sampler = LeafSampler::new(shape, k)?;
        let mut p = vec![0.0; k];
        let mut s = Summary::new();
        let mut max = 0.0f64;
        for _ in 0..n {
            let leaves = sampler.sample(r, None)?;
            if !levels_unchecked(b, d, k, params, leaves)[d - 1][0] {
                continue;
            }
            float_root_marginal(shape, k, leaves, None, &mut p);
            let pm = p.iter().copied().fold(0.0, f64::max);
            s.push(pm);
            max = max.max(pm);
        }
        Ok((s, max))
    });
    let mut all = Summary::new();
    let mut max = 0.0f64;
    for blk in blocks {
        let (s, m) = blk?;
        all.merge(&s);
        max = max.max(m);
    }
    Ok(PmaxReport {
        samples,
        unbiasing: all.n(),
        mean_pmax: all.mean(),
        max_pmax: max,
        reference: (b as f64).powf(-params.epsilon / 2.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lc(k: usize, v: &[u8]) -> LeafColoring {
        LeafColoring::new(k, v.to_vec()).unwrap()
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_from(10, 20).unwrap().epsilon(), 1.0 / 3.0);
        let e = epsilon_from(7, 20).unwrap().epsilon();
        assert!((e - (7.0 * 20f64.ln() / 20.0 - 1.0)).abs() < 1e-15);
        assert!((e - 0.0485).abs() < 1e-3);
        assert!(matches!(epsilon_from(6, 20), Err(Error::Regime(_))));
        assert!(UnbiasingParams::new(0.0).is_err());
        assert!(UnbiasingParams::new(0.34).is_err());
    }

    #[test]
    fn unused_colors() {
        assert_eq!(count_unused_colors(&[1, 1, 1, 1], 3), 2);
        assert_eq!(count_unused_colors(&[1, 2, 3, 1], 3), 0);
        assert_eq!(count_unused_colors(&[0, 0, 0, 0], 3), 3);
    }

    #[test]
    fn classifier_examples() {
        let p = UnbiasingParams::new(1.0 / 3.0).unwrap();
        let s = TreeShape::new(4, 1).unwrap();
        assert!(is_unbiasing(&s, 3, &p, &lc(3, &[1, 1, 1, 1])).unwrap());
        assert!(!is_unbiasing(&s, 3, &p, &lc(3, &[1, 2, 3, 1])).unwrap());
        let s = TreeShape::new(2, 2).unwrap();
        assert!(is_unbiasing(&s, 3, &p, &lc(3, &[1, 1, 2, 2])).unwrap());
        // one failing block out of two is still ≤ 2^{2/3}
        assert!(is_unbiasing(&s, 3, &p, &lc(3, &[1, 2, 2, 2])).unwrap());
        assert!(!is_highly_unbiasing(&s, 3, &p, &lc(3, &[1, 2, 2, 2])).unwrap());
        let s0 = TreeShape::new(2, 0).unwrap();
        assert!(matches!(is_unbiasing(&s0, 3, &p, &lc(3, &[1])), Err(Error::Domain(_))));
    }

    #[test]
    fn highly_unbiasing_checks_every_height_at_least_one() {
        // ε = 1/3, ℓ = 3: heights 1, 2 and 3, i.e. 4 + 2 + 1 vertices.
        let p = UnbiasingParams::new(1.0 / 3.0).unwrap();
        let s = TreeShape::new(2, 3).unwrap();
        let x = lc(3, &[1, 2, 1, 1, 1, 1, 1, 1]);
        let levels = unbiasing_levels(&s, 3, &p, &x).unwrap();
        assert_eq!(levels.iter().map(Vec::len).sum::<usize>(), 7);
        assert!(is_unbiasing(&s, 3, &p, &x).unwrap());
        assert!(!is_highly_unbiasing(&s, 3, &p, &x).unwrap());
        // depth 1: highly unbiasing is unbiasing
        let s1 = TreeShape::new(2, 1).unwrap();
        for v in [[1, 1], [1, 2], [0, 2]] {
            let x = lc(3, &v);
            assert_eq!(
                is_highly_unbiasing(&s1, 3, &p, &x).unwrap(),
                is_unbiasing(&s1, 3, &p, &x).unwrap()
            );
        }
    }

    #[test]
    fn ties_meet_the_bound() {
        // Δ = 8, ε = 1/3: Δ^{1−ε} = 4 exactly, so four failing children pass.
        let p = UnbiasingParams::new(1.0 / 3.0).unwrap();
        assert!(at_most(4, p.step_threshold(8)));
        assert!(!at_most(5, p.step_threshold(8)));
        // Δ = 64: Δ^{ε/2} = 2 exactly.
        assert!(at_least(2, p.base_threshold(64)));
    }

    #[test]
    fn star_out_examples() {
        let x = lc(3, &[1, 2]);
        assert_eq!(star_out(&x, &[]).unwrap(), x);
        assert_eq!(star_out(&x, &[0]).unwrap(), lc(3, &[0, 2]));
        assert_eq!(star_out(&x, &[0, 1]).unwrap(), LeafColoring::stars(3, 2).unwrap());
        assert!(matches!(star_out(&x, &[2]), Err(Error::Index(_))));
    }

    #[test]
    fn estimate_q_all_unbiasing() {
        // k = 5, Δ = 2: at most two colors appear, so three are always unused.
        let p = UnbiasingParams::new(1.0 / 3.0).unwrap();
        let s = TreeShape::new(2, 2).unwrap();
        let mut rng = RandomSource::new(1);
        let q = estimate_q(&s, 5, &p, 1000, false, &mut rng).unwrap();
        assert_eq!(q.mean, 0.0);
        assert!((q.wilson95[1] - 3.8416 / 1003.8416).abs() < 1e-9);
    }
}
