//! Downward coupling of two root-conditioned broadcasts, the disagreement
//! branching process, the one-neighbor channel formula, and Monte Carlo
//! estimators of root bias and its concentration.

use num_rational::BigRational;
use num_traits::{One, Signed};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::broadcast::{child_color, draw_color, RootMarginalSampler};
use crate::error::{Error, Result};
use crate::exact::{
    float_root_marginal, p_max, ratio_to_f64, root_marginal, tv_root, vertex_conditional_marginal, Backend,
    ColorDistribution, Probability,
};
use crate::rng::{par_blocks, RandomSource};
use crate::stats::{Estimate, Summary, TailEstimate};
use crate::tree::{check_color, check_colors, restrict_to_subtree, LeafColoring, TreeShape, STAR};

/// Two leaf colorings stored as `x` plus the leaves where `y` differs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingPair {
    k: usize,
    x: Vec<u8>,
    /// `(leaf index, y color)`, sorted by index; `x` differs at each entry.
    overlay: Vec<(usize, u8)>,
}

impl CouplingPair {
    pub fn new(x: &LeafColoring, y: &LeafColoring) -> Result<Self> {
        if x.len() != y.len() || x.k() != y.k() {
            return Err(Error::Validation("colorings differ in size or palette".into()));
        }
        let overlay = x
            .values()
            .iter()
            .zip(y.values())
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, (_, &b))| (i, b))
            .collect();
        Ok(Self {
            k: x.k(),
            x: x.values().to_vec(),
            overlay,
        })
    }

    pub fn x(&self) -> LeafColoring {
        LeafColoring::new(self.k, self.x.clone()).expect("valid by construction")
    }

    pub fn y(&self) -> LeafColoring {
        let mut y = self.x.clone();
        for &(i, c) in &self.overlay {
            y[i] = c;
        }
        LeafColoring::new(self.k, y).expect("valid by construction")
    }

    pub fn x_values(&self) -> &[u8] {
        &self.x
    }

    pub fn disagreements(&self) -> Vec<usize> {
        self.overlay.iter().map(|&(i, _)| i).collect()
    }

    pub fn overlay(&self) -> &[(usize, u8)] {
        &self.overlay
    }

    pub fn hamming(&self) -> usize {
        self.overlay.len()
    }
}

/// Draws `(X, Y)` from the downward coupling of `μ↓_{c1,ℓ}` and `μ↓_{c2,ℓ}`.
///
/// Below a disagreeing vertex `(a, b)` each child draws `u ∈ [k]∖{a}` and
/// sets the `X` child to `u`; the `Y` child copies `u` unless `u = b`, in
/// which case it takes `a`. Below agreeing vertices both sides share one
/// broadcast. `X` uses exactly the draws of a plain broadcast from `c1`.
pub fn downward_couple<R: Rng + ?Sized>(
    shape: &TreeShape,
    k: usize,
    c1: usize,
    c2: usize,
    rng: &mut R,
) -> Result<CouplingPair> {
    check_colors(k)?;
    check_color(k, c1)?;
    check_color(k, c2)?;
    let b = shape.branching();
    let mut cur = vec![c1 as u8];
    let mut dis: Vec<(usize, u8)> = if c1 == c2 { vec![] } else { vec![(0, c2 as u8)] };
    let mut next = Vec::with_capacity(shape.leaf_count());
    let mut next_dis = Vec::new();
    for _ in 0..shape.depth() {
        next.clear();
        next_dis.clear();
        let mut d = dis.iter().peekable();
        for (i, &a) in cur.iter().enumerate() {
            let y_color = match d.peek() {
                Some(&&(j, yc)) if j == i => {
                    d.next();
                    Some(yc)
                }
                _ => None,
            };
            for _ in 0..b {
                let u = child_color(rng, k, a);
                if y_color == Some(u) {
                    next_dis.push((next.len(), a));
                }
                next.push(u);
            }
        }
        std::mem::swap(&mut cur, &mut next);
        std::mem::swap(&mut dis, &mut next_dis);
    }
    Ok(CouplingPair {
        k,
        x: cur,
        overlay: dis,
    })
}

fn binomial_draw<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    Binomial::new(n, p).expect("p is a probability").sample(rng)
}

/// `D_ℓ` of the chain `D_0 = 1`, `D_{i+1} ∼ Bin(Δ·D_i, 1/(k−1))`.
pub fn simulate_disagreement_process<R: Rng + ?Sized>(branching: usize, k: usize, depth: usize, rng: &mut R) -> Result<u64> {
    check_colors(k)?;
    let p = 1.0 / (k - 1) as f64;
    let mut d = 1u64;
    for _ in 0..depth {
        if d == 0 {
            break;
        }
        d = binomial_draw(rng, branching as u64 * d, p);
    }
    Ok(d)
}

/// `Pr[D_ℓ > threshold]` by simulation of the branching process.
pub fn hamming_tail(
    branching: usize,
    k: usize,
    depth: usize,
    threshold: f64,
    samples: u64,
    rng: &mut RandomSource,
) -> Result<TailEstimate> {
    check_samples(samples)?;
    check_colors(k)?;
    let hits: u64 = par_blocks(rng, samples, |r, n| {
        (0..n)
            .filter(|_| simulate_disagreement_process(branching, k, depth, r).expect("k checked") as f64 > threshold)
            .count() as u64
    })
    .into_iter()
    .sum();
    Ok(TailEstimate::from_counts(hits, samples)?.with_threshold(threshold))
}

fn check_samples(samples: u64) -> Result<()> {
    if samples == 0 {
        return Err(Error::Validation("samples must be at least 1".into()));
    }
    Ok(())
}

/// TV distance between the laws of a vertex with marginal `dist` after a new
/// neighbor colored `c1` versus `c2` is attached:
/// `max{μ(c1)/(1−μ(c2)), μ(c2)/(1−μ(c1))}`.
pub fn upward_channel_tv(dist: &ColorDistribution, c1: usize, c2: usize) -> Result<Probability> {
    let k = dist.k();
    check_color(k, c1)?;
    check_color(k, c2)?;
    if c1 == c2 {
        return Err(Error::Validation("the two neighbor colors must differ".into()));
    }
    let infeasible = |c: usize| Error::InfeasibleChannel(format!("color {c} has probability 1"));
    match dist {
        ColorDistribution::Rational(w) => {
            let (a, b) = (&w[c1 - 1], &w[c2 - 1]);
            let one = BigRational::one();
            for (p, c) in [(a, c1), (b, c2)] {
                if *p == one {
                    return Err(infeasible(c));
                }
            }
            let x = a / (&one - b);
            let y = b / (&one - a);
            Ok(Probability::Exact(x.max(y)))
        }
        ColorDistribution::Float(w) => {
            let (a, b) = (w[c1 - 1], w[c2 - 1]);
            for (p, c) in [(a, c1), (b, c2)] {
                if p >= 1.0 {
                    return Err(infeasible(c));
                }
            }
            Ok(Probability::Approx((a / (1.0 - b)).max(b / (1.0 - a))))
        }
    }
}

/// `p^max / (1 − p^max)`, the color-free bound on [`upward_channel_tv`].
pub fn channel_pmax_bound(dist: &ColorDistribution) -> Result<Probability> {
    match p_max(dist) {
        Probability::Exact(p) => {
            let one = BigRational::one();
            if p == one {
                return Err(Error::InfeasibleChannel("a color has probability 1".into()));
            }
            Ok(Probability::Exact(&p / (one - &p)))
        }
        Probability::Approx(p) => {
            if p >= 1.0 {
                return Err(Error::InfeasibleChannel("a color has probability 1".into()));
            }
            Ok(Probability::Approx(p / (1.0 - p)))
        }
    }
}

/// `Z_0 = X, …, Z_{2m} = Y`: the differing leaves are starred one at a time
/// in ascending index order, then filled with `Y`'s colors in reverse order.
pub fn interpolation_path(x: &LeafColoring, y: &LeafColoring) -> Result<Vec<LeafColoring>> {
    let pair = CouplingPair::new(x, y)?;
    let mut path = vec![x.clone()];
    let mut cur = x.values().to_vec();
    for &(i, _) in pair.overlay() {
        cur[i] = STAR;
        path.push(LeafColoring::new(x.k(), cur.clone())?);
    }
    for &(i, c) in pair.overlay().iter().rev() {
        cur[i] = c;
        path.push(LeafColoring::new(x.k(), cur.clone())?);
    }
    Ok(path)
}

/// Exact root TV for two colorings differing at one leaf, next to the
/// product of one-neighbor channel bounds along the leaf-to-root path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathChannelReport {
    pub leaf: usize,
    pub exact_tv: f64,
    /// Worst-case channel TV at each vertex from the leaf's parent upward.
    pub channels: Vec<f64>,
    pub channel_product: f64,
}

/// For `x`, `y` differing in exactly one leaf: the exact `tv_root` and, for
/// each ancestor `u` of that leaf with child `w` on the path, the largest
/// [`upward_channel_tv`] of `u`'s marginal in its own subtree with `w`'s
/// subtree removed.
pub fn single_disagreement_report(
    shape: &TreeShape,
    k: usize,
    x: &LeafColoring,
    y: &LeafColoring,
) -> Result<PathChannelReport> {
    let pair = CouplingPair::new(x, y)?;
    let [leaf] = pair.disagreements()[..] else {
        return Err(Error::Validation(format!(
            "colorings differ in {} leaves, expected exactly one",
            pair.hamming()
        )));
    };
    let exact_tv = tv_root(shape, k, x, y, Backend::Rational)?.to_f64();
    let z = crate::unbiasing::star_out(x, &[leaf])?;
    let mut channels = Vec::new();
    let mut w = shape.leaf_vertex(leaf)?;
    while let Some(u) = shape.parent(w) {
        let sub = shape.subtree_shape(u)?;
        let zu = restrict_to_subtree(&z, shape, u)?;
        let first = shape.children(u)?.start;
        let local_w = 1 + (w - first);
        let dist = vertex_conditional_marginal(&sub, k, &zu, 0, Some(local_w), None)?;
        let mut worst = 0.0f64;
        for c1 in 1..=k {
            for c2 in 1..=k {
                if c1 != c2 {
                    // A forced vertex passes no disagreement upward.
                    let tv = upward_channel_tv(&dist, c1, c2).map(|p| p.to_f64()).unwrap_or(0.0);
                    worst = worst.max(tv);
                }
            }
        }
        channels.push(worst.min(1.0));
        w = u;
    }
    let channel_product = channels.iter().product();
    Ok(PathChannelReport {
        leaf,
        exact_tv,
        channels,
        channel_product,
    })
}

/// Mean of `|P_ℓ(X, c) − 1/k|` over `X ∼ μ_ℓ`.
pub fn estimate_alpha(shape: &TreeShape, k: usize, c: usize, samples: u64, rng: &mut RandomSource) -> Result<Estimate> {
    check_samples(samples)?;
    check_colors(k)?;
    check_color(k, c)?;
    let u = 1.0 / k as f64;
    let parts = par_blocks(rng, samples, |r, n| -> Result<Summary> {
        let mut sampler = RootMarginalSampler::new(shape, k)?;
        let mut p = vec![0.0; k];
        let mut s = Summary::new();
        for _ in 0..n {
            sampler.sample(r, None, &mut p)?;
            s.push((p[c - 1] - u).abs());
        }
        Ok(s)
    });
    fold_summaries(parts).map(|s| s.estimate())
}

fn fold_summaries(parts: Vec<Result<Summary>>) -> Result<Summary> {
    let mut all = Summary::new();
    for p in parts {
        all.merge(&p?);
    }
    Ok(all)
}

/// Float bias values within this of the threshold count as not exceeding it.
const TIE_SLACK: f64 = 1e-12;

/// `Pr_{X∼μ_ℓ}[|P_ℓ(X, c) − 1/k| > threshold]`.
pub fn concentration_tail(
    shape: &TreeShape,
    k: usize,
    c: usize,
    threshold: f64,
    samples: u64,
    rng: &mut RandomSource,
) -> Result<TailEstimate> {
    check_samples(samples)?;
    check_colors(k)?;
    check_color(k, c)?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Validation(format!("threshold {threshold} is outside (0, 1)")));
    }
    let u = 1.0 / k as f64;
    let parts = par_blocks(rng, samples, |r, n| -> Result<u64> {
        let mut sampler = RootMarginalSampler::new(shape, k)?;
        let mut p = vec![0.0; k];
        let mut hits = 0;
        for _ in 0..n {
            sampler.sample(r, None, &mut p)?;
            hits += u64::from((p[c - 1] - u).abs() > threshold + TIE_SLACK);
        }
        Ok(hits)
    });
    let mut hits = 0;
    for h in parts {
        hits += h?;
    }
    Ok(TailEstimate::from_counts(hits, samples)?.with_threshold(threshold))
}

/// Float TV between the root marginals of a coupled pair.
fn pair_root_tv(shape: &TreeShape, k: usize, pair: &CouplingPair, px: &mut [f64], py: &mut [f64], y: &mut Vec<u8>) -> f64 {
    y.clear();
    y.extend_from_slice(pair.x_values());
    for &(i, c) in pair.overlay() {
        y[i] = c;
    }
    let ok = float_root_marginal(shape, k, pair.x_values(), None, px) && float_root_marginal(shape, k, y, None, py);
    debug_assert!(ok, "broadcast leaves are feasible");
    0.5 * px.iter().zip(py.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// The two estimators of `d_TV[μ↓↑_{c1,ℓ}, μ↓↑_{c2,ℓ}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaTvEstimates {
    /// Mean of `tv_root(X, Y)` over `(X, Y) ∼ ν↓`. Its expectation is an
    /// upper bound on the down-up TV, not the TV itself.
    pub coupling_bound: Estimate,
    /// TV between the empirical laws of `sample_down_up(c1)` and
    /// `sample_down_up(c2)`, with a delta-method standard error. Biased
    /// upward by sampling noise for small TV.
    pub plug_in: Estimate,
}

pub fn estimate_beta_tv(
    shape: &TreeShape,
    k: usize,
    c1: usize,
    c2: usize,
    samples: u64,
    rng: &mut RandomSource,
) -> Result<BetaTvEstimates> {
    check_samples(samples)?;
    check_colors(k)?;
    check_color(k, c1)?;
    check_color(k, c2)?;
    if c1 == c2 {
        let zero = Estimate {
            mean: 0.0,
            stderr: 0.0,
            n: samples,
        };
        return Ok(BetaTvEstimates {
            coupling_bound: zero,
            plug_in: zero,
        });
    }
    let parts = par_blocks(rng, samples, |r, n| -> Result<(Summary, Vec<u64>, Vec<u64>)> {
        let mut sampler = RootMarginalSampler::new(shape, k)?;
        let (mut px, mut py, mut y) = (vec![0.0; k], vec![0.0; k], Vec::new());
        let mut s = Summary::new();
        let (mut f1, mut f2) = (vec![0u64; k], vec![0u64; k]);
        for _ in 0..n {
            let pair = downward_couple(shape, k, c1, c2, r)?;
            s.push(pair_root_tv(shape, k, &pair, &mut px, &mut py, &mut y));
            sampler.sample(r, Some(c1), &mut px)?;
            f1[draw_color(r, &px) - 1] += 1;
            sampler.sample(r, Some(c2), &mut px)?;
            f2[draw_color(r, &px) - 1] += 1;
        }
        Ok((s, f1, f2))
    });
    let mut s = Summary::new();
    let (mut f1, mut f2) = (vec![0u64; k], vec![0u64; k]);
    for p in parts {
        let (ps, a, b) = p?;
        s.merge(&ps);
        f1.iter_mut().zip(a).for_each(|(x, y)| *x += y);
        f2.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    }
    Ok(BetaTvEstimates {
        coupling_bound: s.estimate(),
        plug_in: plug_in_tv(&f1, &f2),
    })
}

/// Empirical TV of two color histograms with a delta-method standard error:
/// TV = ½ Σ s_c (p̂1_c − p̂2_c) with `s_c` the sign of the difference.
fn plug_in_tv(f1: &[u64], f2: &[u64]) -> Estimate {
    let (n1, n2) = (f1.iter().sum::<u64>() as f64, f2.iter().sum::<u64>() as f64);
    let p1: Vec<f64> = f1.iter().map(|&x| x as f64 / n1).collect();
    let p2: Vec<f64> = f2.iter().map(|&x| x as f64 / n2).collect();
    let sign: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| (a - b).signum() * f64::from(a != b)).collect();
    let tv = 0.5 * p1.iter().zip(&p2).map(|(a, b)| (a - b).abs()).sum::<f64>();
    let var = |p: &[f64], n: f64| {
        let m1: f64 = p.iter().zip(&sign).map(|(p, s)| p * s).sum();
        let m2: f64 = p.iter().zip(&sign).map(|(p, s)| p * s * s).sum();
        (m2 - m1 * m1) / n
    };
    Estimate {
        mean: tv,
        stderr: 0.5 * (var(&p1, n1) + var(&p2, n2)).sqrt(),
        n: n1 as u64,
    }
}

/// `Pr_{ν↓}[tv_root(X, Y) > threshold]`.
pub fn coupling_tv_tail(
    shape: &TreeShape,
    k: usize,
    c1: usize,
    c2: usize,
    threshold: f64,
    samples: u64,
    rng: &mut RandomSource,
) -> Result<TailEstimate> {
    check_samples(samples)?;
    check_colors(k)?;
    let parts = par_blocks(rng, samples, |r, n| -> Result<u64> {
        let (mut px, mut py, mut y) = (vec![0.0; k], vec![0.0; k], Vec::new());
        let mut hits = 0;
        for _ in 0..n {
            let pair = downward_couple(shape, k, c1, c2, r)?;
            hits += u64::from(pair_root_tv(shape, k, &pair, &mut px, &mut py, &mut y) > threshold);
        }
        Ok(hits)
    });
    let mut hits = 0;
    for h in parts {
        hits += h?;
    }
    Ok(TailEstimate::from_counts(hits, samples)?.with_threshold(threshold))
}

/// `2(e^{−1/δ} + A/δ)`.
pub fn concentration_reduction_bound(a: f64, delta: f64) -> f64 {
    2.0 * ((-1.0 / delta).exp() + a / delta)
}

/// Whether `measured_tail` respects [`concentration_reduction_bound`].
/// Takes `δ ∈ (0, 1/10]`, `A ≥ 0`.
pub fn check_concentration_reduction(a: f64, delta: f64, measured_tail: f64) -> Result<bool> {
    if !(delta > 0.0 && delta <= 0.1) {
        return Err(Error::Validation(format!("delta {delta} is outside (0, 1/10]")));
    }
    if !(a >= 0.0) {
        return Err(Error::Validation(format!("A = {a} must be nonnegative")));
    }
    Ok(measured_tail <= concentration_reduction_bound(a, delta))
}

/// Exact `|P_ℓ(X, c) − 1/k|` as a float, for reporting.
pub fn root_bias(shape: &TreeShape, k: usize, x: &LeafColoring, c: usize) -> Result<f64> {
    check_color(k, c)?;
    let p = root_marginal(shape, k, x, None, Backend::Rational)?;
    let p = p.as_rational().expect("rational backend");
    let u = BigRational::new(1.into(), (k as i64).into());
    Ok(ratio_to_f64(&(&p[c - 1] - u).abs()))
}
