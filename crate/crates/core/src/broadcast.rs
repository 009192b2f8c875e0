//! Root-down broadcast sampling of `μ_ℓ`, `μ↓_{c,ℓ}` and `μ↓↑_{c,ℓ}`.

use rand::Rng;

use crate::exact::fold::{FloatMarginal, Recursion};
use crate::exact::{float_root_marginal, Backend};
use crate::error::Result;
use crate::tree::{check_color, check_colors, ColorSet, FullColoring, LeafColoring, TreeShape};

/// Uniform color in `[k] \ {parent}`; `parent = 0` means no constraint.
/// Draws `j ∈ [k−1]` and shifts past the parent color.
#[inline]
pub(crate) fn child_color<R: Rng + ?Sized>(rng: &mut R, k: usize, parent: u8) -> u8 {
    if parent == 0 {
        return rng.random_range(1..=k as u8);
    }
    let j = rng.random_range(1..k as u8);
    j + (j >= parent) as u8
}

fn root_or_uniform<R: Rng + ?Sized>(rng: &mut R, k: usize, root_color: Option<usize>) -> Result<u8> {
    match root_color {
        Some(c) => {
            check_color(k, c)?;
            Ok(c as u8)
        }
        None => Ok(child_color(rng, k, 0)),
    }
}

/// A proper coloring of the whole tree drawn from `μ_ℓ`, or from `μ_ℓ`
/// conditioned on the root color.
pub fn sample_full<R: Rng + ?Sized>(
    shape: &TreeShape,
    k: usize,
    rng: &mut R,
    root_color: Option<usize>,
) -> Result<FullColoring> {
    check_colors(k)?;
    let mut values = vec![0u8; shape.vertex_count()];
    values[0] = root_or_uniform(rng, k, root_color)?;
    let b = shape.branching();
    for v in 1..values.len() {
        values[v] = child_color(rng, k, values[(v - 1) / b]);
    }
    Ok(FullColoring::from_raw(k, values))
}

/// Reusable level-by-level sampler of leaf colorings. Only two levels are
/// kept in memory at a time.
#[derive(Debug, Clone)]
pub struct LeafSampler {
    shape: TreeShape,
    k: usize,
    cur: Vec<u8>,
    next: Vec<u8>,
}

impl LeafSampler {
    pub fn new(shape: &TreeShape, k: usize) -> Result<Self> {
        check_colors(k)?;
        Ok(Self {
            shape: shape.clone(),
            k,
            cur: Vec::with_capacity(shape.leaf_count()),
            next: Vec::with_capacity(shape.leaf_count()),
        })
    }

    /// Leaves of one broadcast run. `root = None` draws the root uniformly.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R, root: Option<usize>) -> Result<&[u8]> {
        self.cur.clear();
        self.cur.push(root_or_uniform(rng, self.k, root)?);
        let b = self.shape.branching();
        for _ in 0..self.shape.depth() {
            self.next.clear();
            for &p in &self.cur {
                for _ in 0..b {
                    self.next.push(child_color(rng, self.k, p));
                }
            }
            std::mem::swap(&mut self.cur, &mut self.next);
        }
        Ok(&self.cur)
    }
}

/// Leaves of a broadcast run with root color `c`: a draw from `μ↓_{c,ℓ}`.
pub fn sample_leaves_given_root<R: Rng + ?Sized>(
    shape: &TreeShape,
    k: usize,
    c: usize,
    rng: &mut R,
) -> Result<LeafColoring> {
    let mut s = LeafSampler::new(shape, k)?;
    let leaves = s.sample(rng, Some(c))?.to_vec();
    LeafColoring::new(k, leaves)
}

/// Leaves of an unconditioned broadcast run: a draw from `μ_ℓ`.
pub fn sample_leaves<R: Rng + ?Sized>(shape: &TreeShape, k: usize, rng: &mut R) -> Result<LeafColoring> {
    let mut s = LeafSampler::new(shape, k)?;
    let leaves = s.sample(rng, None)?.to_vec();
    LeafColoring::new(k, leaves)
}

/// Draws a color from a probability vector over `1..=k`.
pub(crate) fn draw_color<R: Rng + ?Sized>(rng: &mut R, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i + 1;
        }
    }
    // rounding: fall back to the last color with positive mass
    p.iter().rposition(|&w| w > 0.0).unwrap_or(0) + 1
}

/// One step down from `c` to the leaves and back up to the root: a draw
/// from `μ↓↑_{c,ℓ}`.
pub fn sample_down_up<R: Rng + ?Sized>(shape: &TreeShape, k: usize, c: usize, rng: &mut R) -> Result<usize> {
    let x = sample_leaves_given_root(shape, k, c, rng)?;
    let mut p = vec![0.0; k];
    float_root_marginal(shape, k, x.values(), None, &mut p);
    Ok(draw_color(rng, &p))
}

/// Draws `X` from `μ_ℓ` (or `μ↓_{c,ℓ}`) and returns the root marginal
/// `P_ℓ(X, ·)` directly, without storing the leaves.
///
/// The subtree is generated depth first and each vertex's upward message is
/// formed as soon as its children are done. A height-1 vertex's message
/// depends only on which colors appear among its leaves, so leaf draws stop
/// once every color other than the parent's has appeared.
#[derive(Debug, Clone)]
pub struct RootMarginalSampler {
    branching: usize,
    depth: usize,
    k: usize,
    fm: FloatMarginal,
    accs: Vec<Vec<f64>>,
    msgs: Vec<Vec<f64>>,
}

impl RootMarginalSampler {
    pub fn new(shape: &TreeShape, k: usize) -> Result<Self> {
        check_colors(k)?;
        let levels = shape.depth() + 1;
        Ok(Self {
            branching: shape.branching(),
            depth: shape.depth(),
            k,
            fm: FloatMarginal::new(k),
            accs: vec![vec![0.0; k]; levels],
            msgs: vec![vec![0.0; k]; levels],
        })
    }

    pub fn backend(&self) -> Backend {
        Backend::Float
    }

    /// Writes `P_ℓ(X, ·)` into `out` (length `k`) and returns the root color
    /// of the broadcast run that produced `X`.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R, root: Option<usize>, out: &mut [f64]) -> Result<usize> {
        let a = root_or_uniform(rng, self.k, root)?;
        let d = self.depth;
        if d == 0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            out[a as usize - 1] = 1.0;
            return Ok(a as usize);
        }
        if d == 1 {
            let seen = self.appearing(rng, a);
            let free = (self.k - seen.len()) as f64;
            for (c, o) in out.iter_mut().enumerate() {
                *o = if seen.contains(c as u8 + 1) { 0.0 } else { 1.0 / free };
            }
            return Ok(a as usize);
        }
        self.accs[d].iter_mut().for_each(|x| *x = 0.0);
        for _ in 0..self.branching {
            let b = child_color(rng, self.k, a);
            self.message(rng, b, d - 1);
            let (acc, msg) = (&mut self.accs[d], &self.msgs[d - 1]);
            acc.iter_mut().zip(msg).for_each(|(x, m)| *x += m);
        }
        let total = FloatMarginal::normalize(&self.accs[d], out).expect("broadcast leaves are feasible");
        out.iter_mut().for_each(|o| *o /= total);
        Ok(a as usize)
    }

    /// Colors appearing among the `Δ` leaves of a height-1 vertex colored `a`.
    fn appearing<R: Rng + ?Sized>(&self, rng: &mut R, a: u8) -> ColorSet {
        let mut seen = ColorSet::default();
        let mut n = 0;
        for _ in 0..self.branching {
            let x = child_color(rng, self.k, a);
            if !seen.contains(x) {
                seen.insert(x);
                n += 1;
                if n + 1 == self.k {
                    break;
                }
            }
        }
        seen
    }

    /// Fills `msgs[h]` with the message of a fresh height-`h` subtree whose
    /// root has color `a`.
    fn message<R: Rng + ?Sized>(&mut self, rng: &mut R, a: u8, h: usize) {
        if h == 1 {
            let seen = self.appearing(rng, a);
            let v = self.fm.free_log(self.k - seen.len());
            for (c, o) in self.msgs[1].iter_mut().enumerate() {
                *o = if seen.contains(c as u8 + 1) { 0.0 } else { v };
            }
            return;
        }
        self.accs[h].iter_mut().for_each(|x| *x = 0.0);
        for _ in 0..self.branching {
            let b = child_color(rng, self.k, a);
            self.message(rng, b, h - 1);
            let (acc, msg) = (&mut self.accs[h], &self.msgs[h - 1]);
            acc.iter_mut().zip(msg).for_each(|(x, m)| *x += m);
        }
        let ok = self.fm.emit(&self.accs[h], &mut self.msgs[h]);
        debug_assert!(ok);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;
    use crate::tree::is_proper;

    #[test]
    fn child_color_skips_parent() {
        let mut rng = RandomSource::new(1);
        let mut counts = [0u32; 5];
        for _ in 0..40_000 {
            let c = child_color(&mut rng, 4, 2);
            counts[c as usize] += 1;
        }
        assert_eq!(counts[0], 0);
        assert_eq!(counts[2], 0);
        for c in [1, 3, 4] {
            assert!((counts[c] as f64 - 40_000.0 / 3.0).abs() < 400.0);
        }
    }

    #[test]
    fn full_samples_are_proper() {
        let mut rng = RandomSource::new(2);
        let s = TreeShape::new(3, 3).unwrap();
        for _ in 0..100 {
            let sigma = sample_full(&s, 3, &mut rng, None).unwrap();
            assert!(is_proper(&s, &sigma).unwrap());
        }
        let s0 = TreeShape::new(2, 0).unwrap();
        assert_eq!(sample_full(&s0, 3, &mut rng, Some(2)).unwrap().values(), &[2]);
        assert_eq!(sample_leaves_given_root(&s0, 3, 1, &mut rng).unwrap().values(), &[1]);
        assert_eq!(sample_down_up(&s0, 3, 3, &mut rng).unwrap(), 3);
    }

    #[test]
    fn leaf_sampler_matches_full_sampler() {
        // Same stream, same draw order (level order), same leaves.
        let s = TreeShape::new(2, 3).unwrap();
        let mut a = RandomSource::new(9);
        let mut b = RandomSource::new(9);
        let full = sample_full(&s, 4, &mut a, Some(1)).unwrap();
        let leaves = sample_leaves_given_root(&s, 4, 1, &mut b).unwrap();
        assert_eq!(full.leaves(&s), leaves);
    }

    #[test]
    fn fused_sampler_small_depths() {
        let mut rng = RandomSource::new(4);
        let mut p = vec![0.0; 3];
        let s0 = TreeShape::new(2, 0).unwrap();
        let mut m = RootMarginalSampler::new(&s0, 3).unwrap();
        assert_eq!(m.sample(&mut rng, Some(2), &mut p).unwrap(), 2);
        assert_eq!(p, vec![0.0, 1.0, 0.0]);
        // Depth 1 with k = 3: both leaves avoid the root, so the root is
        // either pinned (two distinct colors) or one of two.
        let s1 = TreeShape::new(2, 1).unwrap();
        let mut m = RootMarginalSampler::new(&s1, 3).unwrap();
        for _ in 0..50 {
            m.sample(&mut rng, Some(1), &mut p).unwrap();
            assert!(p == [1.0, 0.0, 0.0] || p[0] == 0.5);
        }
        let s3 = TreeShape::new(3, 3).unwrap();
        let mut m = RootMarginalSampler::new(&s3, 4).unwrap();
        let mut p4 = vec![0.0; 4];
        for _ in 0..50 {
            m.sample(&mut rng, None, &mut p4).unwrap();
            assert!((p4.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
