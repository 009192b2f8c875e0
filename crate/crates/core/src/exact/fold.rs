//! Streaming bottom-up evaluation of tree recursions over a leaf vector.
//!
//! Every exact quantity in this crate (feasible color sets, conditional root
//! marginals, extension counts) has the same shape: a vertex combines one
//! message per child into an accumulator, and a completed accumulator turns
//! into the message that vertex sends to its parent. The driver walks the
//! leaves left to right and keeps one accumulator per level, so the working
//! memory is `O(depth · k)` regardless of the number of leaves.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::tree::{ColorSet, STAR};

pub(crate) trait Recursion {
    /// What a finished vertex hands to its parent.
    type Msg;
    /// Per-vertex product over the children seen so far.
    type Acc;

    fn new_msg(&self) -> Self::Msg;
    fn new_acc(&self) -> Self::Acc;
    fn reset(&self, acc: &mut Self::Acc);
    fn absorb(&self, acc: &mut Self::Acc, child: &Self::Msg);
    /// Converts a completed accumulator into a parent message. Returns
    /// `false` when the vertex has no admissible color.
    fn emit(&self, acc: &Self::Acc, out: &mut Self::Msg) -> bool;
    fn leaf_msg(&self, x: u8, out: &mut Self::Msg);
    /// Accumulator of a tree that is a single leaf.
    fn leaf_acc(&self, x: u8) -> Self::Acc;

    /// Message of a height-1 vertex whose children are the given leaves.
    fn block_msg(
        &self,
        leaves: &[u8],
        acc: &mut Self::Acc,
        scratch: &mut Self::Msg,
        out: &mut Self::Msg,
    ) -> bool {
        self.reset(acc);
        for &x in leaves {
            self.leaf_msg(x, scratch);
            self.absorb(acc, scratch);
        }
        self.emit(acc, out)
    }
}

/// Root accumulator of the complete tree whose leaves are `leaves`, or `None`
/// if some vertex below the root has no admissible color.
pub(crate) fn root_acc<R: Recursion>(
    r: &R,
    branching: usize,
    depth: usize,
    leaves: &[u8],
) -> Option<R::Acc> {
    debug_assert_eq!(leaves.len(), branching.pow(depth as u32));
    if depth == 0 {
        return Some(r.leaf_acc(leaves[0]));
    }
    if depth == 1 {
        let mut acc = r.new_acc();
        let mut msg = r.new_msg();
        for &x in leaves {
            r.leaf_msg(x, &mut msg);
            r.absorb(&mut acc, &msg);
        }
        return Some(acc);
    }
    // accs[i] collects children of the current vertex at height i + 2;
    // msgs[i] is the message of the latest vertex at height i + 1.
    let mut accs: Vec<R::Acc> = (1..depth).map(|_| r.new_acc()).collect();
    let mut counts = vec![0usize; depth - 1];
    let mut msgs: Vec<R::Msg> = (0..depth - 1).map(|_| r.new_msg()).collect();
    let mut block_acc = r.new_acc();
    let mut scratch = r.new_msg();
    for block in leaves.chunks_exact(branching) {
        if !r.block_msg(block, &mut block_acc, &mut scratch, &mut msgs[0]) {
            return None;
        }
        let mut h = 0;
        loop {
            r.absorb(&mut accs[h], &msgs[h]);
            counts[h] += 1;
            if counts[h] < branching {
                break;
            }
            counts[h] = 0;
            if h + 2 == depth {
                return Some(std::mem::replace(&mut accs[h], r.new_acc()));
            }
            if !r.emit(&accs[h], &mut msgs[h + 1]) {
                return None;
            }
            r.reset(&mut accs[h]);
            h += 1;
        }
    }
    unreachable!("leaf vector length is branching^depth")
}

/// Same as [`root_acc`] but evaluates the root's subtrees in parallel and
/// combines them in child order, so the result does not depend on scheduling.
pub(crate) fn root_acc_split<R>(r: &R, branching: usize, depth: usize, leaves: &[u8]) -> Option<R::Acc>
where
    R: Recursion + Sync,
    R::Msg: Send,
{
    if depth < 2 {
        return root_acc(r, branching, depth, leaves);
    }
    let span = leaves.len() / branching;
    let msgs: Vec<Option<R::Msg>> = leaves
        .par_chunks(span)
        .map(|sub| {
            let acc = root_acc(r, branching, depth - 1, sub)?;
            let mut m = r.new_msg();
            r.emit(&acc, &mut m).then_some(m)
        })
        .collect();
    let mut acc = r.new_acc();
    for m in msgs {
        r.absorb(&mut acc, &m?);
    }
    Some(acc)
}

/// Feasible color sets: `Acc` is the set of colors the vertex can take,
/// `Msg` is the set of parent colors the child leaves room for.
pub(crate) struct Feasibility {
    pub full: ColorSet,
}

impl Feasibility {
    pub fn new(k: usize) -> Self {
        Self { full: ColorSet::full(k) }
    }
}

impl Recursion for Feasibility {
    type Msg = ColorSet;
    type Acc = ColorSet;

    fn new_msg(&self) -> ColorSet {
        self.full
    }
    fn new_acc(&self) -> ColorSet {
        self.full
    }
    fn reset(&self, acc: &mut ColorSet) {
        *acc = self.full;
    }
    fn absorb(&self, acc: &mut ColorSet, child: &ColorSet) {
        acc.0 &= child.0;
    }
    fn emit(&self, acc: &ColorSet, out: &mut ColorSet) -> bool {
        *out = match acc.len() {
            0 => return false,
            1 => ColorSet(self.full.0 & !acc.0),
            _ => self.full,
        };
        true
    }
    fn leaf_msg(&self, x: u8, out: &mut ColorSet) {
        *out = self.full;
        if x != STAR {
            out.remove(x);
        }
    }
    fn leaf_acc(&self, x: u8) -> ColorSet {
        if x == STAR {
            self.full
        } else {
            ColorSet::single(x)
        }
    }
}

/// Exact rational recursion. `Acc` holds the per-color products
/// `Π_i (1 − P(X_i, c))`, `Msg` holds `1 − P(X_v, c)`.
pub(crate) struct RationalMarginal {
    pub k: usize,
}

impl Recursion for RationalMarginal {
    type Msg = Vec<BigRational>;
    type Acc = Vec<BigRational>;

    fn new_msg(&self) -> Self::Msg {
        vec![BigRational::one(); self.k]
    }
    fn new_acc(&self) -> Self::Acc {
        vec![BigRational::one(); self.k]
    }
    fn reset(&self, acc: &mut Self::Acc) {
        acc.iter_mut().for_each(|a| *a = BigRational::one());
    }
    fn absorb(&self, acc: &mut Self::Acc, child: &Self::Msg) {
        for (a, m) in acc.iter_mut().zip(child) {
            *a *= m;
        }
    }
    fn emit(&self, acc: &Self::Acc, out: &mut Self::Msg) -> bool {
        let total: BigRational = acc.iter().sum();
        if total.is_zero() {
            return false;
        }
        for (o, a) in out.iter_mut().zip(acc) {
            *o = (&total - a) / &total;
        }
        true
    }
    fn leaf_msg(&self, x: u8, out: &mut Self::Msg) {
        if x == STAR {
            let v = BigRational::new((self.k as i64 - 1).into(), (self.k as i64).into());
            out.iter_mut().for_each(|o| *o = v.clone());
        } else {
            for (c, o) in out.iter_mut().enumerate() {
                *o = if c + 1 == x as usize { BigRational::zero() } else { BigRational::one() };
            }
        }
    }
    fn leaf_acc(&self, x: u8) -> Self::Acc {
        (1..=self.k)
            .map(|c| {
                if x == STAR || c == x as usize {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            })
            .collect()
    }
}

/// Log-domain floating point recursion. `Acc` holds per-color sums of
/// `ln(1 − P(X_i, c))`, `Msg` holds `ln(1 − P(X_v, c))`.
#[derive(Debug, Clone)]
pub(crate) struct FloatMarginal {
    pub k: usize,
    /// `ln((m−1)/m)` for `m` free colors at a height-1 vertex.
    free_log: Vec<f64>,
    star_log: f64,
}

impl FloatMarginal {
    pub fn new(k: usize) -> Self {
        let free_log = (0..=k)
            .map(|m| if m == 0 { f64::NAN } else { ((m - 1) as f64 / m as f64).ln() })
            .collect();
        Self {
            k,
            free_log,
            star_log: (1.0 - 1.0 / k as f64).ln(),
        }
    }

    /// Message entry of a color left free at a height-1 vertex with `m`
    /// free colors.
    #[inline]
    pub fn free_log(&self, m: usize) -> f64 {
        self.free_log[m]
    }

    /// Normalized weights from a log accumulator, or `None` for zero mass.
    pub fn normalize(acc: &[f64], out: &mut [f64]) -> Option<f64> {
        let max = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return None;
        }
        let mut total = 0.0;
        for (o, a) in out.iter_mut().zip(acc) {
            *o = (a - max).exp();
            total += *o;
        }
        Some(total)
    }
}

impl Recursion for FloatMarginal {
    type Msg = Vec<f64>;
    type Acc = Vec<f64>;

    fn new_msg(&self) -> Self::Msg {
        vec![0.0; self.k]
    }
    fn new_acc(&self) -> Self::Acc {
        vec![0.0; self.k]
    }
    fn reset(&self, acc: &mut Self::Acc) {
        acc.iter_mut().for_each(|a| *a = 0.0);
    }
    fn absorb(&self, acc: &mut Self::Acc, child: &Self::Msg) {
        for (a, m) in acc.iter_mut().zip(child) {
            *a += m;
        }
    }
    fn emit(&self, acc: &Self::Acc, out: &mut Self::Msg) -> bool {
        let Some(total) = Self::normalize(acc, out) else {
            return false;
        };
        // For the (at most one) dominant color, 1 − p_c is summed from the
        // other weights instead of subtracted, so it stays accurate near p_c ≈ 1.
        let ln_total = total.ln();
        let dominant = out.iter().position(|&w| w > 0.5 * total);
        let rest = dominant.map(|d| {
            out.iter()
                .enumerate()
                .filter(|&(c, _)| c != d)
                .map(|(_, w)| w)
                .sum::<f64>()
        });
        for c in 0..self.k {
            let comp = match (dominant, rest) {
                (Some(d), Some(r)) if d == c => r,
                _ => total - out[c],
            };
            out[c] = comp.ln() - ln_total;
        }
        true
    }
    fn leaf_msg(&self, x: u8, out: &mut Self::Msg) {
        if x == STAR {
            out.iter_mut().for_each(|o| *o = self.star_log);
        } else {
            out.iter_mut().for_each(|o| *o = 0.0);
            out[x as usize - 1] = f64::NEG_INFINITY;
        }
    }
    fn leaf_acc(&self, x: u8) -> Self::Acc {
        (1..=self.k)
            .map(|c| if x == STAR || c == x as usize { 0.0 } else { f64::NEG_INFINITY })
            .collect()
    }

    // A height-1 vertex is uniform over the colors absent from its colored
    // children (⋆ children contribute the same factor to every color).
    fn block_msg(&self, leaves: &[u8], _: &mut Self::Acc, _: &mut Self::Msg, out: &mut Self::Msg) -> bool {
        let mut seen = ColorSet::default();
        for &x in leaves {
            if x != STAR {
                seen.insert(x);
            }
        }
        let free = self.k - seen.len();
        if free == 0 {
            return false;
        }
        let v = self.free_log[free];
        for (c, o) in out.iter_mut().enumerate() {
            *o = if seen.contains(c as u8 + 1) { 0.0 } else { v };
        }
        true
    }
}

/// Extension counting. `Acc` holds `Ω(v, c)`, `Msg` holds `Σ_{f≠c} Ω(v, f)`.
pub(crate) struct Counting {
    pub k: usize,
}

impl Recursion for Counting {
    type Msg = Vec<BigUint>;
    type Acc = Vec<BigUint>;

    fn new_msg(&self) -> Self::Msg {
        vec![BigUint::one(); self.k]
    }
    fn new_acc(&self) -> Self::Acc {
        vec![BigUint::one(); self.k]
    }
    fn reset(&self, acc: &mut Self::Acc) {
        acc.iter_mut().for_each(|a| *a = BigUint::one());
    }
    fn absorb(&self, acc: &mut Self::Acc, child: &Self::Msg) {
        for (a, m) in acc.iter_mut().zip(child) {
            *a *= m;
        }
    }
    fn emit(&self, acc: &Self::Acc, out: &mut Self::Msg) -> bool {
        let total: BigUint = acc.iter().sum();
        for (o, a) in out.iter_mut().zip(acc) {
            *o = &total - a;
        }
        true
    }
    fn leaf_msg(&self, x: u8, out: &mut Self::Msg) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = if x == STAR {
                BigUint::from(self.k - 1)
            } else if c + 1 == x as usize {
                BigUint::zero()
            } else {
                BigUint::one()
            };
        }
    }
    fn leaf_acc(&self, x: u8) -> Self::Acc {
        (1..=self.k)
            .map(|c| {
                if x == STAR || c == x as usize {
                    BigUint::one()
                } else {
                    BigUint::zero()
                }
            })
            .collect()
    }
}
