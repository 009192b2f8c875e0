//! Complete Δ-ary trees, leaf colorings and full colorings.
//!
//! Vertices are indexed in level order: the root is `0`, the children of `v`
//! are `vΔ+1 ..= vΔ+Δ`, and the parent of `v > 0` is `(v-1)/Δ`. With this
//! indexing the leaves form the last level, and the leaves below any vertex
//! form one contiguous block, so restricting a leaf coloring to a subtree is a
//! slice.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::exact::fold::{root_acc, Feasibility};

/// Largest number of colors supported (color sets are `u128` bitmasks).
pub const MAX_COLORS: usize = 128;

/// Value used for an uncolored leaf (⋆).
pub const STAR: u8 = 0;

/// Shape of a complete tree with `branching` children per internal vertex and
/// `depth` edges from the root to every leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TreeShape {
    branching: usize,
    depth: usize,
    leaf_count: usize,
    vertex_count: usize,
}

impl TreeShape {
    pub fn new(branching: usize, depth: usize) -> Result<Self> {
        if branching < 2 {
            return Err(Error::Validation(format!(
                "branching factor must be at least 2, got {branching}"
            )));
        }
        let overflow = || Error::Capacity(format!("tree Δ={branching}, ℓ={depth} is too large"));
        let leaf_count = u32::try_from(depth)
            .ok()
            .and_then(|d| branching.checked_pow(d))
            .ok_or_else(overflow)?;
        let vertex_count = leaf_count
            .checked_mul(branching)
            .map(|x| (x - 1) / (branching - 1))
            .ok_or_else(overflow)?;
        Ok(Self {
            branching,
            depth,
            leaf_count,
            vertex_count,
        })
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Number of internal (non-leaf) vertices.
    pub fn internal_count(&self) -> usize {
        self.vertex_count - self.leaf_count
    }

    /// Index of the first vertex at distance `d` from the root.
    pub fn level_start(&self, d: usize) -> usize {
        (self.branching.pow(d as u32) - 1) / (self.branching - 1)
    }

    /// Distance from the root.
    pub fn depth_of(&self, v: usize) -> Result<usize> {
        self.check_vertex(v)?;
        let mut d = 0;
        while self.level_start(d + 1) <= v {
            d += 1;
        }
        Ok(d)
    }

    /// Distance from the leaves, `h(v)`.
    pub fn height_of(&self, v: usize) -> Result<usize> {
        Ok(self.depth - self.depth_of(v)?)
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        v >= self.internal_count() && v < self.vertex_count
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (v > 0 && v < self.vertex_count).then(|| (v - 1) / self.branching)
    }

    /// Children of an internal vertex, in order.
    pub fn children(&self, v: usize) -> Result<Range<usize>> {
        self.check_vertex(v)?;
        if self.is_leaf(v) {
            return Err(Error::Index(format!("vertex {v} is a leaf and has no children")));
        }
        let first = v * self.branching + 1;
        Ok(first..first + self.branching)
    }

    /// Positions (within the leaf vector) of the leaves below `v`.
    pub fn leaf_range(&self, v: usize) -> Result<Range<usize>> {
        let d = self.depth_of(v)?;
        let span = self.branching.pow((self.depth - d) as u32);
        let j = v - self.level_start(d);
        Ok(j * span..(j + 1) * span)
    }

    /// Vertex index of the leaf at position `i` of the leaf vector.
    pub fn leaf_vertex(&self, i: usize) -> Result<usize> {
        if i >= self.leaf_count {
            return Err(Error::Index(format!(
                "leaf position {i} out of range (tree has {} leaves)",
                self.leaf_count
            )));
        }
        Ok(self.internal_count() + i)
    }

    /// Shape of the subtree rooted at `v`.
    pub fn subtree_shape(&self, v: usize) -> Result<TreeShape> {
        TreeShape::new(self.branching, self.height_of(v)?)
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v >= self.vertex_count {
            return Err(Error::Index(format!(
                "vertex {v} out of range (tree has {} vertices)",
                self.vertex_count
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_colors(k: usize) -> Result<()> {
    if !(2..=MAX_COLORS).contains(&k) {
        return Err(Error::Validation(format!(
            "number of colors must be in 2..={MAX_COLORS}, got {k}"
        )));
    }
    Ok(())
}

pub(crate) fn check_color(k: usize, c: usize) -> Result<()> {
    if c == 0 || c > k {
        return Err(Error::Validation(format!("color {c} is not in 1..={k}")));
    }
    Ok(())
}

/// A partial coloring of the leaves: one entry per leaf, `0` for ⋆ and
/// `1..=k` for a color.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LeafColoring {
    k: usize,
    values: Vec<u8>,
}

impl LeafColoring {
    pub fn new(k: usize, values: Vec<u8>) -> Result<Self> {
        check_colors(k)?;
        if let Some(bad) = values.iter().find(|&&x| x as usize > k) {
            return Err(Error::Validation(format!("leaf value {bad} exceeds k={k}")));
        }
        Ok(Self { k, values })
    }

    /// The all-⋆ (free boundary) coloring.
    pub fn stars(k: usize, len: usize) -> Result<Self> {
        Self::new(k, vec![STAR; len])
    }

    /// Parses the comma-separated text format, e.g. `1,0,3,2`.
    pub fn parse(text: &str, k: usize) -> Result<Self> {
        let values = text
            .trim()
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<u8>()
                    .map_err(|e| Error::Validation(format!("bad leaf value {tok:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(k, values)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }

    pub fn check_shape(&self, shape: &TreeShape) -> Result<()> {
        if self.values.len() != shape.leaf_count() {
            return Err(Error::Validation(format!(
                "leaf coloring has {} entries, tree has {} leaves",
                self.values.len(),
                shape.leaf_count()
            )));
        }
        Ok(())
    }

    /// Number of positions where the two colorings differ.
    pub fn hamming(&self, other: &LeafColoring) -> usize {
        self.values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Applies a color permutation given as `perm[c-1] = π(c)`; ⋆ is fixed.
    pub fn relabel(&self, perm: &[u8]) -> LeafColoring {
        let values = self
            .values
            .iter()
            .map(|&x| if x == STAR { STAR } else { perm[x as usize - 1] })
            .collect();
        LeafColoring { k: self.k, values }
    }
}

impl fmt::Display for LeafColoring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

/// Restriction of `x` to the leaves below `v`, as a coloring of a tree of
/// depth `h(v)`.
pub fn restrict_to_subtree(x: &LeafColoring, shape: &TreeShape, v: usize) -> Result<LeafColoring> {
    x.check_shape(shape)?;
    let range = shape.leaf_range(v)?;
    Ok(LeafColoring {
        k: x.k,
        values: x.values[range].to_vec(),
    })
}

/// True iff some proper coloring of the tree agrees with every colored leaf
/// of `x`. Evaluated bottom-up on feasible color sets: a vertex may take `c`
/// iff every child can take some color other than `c`.
pub fn is_allowed(shape: &TreeShape, k: usize, x: &LeafColoring) -> Result<bool> {
    check_colors(k)?;
    x.check_shape(shape)?;
    if x.k() != k {
        return Err(Error::Validation(format!("coloring uses k={}, expected k={k}", x.k())));
    }
    let r = Feasibility::new(k);
    Ok(root_acc(&r, shape.branching(), shape.depth(), &x.values).is_some_and(|s| !s.is_empty()))
}

/// A color assignment to every vertex of a tree, in level order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FullColoring {
    k: usize,
    values: Vec<u8>,
}

impl FullColoring {
    pub fn new(k: usize, values: Vec<u8>) -> Result<Self> {
        check_colors(k)?;
        if let Some(bad) = values.iter().find(|&&x| x == 0 || x as usize > k) {
            return Err(Error::Validation(format!("vertex color {bad} is not in 1..={k}")));
        }
        Ok(Self { k, values })
    }

    pub(crate) fn from_raw(k: usize, values: Vec<u8>) -> Self {
        Self { k, values }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [u8] {
        &mut self.values
    }

    pub fn color(&self, v: usize) -> u8 {
        self.values[v]
    }

    /// Leaf restriction (the last level).
    pub fn leaves(&self, shape: &TreeShape) -> LeafColoring {
        LeafColoring {
            k: self.k,
            values: self.values[shape.internal_count()..].to_vec(),
        }
    }
}

/// True iff every edge of the tree joins two different colors.
pub fn is_proper(shape: &TreeShape, sigma: &FullColoring) -> Result<bool> {
    if sigma.values.len() != shape.vertex_count() {
        return Err(Error::Validation(format!(
            "coloring has {} entries, tree has {} vertices",
            sigma.values.len(),
            shape.vertex_count()
        )));
    }
    let b = shape.branching();
    Ok((1..sigma.values.len()).all(|v| sigma.values[v] != sigma.values[(v - 1) / b]))
}

/// Bitmask over the colors `1..=k` (bit `c-1` is color `c`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ColorSet(pub u128);

impl ColorSet {
    pub fn full(k: usize) -> Self {
        if k >= 128 {
            ColorSet(u128::MAX)
        } else {
            ColorSet((1u128 << k) - 1)
        }
    }

    pub fn single(c: u8) -> Self {
        ColorSet(1u128 << (c - 1))
    }

    pub fn contains(self, c: u8) -> bool {
        c > 0 && self.0 >> (c - 1) & 1 == 1
    }

    pub fn insert(&mut self, c: u8) {
        self.0 |= 1u128 << (c - 1);
    }

    pub fn remove(&mut self, c: u8) {
        self.0 &= !(1u128 << (c - 1));
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// The unique member of a singleton set.
    pub fn sole(self) -> Option<u8> {
        (self.len() == 1).then(|| self.0.trailing_zeros() as u8 + 1)
    }

    pub fn iter(self) -> impl Iterator<Item = u8> {
        (0..128u8).filter(move |i| self.0 >> i & 1 == 1).map(|i| i + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn children_follow_level_order() {
        let t = TreeShape::new(2, 2).unwrap();
        assert_eq!(t.children(0).unwrap().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(t.children(1).unwrap().collect::<Vec<_>>(), vec![3, 4]);
        let t = TreeShape::new(3, 1).unwrap();
        assert_eq!(t.children(0).unwrap().collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn children_of_leaf_or_missing_vertex_is_an_error() {
        let t = TreeShape::new(2, 2).unwrap();
        assert!(matches!(t.children(3), Err(Error::Index(_))));
        assert!(matches!(t.children(7), Err(Error::Index(_))));
    }

    #[test]
    fn counts() {
        let t = TreeShape::new(3, 2).unwrap();
        assert_eq!(t.leaf_count(), 9);
        assert_eq!(t.vertex_count(), 13);
        let t = TreeShape::new(2, 0).unwrap();
        assert_eq!((t.leaf_count(), t.vertex_count()), (1, 1));
        assert!(t.is_leaf(0));
        assert!(TreeShape::new(1, 3).is_err());
    }

    #[test]
    fn parent_inverts_children() {
        for (b, d) in [(2, 3), (3, 2), (4, 2)] {
            let t = TreeShape::new(b, d).unwrap();
            for v in 0..t.internal_count() {
                for w in t.children(v).unwrap() {
                    assert_eq!(t.parent(w), Some(v));
                }
            }
            assert_eq!(t.parent(0), None);
        }
    }

    #[test]
    fn heights_and_leaf_ranges() {
        let t = TreeShape::new(2, 2).unwrap();
        assert_eq!(t.height_of(0).unwrap(), 2);
        assert_eq!(t.height_of(2).unwrap(), 1);
        assert_eq!(t.height_of(6).unwrap(), 0);
        assert_eq!(t.leaf_range(2).unwrap(), 2..4);
        assert_eq!(t.leaf_range(5).unwrap(), 2..3);
        assert_eq!(t.leaf_vertex(3).unwrap(), 6);
    }

    #[test]
    fn restriction_examples() {
        let t = TreeShape::new(2, 2).unwrap();
        let x = LeafColoring::new(3, vec![1, 2, 3, 1]).unwrap();
        assert_eq!(restrict_to_subtree(&x, &t, 1).unwrap().values(), &[1, 2]);
        assert_eq!(restrict_to_subtree(&x, &t, 2).unwrap().values(), &[3, 1]);
        assert_eq!(restrict_to_subtree(&x, &t, 0).unwrap(), x);
    }

    #[test]
    fn restriction_composes() {
        let t = TreeShape::new(3, 3).unwrap();
        let x = LeafColoring::new(4, (0..27).map(|i| (i % 5) as u8).collect()).unwrap();
        for v in 1..t.internal_count() {
            let xv = restrict_to_subtree(&x, &t, v).unwrap();
            let sub = t.subtree_shape(v).unwrap();
            for (i, w) in t.children(v).unwrap().enumerate() {
                let direct = restrict_to_subtree(&x, &t, w).unwrap();
                let twice = restrict_to_subtree(&xv, &sub, i + 1).unwrap();
                assert_eq!(direct, twice);
            }
        }
    }

    #[test]
    fn properness() {
        let t = TreeShape::new(2, 1).unwrap();
        let ok = FullColoring::new(3, vec![1, 2, 3]).unwrap();
        let bad = FullColoring::new(3, vec![1, 1, 2]).unwrap();
        assert!(is_proper(&t, &ok).unwrap());
        assert!(!is_proper(&t, &bad).unwrap());
        let single = TreeShape::new(2, 0).unwrap();
        assert!(is_proper(&single, &FullColoring::new(3, vec![1]).unwrap()).unwrap());
        assert!(is_proper(&single, &ok).is_err());
    }

    #[test]
    fn text_format_round_trip() {
        let x = LeafColoring::parse("1, 0,3,2\n", 3).unwrap();
        assert_eq!(x.values(), &[1, 0, 3, 2]);
        assert_eq!(x.to_string(), "1,0,3,2");
        assert!(LeafColoring::parse("1,4", 3).is_err());
        assert!(LeafColoring::parse("1,x", 3).is_err());
    }

    #[test]
    fn allowedness_examples() {
        let one = TreeShape::new(3, 1).unwrap();
        assert!(!is_allowed(&one, 3, &LeafColoring::new(3, vec![1, 2, 3]).unwrap()).unwrap());
        let bin = TreeShape::new(2, 1).unwrap();
        assert!(is_allowed(&bin, 3, &LeafColoring::new(3, vec![1, 1]).unwrap()).unwrap());
        for (b, d, k) in [(2, 0, 2), (2, 3, 3), (3, 2, 3), (5, 2, 2)] {
            let s = TreeShape::new(b, d).unwrap();
            assert!(is_allowed(&s, k, &LeafColoring::stars(k, s.leaf_count()).unwrap()).unwrap());
        }
        // k = 2 forces alternating colors along every path.
        let s = TreeShape::new(2, 2).unwrap();
        assert!(is_allowed(&s, 2, &LeafColoring::new(2, vec![1, 1, 1, 0]).unwrap()).unwrap());
        assert!(!is_allowed(&s, 2, &LeafColoring::new(2, vec![1, 2, 0, 0]).unwrap()).unwrap());
        assert!(is_allowed(&s, 3, &LeafColoring::new(2, vec![1, 1, 1, 1]).unwrap()).is_err());
    }

    #[test]
    fn enough_colors_allow_every_full_leaf_coloring() {
        for (b, d) in [(2, 1), (2, 2), (3, 1), (3, 2)] {
            let s = TreeShape::new(b, d).unwrap();
            let k = b + 1;
            let n = s.leaf_count();
            let mut values = vec![1u8; n];
            loop {
                let x = LeafColoring::new(k, values.clone()).unwrap();
                assert!(is_allowed(&s, k, &x).unwrap(), "{x}");
                let Some(i) = values.iter().position(|&v| (v as usize) < k) else { break };
                values[i] += 1;
                values[..i].iter_mut().for_each(|v| *v = 1);
            }
        }
    }

    #[test]
    fn color_sets() {
        let mut s = ColorSet::full(5);
        assert_eq!(s.len(), 5);
        s.remove(3);
        assert!(!s.contains(3));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![1, 2, 4, 5]);
        assert_eq!(ColorSet::single(4).sole(), Some(4));
        assert_eq!(ColorSet::full(128).len(), 128);
    }
}
