#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use treecolor::{LeafColoring, TreeShape};

/// Every vector in `lo..=hi` of length `len`, in lexicographic order.
pub fn all_words(len: usize, lo: u8, hi: u8) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                (lo..=hi).map(move |c| {
                    let mut w = w.clone();
                    w.push(c);
                    w
                })
            })
            .collect();
    }
    out
}

pub fn is_ancestor_or_self(shape: &TreeShape, a: usize, mut v: usize) -> bool {
    loop {
        if v == a {
            return true;
        }
        match shape.parent(v) {
            Some(p) => v = p,
            None => return false,
        }
    }
}

/// Depth-first enumeration of proper colorings agreeing with the colored
/// leaves of `x`. Vertices with `skip(v)` are left uncolored (0) and impose
/// nothing. `root_avoid` forbids one root color.
pub fn enumerate_proper(
    shape: &TreeShape,
    k: usize,
    x: &[u8],
    skip: &dyn Fn(usize) -> bool,
    root_avoid: Option<u8>,
    visit: &mut dyn FnMut(&[u8]),
) {
    let n = shape.vertex_count();
    let first_leaf = n - shape.leaf_count();
    let mut colors = vec![0u8; n];
    fn go(
        v: usize,
        shape: &TreeShape,
        k: usize,
        x: &[u8],
        first_leaf: usize,
        skip: &dyn Fn(usize) -> bool,
        root_avoid: Option<u8>,
        colors: &mut Vec<u8>,
        visit: &mut dyn FnMut(&[u8]),
    ) {
        if v == colors.len() {
            visit(colors);
            return;
        }
        if skip(v) {
            colors[v] = 0;
            go(v + 1, shape, k, x, first_leaf, skip, root_avoid, colors, visit);
            return;
        }
        let parent = shape.parent(v).map(|p| colors[p]);
        for c in 1..=k as u8 {
            if parent == Some(c) || (v == 0 && root_avoid == Some(c)) {
                continue;
            }
            if v >= first_leaf && x[v - first_leaf] != 0 && x[v - first_leaf] != c {
                continue;
            }
            colors[v] = c;
            go(v + 1, shape, k, x, first_leaf, skip, root_avoid, colors, visit);
        }
        colors[v] = 0;
    }
    go(0, shape, k, x, first_leaf, skip, root_avoid, &mut colors, visit);
}

/// Normalized counts as rationals; `None` when all counts vanish.
pub fn normalize(counts: &[u64]) -> Option<Vec<BigRational>> {
    let total: u64 = counts.iter().sum();
    (total > 0).then(|| {
        counts
            .iter()
            .map(|&c| BigRational::new(BigInt::from(c), BigInt::from(total)))
            .collect()
    })
}

/// Leaf colorings of `shape` drawn from a flat list of proptest values.
pub fn leaf_coloring(k: usize, raw: &[u8]) -> LeafColoring {
    LeafColoring::new(k, raw.iter().map(|r| r % (k as u8 + 1)).collect()).unwrap()
}

pub fn r(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}
