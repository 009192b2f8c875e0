use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::{check_input, subtree_counts, ColorDistribution};
use crate::error::{Error, Result};
use crate::tree::{check_color, LeafColoring, TreeShape, STAR};

/// Exact marginal of the color at `u` given the leaf coloring `x`.
///
/// * `removed_child`: a child of `u` whose whole subtree is deleted first.
/// * `parent_color`: pins the parent of `u` (a virtual parent when `u` is
///   the root). Given the parent color, the rest of the tree above `u` is
///   irrelevant, so only the subtree of `u` is used.
///
/// Without `parent_color` the marginal combines the upward counts from the
/// subtree of `u` with a downward message carrying the counts of everything
/// outside that subtree.
pub fn vertex_conditional_marginal(
    shape: &TreeShape,
    k: usize,
    x: &LeafColoring,
    u: usize,
    removed_child: Option<usize>,
    parent_color: Option<usize>,
) -> Result<ColorDistribution> {
    check_input(shape, k, x)?;
    if u >= shape.vertex_count() {
        return Err(Error::Index(format!("vertex {u} out of range")));
    }
    if let Some(w) = removed_child {
        if shape.parent(w) != Some(u) {
            return Err(Error::Index(format!("vertex {w} is not a child of {u}")));
        }
    }
    if let Some(c) = parent_color {
        check_color(k, c)?;
    }

    let counts = |v: usize| -> Result<Vec<BigUint>> {
        let range = shape.leaf_range(v)?;
        Ok(subtree_counts(shape.branching(), shape.height_of(v)?, k, &x.values()[range]))
    };
    // Σ_{f≠c} Ω_w(f): the number of ways child w leaves room for color c above it.
    let room = |omega: Vec<BigUint>| -> Vec<BigUint> {
        let total: BigUint = omega.iter().sum();
        omega.into_iter().map(|o| &total - o).collect()
    };

    let mut own: Vec<BigUint> = if shape.is_leaf(u) {
        let xv = x.values()[u - shape.internal_count()];
        (1..=k)
            .map(|c| if xv == STAR || xv as usize == c { BigUint::one() } else { BigUint::zero() })
            .collect()
    } else {
        let mut acc = vec![BigUint::one(); k];
        for w in shape.children(u)? {
            if Some(w) == removed_child {
                continue;
            }
            for (a, r) in acc.iter_mut().zip(room(counts(w)?)) {
                *a *= r;
            }
        }
        acc
    };

    let outside: Vec<BigUint> = match parent_color {
        Some(pc) => (1..=k)
            .map(|c| if c == pc { BigUint::zero() } else { BigUint::one() })
            .collect(),
        None => outside_counts(shape, k, u, &counts, &room)?,
    };

    for (o, w) in own.iter_mut().zip(outside) {
        *o *= w;
    }
    if own.iter().all(|o| o.is_zero()) {
        return Err(Error::InfeasibleBoundary(format!(
            "no proper coloring is consistent with the constraints at vertex {u}"
        )));
    }
    ColorDistribution::from_counts(&own)
}

/// For each color `c`, the number of colorings of the tree outside the
/// subtree of `u` that are consistent with the leaves and compatible with
/// `u` having color `c`.
fn outside_counts(
    shape: &TreeShape,
    k: usize,
    u: usize,
    counts: &dyn Fn(usize) -> Result<Vec<BigUint>>,
    room: &dyn Fn(Vec<BigUint>) -> Vec<BigUint>,
) -> Result<Vec<BigUint>> {
    let mut path = vec![u];
    while let Some(p) = shape.parent(*path.last().unwrap()) {
        path.push(p);
    }
    path.reverse();
    // outside[c] for the current vertex on the root→u path; the root has
    // nothing outside its subtree.
    let mut outside = vec![BigUint::one(); k];
    for pair in path.windows(2) {
        let (p, child) = (pair[0], pair[1]);
        // Weight of the parent taking color a, excluding child's subtree.
        let mut at_parent = outside;
        for s in shape.children(p)? {
            if s == child {
                continue;
            }
            for (a, r) in at_parent.iter_mut().zip(room(counts(s)?)) {
                *a *= r;
            }
        }
        let total: BigUint = at_parent.iter().sum();
        outside = at_parent.iter().map(|a| &total - a).collect();
    }
    Ok(outside)
}
