//! The exact engine against direct enumeration, plus its algebraic
//! invariants as property tests.

mod common;

use common::{all_words, enumerate_proper, is_ancestor_or_self, leaf_coloring, normalize};
use num_bigint::BigUint;
use proptest::prelude::*;
use treecolor::exact::{
    count_extensions, root_counts_bruteforce, root_marginal, root_marginal_bruteforce, vertex_conditional_marginal,
    Backend, ColorDistribution,
};
use treecolor::tree::{is_allowed, restrict_to_subtree};
use treecolor::{Error, LeafColoring, TreeShape};

fn brute_vertex(
    shape: &TreeShape,
    k: usize,
    x: &LeafColoring,
    u: usize,
    removed: Option<usize>,
    parent: Option<usize>,
) -> Option<Vec<num_rational::BigRational>> {
    let mut counts = vec![0u64; k];
    match parent {
        Some(p) => {
            let sub = shape.subtree_shape(u).unwrap();
            let xu = restrict_to_subtree(x, shape, u).unwrap();
            // Map the removed child into the subtree's indexing: children of
            // the subtree root are 1..=Δ.
            let removed_local = removed.map(|w| 1 + (w - shape.children(u).unwrap().start));
            let skip = |v: usize| removed_local.is_some_and(|w| is_ancestor_or_self(&sub, w, v));
            enumerate_proper(&sub, k, xu.values(), &skip, Some(p as u8), &mut |c| counts[c[0] as usize - 1] += 1);
        }
        None => {
            let skip = |v: usize| removed.is_some_and(|w| is_ancestor_or_self(shape, w, v));
            enumerate_proper(shape, k, x.values(), &skip, None, &mut |c| counts[c[u] as usize - 1] += 1);
        }
    }
    normalize(&counts)
}

#[test]
fn vertex_marginal_matches_enumeration() {
    for (delta, depth, k) in [(2, 2, 3), (2, 2, 4), (3, 2, 3), (2, 3, 3)] {
        let shape = TreeShape::new(delta, depth).unwrap();
        let words = all_words(shape.leaf_count(), 0, k as u8);
        let step = (words.len() / 150).max(1);
        for w in words.iter().step_by(step) {
            let x = LeafColoring::new(k, w.clone()).unwrap();
            for u in 0..shape.vertex_count() - shape.leaf_count() {
                let children: Vec<Option<usize>> =
                    std::iter::once(None).chain(shape.children(u).unwrap().map(Some)).collect();
                for removed in children {
                    for parent in std::iter::once(None).chain((1..=k).map(Some)) {
                        let want = brute_vertex(&shape, k, &x, u, removed, parent);
                        let got = vertex_conditional_marginal(&shape, k, &x, u, removed, parent);
                        match (want, got) {
                            (Some(p), Ok(ColorDistribution::Rational(q))) => assert_eq!(p, q, "{x} u={u}"),
                            (None, Err(Error::InfeasibleBoundary(_))) => {}
                            (w, g) => panic!("{x} u={u} removed={removed:?} parent={parent:?}: {w:?} vs {g:?}"),
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn extension_counts_match_enumeration() {
    for (delta, depth, k) in [(2, 2, 3), (3, 1, 4), (2, 2, 5)] {
        let shape = TreeShape::new(delta, depth).unwrap();
        for w in all_words(shape.leaf_count(), 0, k as u8) {
            let x = LeafColoring::new(k, w).unwrap();
            let total: u64 = root_counts_bruteforce(&shape, k, &x).unwrap().iter().sum();
            assert_eq!(count_extensions(&shape, k, &x).unwrap(), BigUint::from(total));
            assert_eq!(is_allowed(&shape, k, &x).unwrap(), total > 0);
        }
    }
}

#[test]
fn enough_colors_make_every_full_boundary_allowed() {
    for delta in [2, 3] {
        for depth in 1..=2 {
            let k = delta + 1;
            let shape = TreeShape::new(delta, depth).unwrap();
            for w in all_words(shape.leaf_count(), 1, k as u8) {
                let x = LeafColoring::new(k, w).unwrap();
                assert!(is_allowed(&shape, k, &x).unwrap(), "Δ={delta} depth={depth} {x}");
            }
        }
    }
}

#[test]
fn all_star_boundary_is_uniform() {
    for (delta, depth, k) in [(2, 0, 3), (2, 3, 3), (3, 2, 4), (5, 2, 7), (2, 6, 3)] {
        let shape = TreeShape::new(delta, depth).unwrap();
        let x = LeafColoring::stars(k, shape.leaf_count()).unwrap();
        let backend = if depth > 3 { Backend::Float } else { Backend::Rational };
        let p = root_marginal(&shape, k, &x, None, backend).unwrap();
        assert_eq!(p, ColorDistribution::uniform(k, backend));
    }
}

fn shape_and_coloring() -> impl Strategy<Value = (TreeShape, usize, LeafColoring)> {
    (2usize..=3, 1usize..=3, 3usize..=5).prop_flat_map(|(delta, depth, k)| {
        let depth = if delta == 3 { depth.min(2) } else { depth };
        let shape = TreeShape::new(delta, depth).unwrap();
        let n = shape.leaf_count();
        proptest::collection::vec(any::<u8>(), n).prop_map(move |raw| (shape.clone(), k, leaf_coloring(k, &raw)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rational_and_float_agree_with_enumeration((shape, k, x) in shape_and_coloring()) {
        let brute = root_marginal_bruteforce(&shape, k, &x);
        let exact = root_marginal(&shape, k, &x, None, Backend::Rational);
        let float = root_marginal(&shape, k, &x, None, Backend::Float);
        match (brute, exact, float) {
            (Ok(b), Ok(e), Ok(f)) => {
                prop_assert_eq!(&b, &e);
                let total: f64 = f.to_f64().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                for (p, q) in b.to_f64().iter().zip(f.to_f64()) {
                    prop_assert!((p - q).abs() < 1e-10);
                }
                let sum = e.as_rational().unwrap().iter().fold(num_rational::BigRational::from_integer(0.into()), |a, b| a + b);
                prop_assert_eq!(sum, num_rational::BigRational::from_integer(1.into()));
            }
            (Err(Error::InfeasibleBoundary(_)), Err(Error::InfeasibleBoundary(_)), Err(Error::InfeasibleBoundary(_))) => {}
            other => prop_assert!(false, "backends disagree: {:?}", other),
        }
    }

    #[test]
    fn relabeling_permutes_the_marginal((shape, k, x) in shape_and_coloring(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut perm: Vec<u8> = (1..=k as u8).collect();
        perm.shuffle(&mut treecolor::RandomSource::new(seed));
        let y = x.relabel(&perm);
        match (root_marginal(&shape, k, &x, None, Backend::Rational), root_marginal(&shape, k, &y, None, Backend::Rational)) {
            (Ok(p), Ok(q)) => {
                let p = p.as_rational().unwrap().to_vec();
                let q = q.as_rational().unwrap();
                for c in 0..k {
                    prop_assert_eq!(&q[perm[c] as usize - 1], &p[c]);
                }
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "relabeling changed feasibility"),
        }
    }

    #[test]
    fn restriction_composes((shape, k, x) in shape_and_coloring(), pick in any::<prop::sample::Index>()) {
        prop_assert_eq!(restrict_to_subtree(&x, &shape, 0).unwrap(), x.clone());
        let internal = shape.vertex_count() - shape.leaf_count();
        let v = pick.index(internal.max(1));
        let xv = restrict_to_subtree(&x, &shape, v).unwrap();
        let sub = shape.subtree_shape(v).unwrap();
        if !sub.is_leaf(0) {
            for (i, w) in shape.children(v).unwrap().enumerate() {
                let direct = restrict_to_subtree(&x, &shape, w).unwrap();
                let twice = restrict_to_subtree(&xv, &sub, 1 + i).unwrap();
                prop_assert_eq!(direct, twice);
            }
        }
        let _ = k;
    }

    #[test]
    fn parent_child_links((delta, depth) in (2usize..=6, 0usize..=4)) {
        let shape = TreeShape::new(delta, depth).unwrap();
        for v in 0..shape.vertex_count() {
            if shape.is_leaf(v) {
                continue;
            }
            for w in shape.children(v).unwrap() {
                prop_assert_eq!(shape.parent(w), Some(v));
            }
        }
    }
}
