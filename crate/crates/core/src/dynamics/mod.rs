//! Heat-bath block dynamics on proper colorings of a complete tree.
//!
//! One step picks a vertex `v` uniformly and resamples the block of
//! descendants of `v` within `block_depth` generations, uniformly among the
//! colorings that are proper together with the frozen outside.

mod entropy;
mod matrix;

use rand::Rng;
use serde::Serialize;

pub use entropy::{entropy_checks, entropy_functional, entropy_ratio_report, local_entropy_sum, EntropyCheck, EntropyRatioReport};
pub use matrix::{
    build_transition_matrix, mixing_time_exact, stationary_and_gap, GapReport, MixingTime, StateSpace,
    TransitionMatrix, MATRIX_STATE_LIMIT, MIXING_STATE_LIMIT,
};

use crate::broadcast::{draw_color, sample_full};
use crate::error::{Error, Result};
use crate::tree::{check_colors, is_proper, ColorSet, FullColoring, TreeShape};

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsState {
    shape: TreeShape,
    k: usize,
    coloring: FullColoring,
    time: u64,
}

impl DynamicsState {
    pub fn new(shape: &TreeShape, k: usize, coloring: FullColoring) -> Result<Self> {
        check_colors(k)?;
        if coloring.k() != k {
            return Err(Error::Validation(format!("coloring uses k={}, expected {k}", coloring.k())));
        }
        if !is_proper(shape, &coloring)? {
            return Err(Error::Validation("initial coloring is not proper".into()));
        }
        Ok(Self {
            shape: shape.clone(),
            k,
            coloring,
            time: 0,
        })
    }

    /// Starts from a uniformly random proper coloring.
    pub fn random<R: Rng + ?Sized>(shape: &TreeShape, k: usize, rng: &mut R) -> Result<Self> {
        let coloring = sample_full(shape, k, rng, None)?;
        Self::new(shape, k, coloring)
    }

    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn coloring(&self) -> &FullColoring {
        &self.coloring
    }

    pub fn time(&self) -> u64 {
        self.time
    }
}

/// Vertices of `v`'s subtree within `block_depth` generations of `v`, in
/// level order.
pub fn block_vertices(shape: &TreeShape, v: usize, block_depth: usize) -> Result<Vec<usize>> {
    Ok(block_levels(shape, v, block_depth)?.into_iter().flatten().collect())
}

/// Block vertices grouped by generation below `v`; each generation is a
/// contiguous index range.
pub(crate) fn block_levels(shape: &TreeShape, v: usize, block_depth: usize) -> Result<Vec<std::ops::Range<usize>>> {
    let h = shape.height_of(v)?;
    let b = shape.branching();
    let mut levels = vec![v..v + 1];
    for _ in 0..block_depth.min(h) {
        let last = levels.last().unwrap();
        let start = last.start * b + 1;
        levels.push(start..start + last.len() * b);
    }
    Ok(levels)
}

/// Resamples the block `B_{v, block_depth}` uniformly given the colors
/// outside it.
///
/// Colors of the frontier's outside children become per-vertex forbidden
/// sets. Upward pass: each block vertex gets weights proportional to the
/// number of proper colorings of its part of the block. Downward pass:
/// sample top-down, each vertex avoiding its parent's color.
pub fn heat_bath_block<R: Rng + ?Sized>(
    state: &mut DynamicsState,
    v: usize,
    block_depth: usize,
    rng: &mut R,
) -> Result<()> {
    let shape = &state.shape;
    let k = state.k;
    let b = shape.branching();
    let levels = block_levels(shape, v, block_depth)?;
    let colors = state.coloring.values_mut();
    let full = ColorSet::full(k);
    // weights[level][i * k + c]
    let mut weights: Vec<Vec<f64>> = levels.iter().map(|r| vec![0.0; r.len() * k]).collect();

    for (li, range) in levels.iter().enumerate().rev() {
        for (i, u) in range.clone().enumerate() {
            let allowed = if li + 1 == levels.len() && !shape.is_leaf(u) {
                let mut a = full;
                for w in shape.children(u)? {
                    a.remove(colors[w]);
                }
                a
            } else {
                full
            };
            let mut w: Vec<f64> = (1..=k).map(|c| if allowed.contains(c as u8) { 1.0 } else { 0.0 }).collect();
            if li + 1 < levels.len() {
                let below = &weights[li + 1][i * b * k..(i + 1) * b * k];
                for child in below.chunks_exact(k) {
                    let total: f64 = child.iter().sum();
                    for (wc, cc) in w.iter_mut().zip(child) {
                        *wc *= total - cc;
                    }
                }
            }
            let total: f64 = w.iter().sum();
            if total > 0.0 {
                w.iter_mut().for_each(|x| *x /= total);
            }
            weights[li][i * k..(i + 1) * k].copy_from_slice(&w);
        }
    }

    let mut p = vec![0.0; k];
    for (li, range) in levels.iter().enumerate() {
        for (i, u) in range.clone().enumerate() {
            let parent = shape.parent(u).map(|q| colors[q]);
            p.copy_from_slice(&weights[li][i * k..(i + 1) * k]);
            if let Some(pc) = parent {
                p[pc as usize - 1] = 0.0;
            }
            let total: f64 = p.iter().sum();
            if total <= 0.0 {
                return Err(Error::InfeasibleBoundary(format!(
                    "no proper recoloring of the block at vertex {v}"
                )));
            }
            p.iter_mut().for_each(|x| *x /= total);
            colors[u] = draw_color(rng, &p) as u8;
        }
    }
    debug_assert!(is_proper(shape, &state.coloring).unwrap());
    Ok(())
}

/// One transition: a uniform vertex, then a heat-bath update of its block.
pub fn step<R: Rng + ?Sized>(state: &mut DynamicsState, block_depth: usize, rng: &mut R) -> Result<()> {
    let v = rng.random_range(0..state.shape.vertex_count());
    heat_bath_block(state, v, block_depth, rng)?;
    state.time += 1;
    Ok(())
}

/// Summary of a simulated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub steps: u64,
    pub block_depth: usize,
    /// Fraction of time the root spent in each color.
    pub root_color_freq: Vec<f64>,
    pub final_state: String,
    pub proper: bool,
}

/// Runs `steps` transitions from `state`, recording root-color occupancy.
pub fn run_chain<R: Rng + ?Sized>(
    state: &mut DynamicsState,
    block_depth: usize,
    steps: u64,
    rng: &mut R,
) -> Result<RunSummary> {
    let mut freq = vec![0u64; state.k];
    for _ in 0..steps {
        step(state, block_depth, rng)?;
        freq[state.coloring.color(0) as usize - 1] += 1;
    }
    let proper = is_proper(&state.shape, &state.coloring)?;
    Ok(RunSummary {
        steps,
        block_depth,
        root_color_freq: freq.iter().map(|&f| f as f64 / steps.max(1) as f64).collect(),
        final_state: state
            .coloring
            .values()
            .iter()
            .map(u8::to_string)
            .collect::<Vec<_>>()
            .join(","),
        proper,
    })
}
