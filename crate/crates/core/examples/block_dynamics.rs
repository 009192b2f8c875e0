//! Heat-bath block dynamics: a simulated run, then the exact transition
//! matrix of a tiny instance with its gap and mixing time.
//!
//!     cargo run --release --example block_dynamics

use treecolor::dynamics::{
    block_vertices, build_transition_matrix, mixing_time_exact, run_chain, stationary_and_gap, DynamicsState,
    StateSpace, TransitionMatrix,
};
use treecolor::{RandomSource, Result, TreeShape};

fn main() -> Result<()> {
    let shape = TreeShape::new(2, 3)?;
    println!("block of vertex 1 at depth 1: {:?}", block_vertices(&shape, 1, 1)?);

    let mut rng = RandomSource::new(9);
    let mut state = DynamicsState::random(&shape, 3, &mut rng)?;
    let run = run_chain(&mut state, 1, 50_000, &mut rng)?;
    println!("root color occupancy over {} steps: {:?}", run.steps, run.root_color_freq);

    let small = TreeShape::new(2, 1)?;
    for (k, block_depth) in [(4, 0), (3, 0), (3, 1)] {
        let m = build_transition_matrix(&small, k, block_depth)?;
        let gap = stationary_and_gap(&m);
        println!(
            "k={k} block depth {block_depth}: {} states, symmetric {}, gap {:.4}, T_mix {:?}",
            m.len(),
            m.is_symmetric(),
            gap.spectral_gap,
            mixing_time_exact(&m)?
        );
    }

    // The root's own block covers the whole tree: one update gives a fresh
    // uniform sample.
    let root = TransitionMatrix::block_kernel(StateSpace::new(&small, 3, 1)?, 0)?;
    println!("root block kernel is the uniform projection: {}", root.is_rank_one_uniform());

    let mut csv = Vec::new();
    build_transition_matrix(&small, 3, 0)?.write_csv(&mut csv)?;
    let text = String::from_utf8(csv).expect("utf-8");
    println!("first matrix entries:\n{}", text.lines().take(4).collect::<Vec<_>>().join("\n"));
    Ok(())
}
