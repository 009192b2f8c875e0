//! Entropy bookkeeping for block dynamics: the per-block decomposition, the
//! convexity bound, and the ratio of local to global entropy.
//!
//!     cargo run --release --example entropy_diagnostics

use rand_distr::{Distribution, LogNormal};
use treecolor::dynamics::{build_transition_matrix, entropy_checks, entropy_functional, entropy_ratio_report};
use treecolor::{RandomSource, Result, TreeShape};

fn main() -> Result<()> {
    println!("Ent of a point mass on 8 states: {:.5}", entropy_functional(&[0., 0., 0., 1., 0., 0., 0., 0.])?);

    let shape = TreeShape::new(2, 1)?;
    let m = build_transition_matrix(&shape, 4, 0)?;
    let law = LogNormal::new(0.0, 1.0).expect("valid");
    let mut rng = RandomSource::new(13);
    let mut worst = 0.0f64;
    let mut slack = f64::INFINITY;
    for _ in 0..200 {
        let f: Vec<f64> = (0..m.len()).map(|_| law.sample(&mut rng)).collect();
        let c = entropy_checks(&m, &f)?;
        worst = worst.max(c.max_block_residual);
        slack = slack.min(c.convexity_slack);
    }
    println!("over 200 test functions: block identity residual ≤ {worst:.2e}, convexity slack ≥ {slack:.2e}");

    for (k, block_depth) in [(4, 0), (3, 1)] {
        let r = entropy_ratio_report(&shape, k, block_depth, 200, &mut rng)?;
        println!(
            "k={k} block depth {block_depth}: {} states on {} vertices, min E/Ent = {:.4}, mean {:.4}",
            r.states, r.vertices, r.min_ratio, r.mean_ratio
        );
    }
    Ok(())
}
