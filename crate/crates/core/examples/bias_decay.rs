//! How fast the root forgets its color: exact α and β on small trees, then
//! Monte Carlo α̂ against depth in a uniqueness and a reconstruction regime.
//!
//!     cargo run --release --example bias_decay

use treecolor::coupling::{concentration_tail, estimate_alpha, estimate_beta_tv};
use treecolor::exact::exact_bias;
use treecolor::{RandomSource, Result, TreeShape};

fn main() -> Result<()> {
    for depth in 0..=3 {
        let r = exact_bias(&TreeShape::new(2, depth)?, 3)?;
        println!(
            "Δ=2 k=3 depth {depth}: α = {}, β = {}, sandwich holds: {}",
            r.alpha[0],
            r.beta[0],
            r.satisfies_sandwich()
        );
    }

    let mut rng = RandomSource::new(5);
    for (delta, k, label) in [(2, 5, "uniqueness"), (12, 3, "reconstruction")] {
        println!("{label} regime, Δ={delta}, k={k}");
        for depth in 1..=4 {
            let a = estimate_alpha(&TreeShape::new(delta, depth)?, k, 1, 4_000, &mut rng)?;
            println!("  depth {depth}: α̂ = {:.5} ± {:.5}", a.mean, a.stderr);
        }
    }

    let shape = TreeShape::new(2, 3)?;
    let b = estimate_beta_tv(&shape, 3, 1, 2, 20_000, &mut rng)?;
    println!(
        "down-up TV, Δ=2 k=3 depth 3: plug-in {:.4} ± {:.4}, coupling bound {:.4} ± {:.4}",
        b.plug_in.mean, b.plug_in.stderr, b.coupling_bound.mean, b.coupling_bound.stderr
    );
    let t = concentration_tail(&shape, 3, 1, 0.2, 20_000, &mut rng)?;
    println!("Pr[|P(X,1) − 1/3| > 0.2] = {:.4} ± {:.4}", t.mean, t.stderr);
    Ok(())
}
