//! Classifying leaf colorings as unbiasing and estimating how often a
//! broadcast coloring fails to be.
//!
//!     cargo run --release --example unbiasing_tail

use treecolor::broadcast::sample_leaves;
use treecolor::unbiasing::{
    count_unused_colors, estimate_q, is_highly_unbiasing, is_unbiasing, star_out, unbiasing_levels,
    unbiasing_pmax_report, UnbiasingParams,
};
use treecolor::{LeafColoring, RandomSource, Result, TreeShape};

fn main() -> Result<()> {
    let params = UnbiasingParams::new(1.0 / 3.0)?;
    let shape = TreeShape::new(4, 1)?;
    println!(
        "Δ=4, ε=1/3: a height-1 vertex needs more than {:.3} unused colors",
        params.base_threshold(4)
    );
    for text in ["1,1,1,1", "1,2,1,1", "1,2,3,1"] {
        let x = LeafColoring::parse(text, 3)?;
        println!(
            "  {text}: {} unused, unbiasing = {}",
            count_unused_colors(x.values(), 3),
            is_unbiasing(&shape, 3, &params, &x)?
        );
    }

    let mut rng = RandomSource::new(11);
    let deep = TreeShape::new(4, 3)?;
    let x = sample_leaves(&deep, 5, &mut rng)?;
    let levels = unbiasing_levels(&deep, 5, &params, &x)?;
    for (h, row) in levels.iter().enumerate() {
        let good = row.iter().filter(|b| **b).count();
        println!("height {}: {good}/{} vertices unbiasing", h + 1, row.len());
    }
    println!("highly unbiasing: {}", is_highly_unbiasing(&deep, 5, &params, &x)?);
    let starred = star_out(&x, &[0, 1, 2, 3])?;
    println!("with the first block starred: {}", is_unbiasing(&deep, 5, &params, &starred)?);

    for depth in 1..=4 {
        let s = TreeShape::new(4, depth)?;
        let q = estimate_q(&s, 5, &params, 20_000, false, &mut rng)?;
        println!(
            "q̂ at depth {depth}: {:.4} ± {:.4}, Wilson [{:.4}, {:.4}]",
            q.mean, q.stderr, q.wilson95[0], q.wilson95[1]
        );
    }
    let r = unbiasing_pmax_report(&deep, 5, &params, 5_000, &mut rng)?;
    println!(
        "p_max on unbiasing colorings: mean {:.4}, max {:.4} (Δ^(−ε/2) = {:.4})",
        r.mean_pmax, r.max_pmax, r.reference
    );
    Ok(())
}
