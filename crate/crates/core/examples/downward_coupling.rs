//! The downward coupling of two broadcasts from different root colors, its
//! disagreement branching process, and the one-neighbor channel bound.
//!
//!     cargo run --release --example downward_coupling

use treecolor::coupling::{
    downward_couple, hamming_tail, interpolation_path, simulate_disagreement_process, single_disagreement_report,
    upward_channel_tv,
};
use treecolor::exact::{Backend, ColorDistribution};
use treecolor::stats::Summary;
use treecolor::{RandomSource, Result, TreeShape};

fn main() -> Result<()> {
    let (delta, k, depth) = (3, 4, 3);
    let shape = TreeShape::new(delta, depth)?;
    let mut rng = RandomSource::new(3);

    let pair = downward_couple(&shape, k, 1, 2, &mut rng)?;
    println!("X = {:?}", pair.x().values());
    println!("Y = {:?}", pair.y().values());
    println!("disagree at {:?}", pair.disagreements());

    let tree: Summary = (0..20_000)
        .map(|_| downward_couple(&shape, k, 1, 2, &mut rng).map(|p| p.hamming() as f64))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    let branching: Summary = (0..20_000)
        .map(|_| simulate_disagreement_process(delta, k, depth, &mut rng).map(|d| d as f64))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    let expect = (delta as f64 / (k - 1) as f64).powi(depth as i32);
    println!("mean Hamming: tree {:.3} ± {:.3}, branching {:.3} ± {:.3}, exact {expect:.3}",
        tree.mean(), tree.stderr(), branching.mean(), branching.stderr());
    let tail = hamming_tail(delta, k, depth, 4.0, 20_000, &mut rng)?;
    println!("Pr[D > 4] = {:.4} ± {:.4}", tail.mean, tail.stderr);

    // Channel bound for a single vertex law.
    let dist = ColorDistribution::Float(vec![0.5, 0.3, 0.2]);
    println!("channel TV(1, 2) for (0.5, 0.3, 0.2): {:.4}", upward_channel_tv(&dist, 1, 2)?.to_f64());
    let u = ColorDistribution::uniform(3, Backend::Rational);
    println!("channel TV(1, 2) for uniform k=3: {:?}", upward_channel_tv(&u, 1, 2)?);

    // Walk from X to Y one leaf at a time; each step is a single
    // disagreement whose effect on the root is bounded by a channel product.
    let small = TreeShape::new(2, 3)?;
    let pair = loop {
        let p = downward_couple(&small, 3, 1, 3, &mut rng)?;
        if p.hamming() >= 2 {
            break p;
        }
    };
    let path = interpolation_path(&pair.x(), &pair.y())?;
    println!("path of {} colorings from X to Y", path.len());
    for w in path.windows(2) {
        let r = single_disagreement_report(&small, 3, &w[0], &w[1])?;
        println!("  leaf {}: exact TV {:.5} ≤ channel product {:.5}", r.leaf, r.exact_tv, r.channel_product);
    }
    Ok(())
}
