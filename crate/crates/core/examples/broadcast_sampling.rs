//! The broadcast process: leaves of a random proper coloring, with and
//! without a fixed root, and the down-up walk on the root color.
//!
//!     cargo run --example broadcast_sampling

use treecolor::broadcast::{sample_down_up, sample_full, LeafSampler};
use treecolor::exact::{root_marginal, Backend};
use treecolor::stats::chi_square_gof;
use treecolor::{RandomSource, Result, TreeShape};

fn main() -> Result<()> {
    let shape = TreeShape::new(3, 2)?;
    let k = 4;
    let mut rng = RandomSource::new(7);

    let full = sample_full(&shape, k, &mut rng, Some(2))?;
    println!("one coloring with root 2: {:?}", full.values());

    let mut sampler = LeafSampler::new(&shape, k)?;
    for _ in 0..3 {
        println!("leaves: {:?}", sampler.sample(&mut rng, None)?);
    }

    // Leaf 0 sits two generations below the root. Given root 1 its color is 1
    // with probability 1/(k−1) and each other color with (k−2)/(k−1)².
    let n = 30_000u64;
    let mut counts = vec![0u64; k];
    for _ in 0..n {
        counts[sampler.sample(&mut rng, Some(1))?[0] as usize - 1] += 1;
    }
    let q = (k - 1) as f64;
    let expected: Vec<f64> = (1..=k).map(|c| if c == 1 { 1.0 / q } else { (q - 1.0) / (q * q) }).collect();
    println!("leaf 0 given root 1: {counts:?}, χ² p = {:.3}", chi_square_gof(&counts, &expected)?);

    // Down-up: root c, broadcast down, then resample the root from its
    // posterior given the leaves.
    let mut back = vec![0u64; k];
    for _ in 0..5_000 {
        back[sample_down_up(&shape, k, 1, &mut rng)? - 1] += 1;
    }
    println!("down-up from root 1 returns to: {back:?}");

    let x = sampler.sample(&mut rng, None)?.to_vec();
    let x = treecolor::LeafColoring::new(k, x)?;
    let post = root_marginal(&shape, k, &x, None, Backend::Float)?;
    println!("posterior of the root for {:?}: {:?}", x.values(), post.to_f64());
    Ok(())
}
