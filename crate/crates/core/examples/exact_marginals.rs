//! Root marginals of a small tree given its leaves, in both backends, with
//! the brute-force enumeration alongside.
//!
//!     cargo run --example exact_marginals

use treecolor::exact::{
    count_extensions, root_marginal, root_marginal_bruteforce, total_colorings, tv_root, vertex_conditional_marginal,
    Backend,
};
use treecolor::{LeafColoring, Result, TreeShape};

fn main() -> Result<()> {
    let shape = TreeShape::new(2, 2)?;
    let k = 4;
    println!("Δ=2, depth 2, k={k}: {} proper colorings in total", total_colorings(&shape, k));

    let x = LeafColoring::parse("1,2,0,3", k)?;
    let exact = root_marginal(&shape, k, &x, None, Backend::Rational)?;
    let float = root_marginal(&shape, k, &x, None, Backend::Float)?;
    let brute = root_marginal_bruteforce(&shape, k, &x)?;
    println!("leaves {:?} ({} extensions)", x.values(), count_extensions(&shape, k, &x)?);
    println!("  rational   {}", exact.to_json_weights());
    println!("  float      {}", float.to_json_weights());
    println!("  enumerated {}", brute.to_json_weights());
    assert_eq!(exact, brute);

    // Forbidding a root color, as when the tree hangs below a parent.
    let below = root_marginal(&shape, k, &x, Some(1), Backend::Rational)?;
    println!("  root ≠ 1   {}", below.to_json_weights());

    // An internal vertex given everything else, parent color fixed.
    let v = vertex_conditional_marginal(&shape, k, &x, 1, None, Some(3))?;
    println!("vertex 1 with parent colored 3: {}", v.to_json_weights());

    // One changed leaf moves the root law by this much.
    let y = LeafColoring::parse("1,2,0,4", k)?;
    let tv = tv_root(&shape, k, &x, &y, Backend::Rational)?;
    println!("tv_root({:?}, {:?}) = {:.6}", x.values(), y.values(), tv.to_f64());

    // Deep trees need the float backend.
    let deep = TreeShape::new(3, 8)?;
    let all_one = LeafColoring::new(3, vec![1; deep.leaf_count()])?;
    let p = root_marginal(&deep, 3, &all_one, None, Backend::Float)?;
    println!("Δ=3, depth 8, k=3, all leaves 1: {:?}", p.to_f64());
    Ok(())
}
