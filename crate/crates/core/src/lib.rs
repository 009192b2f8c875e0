pub mod broadcast;
pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod harness;
pub mod rng;
pub mod stats;
pub mod tree;
pub mod unbiasing;

pub use error::{Error, Result};
pub use rng::RandomSource;
pub use tree::{ColorSet, FullColoring, LeafColoring, TreeShape, STAR};
