//! Datasets: IDX files, synthetic generators, class-balanced nested subsets
//! and mini-batch ordering.

mod batch;
mod dataset;
pub mod idx;
mod subset;
pub mod synthetic;

pub use batch::{epoch_batches, BatchIterator};
pub use dataset::{Dataset, Split};
pub use idx::{load_idx, write_idx};
pub use subset::{stratified_subset, SubsetSpec};
pub use synthetic::{make_synthetic, SyntheticKind, SyntheticSpec};
