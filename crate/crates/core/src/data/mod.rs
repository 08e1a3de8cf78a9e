//! Datasets, deterministic splits, synthetic generation, CSV ingestion, and
//! group definitions.

mod csv;
mod dataset;
mod group;
mod synthetic;

pub use csv::{load_csv, save_csv, CsvSchema};
pub use dataset::{split_dataset, split_manifest, Dataset, Example, SplitManifest, SplitSpec};
pub use group::{evaluate_group, CmpOp, GroupPredicate, GroupSpec};
pub use synthetic::{generate_synthetic, SyntheticSpec};
