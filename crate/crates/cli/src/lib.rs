//! Staged, seeded, resumable pipeline around the audit toolkit: generate or
//! import data, split it, train and score the target, fit attacks, train
//! shadows, evaluate, and compare — each stage cached behind content hashes
//! in a workdir manifest.

pub mod compare;
pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;

pub use compare::{build_comparison, cmd_compare, ComparisonSummary};
pub use config::{Method, Overrides, RunConfig};
pub use error::{CliError, CliResult};
pub use manifest::StageStatus;
