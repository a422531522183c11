//! Batch experiment runner behind the `pqf-credit` binary.

pub mod config;
pub mod data;
pub mod experiment;
pub mod pipeline;
pub mod report;

pub use config::ExperimentConfig;
pub use data::{generate_synthetic, load_csv, save_csv, subsample, train_test_split};
pub use experiment::{project_only, run_experiment};
pub use report::{emit_report, load_report, render_text, RunReport};
