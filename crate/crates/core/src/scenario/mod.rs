//! Experiment configs and presets, trajectory datasets on disk, and the
//! comparison and entropy reports built on them.

pub mod compare;
pub mod config;
pub mod dataset;
pub mod entropy;
pub mod runner;

pub use compare::{compare, ComparisonReport, SiteComparison};
pub use config::{Preset, ScenarioConfig};
pub use dataset::{RunKind, Sample, SpinTable, TrajectoryDataset};
pub use entropy::{entropy_report, entropy_report_from_dataset, EntropyReport};
pub use runner::{run, run_classical, run_quantum};
