//! Experiment harness: error-vs-ε sweeps, mechanism isolation, timing and degree
//! studies over edge-list datasets or synthetic graphs, written as CSV.

pub mod config;
pub mod results;
pub mod runner;
pub mod synth;

pub use config::{
    Dataset, EgoSelection, ExperimentConfig, ExperimentError, GraphSource, Parallelism,
};
pub use results::{read_csv, write_csv, write_metadata, ResultRow, RowKind, RunMetadata};
pub use runner::{
    run, run_degree_sweep, run_error_sweep, run_mechanism_isolation, run_timing, select_egos,
    task_rng, Ego, Mode, RunOutput,
};
pub use synth::{preferential_attachment, SyntheticSpec};
