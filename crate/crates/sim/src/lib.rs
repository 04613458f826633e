//! Experiment harness for the sparse exchange dynamics: scenario files,
//! single runs, seed ensembles, penalty sweeps and the centralized
//! baselines, all writing plain CSV, JSON and DOT.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario_file;
pub mod solve;

pub use error::SimError;
pub use scenario_file::ScenarioFile;
