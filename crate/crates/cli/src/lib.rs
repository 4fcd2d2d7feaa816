//! Experiment runner: ingestion, dataset building, training, evaluation and
//! plots for the Apnea-ECG window classifier.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod plot;
pub mod run;

use std::path::Path;

pub use config::{preset, DataSource, ExperimentConfig, PRESET_NAMES};
pub use error::CliError;

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes).map_err(CliError::io(path))?;
    std::fs::rename(&tmp, path).map_err(CliError::io(path))
}
