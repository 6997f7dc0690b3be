//! On-disk results: `records.csv` (one row per algorithm and trial),
//! `summary.csv` (means per algorithm and SNR), `failures.csv` when any
//! solver failed, and `config.json`, an echo of the configuration.
//!
//! `records.csv` columns, in order:
//! `algorithm,snr_db,trial,nmse,runtime_s,support_exact`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::harness::{summarize, ExperimentOutput, TrialRecord};

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const CONFIG_FILE: &str = "config.json";

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(BenchError::from)).collect()
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    read_csv(path)
}

/// Writes all result files into `dir`, creating it if needed. Returns the
/// paths written.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, output: &ExperimentOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut written = Vec::new();

    let records = dir.join(RECORDS_FILE);
    write_csv(&records, &output.records)?;
    written.push(records);

    let summary = dir.join(SUMMARY_FILE);
    write_csv(&summary, &summarize(&output.records))?;
    written.push(summary);

    let failures = dir.join(FAILURES_FILE);
    if output.failures.is_empty() {
        if failures.exists() {
            fs::remove_file(&failures).map_err(|e| BenchError::io(&failures, e))?;
        }
    } else {
        write_csv(&failures, &output.failures)?;
        written.push(failures);
    }

    let config = dir.join(CONFIG_FILE);
    let text = serde_json::to_string_pretty(cfg).map_err(|source| BenchError::Json { path: config.clone(), source })?;
    fs::write(&config, text + "\n").map_err(|e| BenchError::io(&config, e))?;
    written.push(config);
    Ok(written)
}
