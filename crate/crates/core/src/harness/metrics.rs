use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of `metrics.csv`. Return and success columns come from raw
/// rewards only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub env_steps: usize,
    /// Mean raw return of the evaluation episodes.
    pub mean_raw_return: f64,
    /// Success rate of the evaluation episodes (policy mean action).
    pub success_rate: f64,
    /// Success rate of the training rollouts (sampled actions).
    pub train_success_rate: f64,
    pub mean_shaped_reward: f64,
    pub encoder_loss: f64,
    /// Mean embedding distance to the nearest goal target over visited states.
    pub mean_goal_distance: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub goal_set_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub iteration: usize,
    pub wall_seconds: f64,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

/// Write rows with a header; an empty slice still writes the header.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

pub const METRICS_HEADER: [&str; 13] = [
    "iteration",
    "env_steps",
    "mean_raw_return",
    "success_rate",
    "train_success_rate",
    "mean_shaped_reward",
    "encoder_loss",
    "mean_goal_distance",
    "policy_loss",
    "value_loss",
    "approx_kl",
    "clip_fraction",
    "goal_set_size",
];

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_csv(path, &METRICS_HEADER, rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    read_csv(path)
}

pub fn write_timing(path: &Path, rows: &[TimingRow]) -> Result<()> {
    write_csv(path, &["iteration", "wall_seconds"], rows)
}
