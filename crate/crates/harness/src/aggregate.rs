//! Cross-seed statistics over runs that share an evaluation grid.

use std::path::{Path, PathBuf};

use crate::metrics::{read_metrics, MetricsRow};
use crate::run::METRICS_FILE;
use crate::{HarnessError, HarnessResult};

pub const HEADER: [&str; 4] = ["step", "mean", "std", "runs"];

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub step: u64,
    /// Mean over runs of each run's mean evaluation return.
    pub mean: f64,
    /// Population standard deviation across runs (divisor `n`).
    pub std: f64,
    pub runs: usize,
}

/// Mean and population std. Values are summed in sorted order so the
/// result does not depend on the order of the inputs.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    dev.sort_by(f64::total_cmp);
    (mean, (dev.iter().sum::<f64>() / n).sqrt())
}

/// A run directory resolves to its metrics file; a file path is used as is.
pub fn metrics_path(run: &Path) -> PathBuf {
    if run.is_dir() {
        run.join(METRICS_FILE)
    } else {
        run.to_path_buf()
    }
}

/// Aggregates already loaded runs. `names` label the runs in error messages.
pub fn aggregate_rows(names: &[String], runs: &[Vec<MetricsRow>]) -> HarnessResult<Vec<AggregateRow>> {
    if runs.is_empty() {
        return Err(HarnessError::Other("no runs to aggregate".into()));
    }
    let grid = |r: &[MetricsRow]| r.iter().map(|x| x.step).collect::<Vec<_>>();
    let reference = grid(&runs[0]);
    let offending: Vec<&str> = names
        .iter()
        .zip(runs)
        .filter(|(_, r)| grid(r) != reference)
        .map(|(n, _)| n.as_str())
        .collect();
    if !offending.is_empty() {
        return Err(HarnessError::Other(format!(
            "step grid differs from {}: {}",
            names[0],
            offending.join(", ")
        )));
    }
    Ok(reference
        .iter()
        .enumerate()
        .map(|(i, &step)| {
            let values: Vec<f64> = runs.iter().map(|r| r[i].mean_return).collect();
            let (mean, std) = mean_std(&values);
            AggregateRow {
                step,
                mean,
                std,
                runs: runs.len(),
            }
        })
        .collect())
}

pub fn aggregate(runs: &[PathBuf]) -> HarnessResult<Vec<AggregateRow>> {
    let paths: Vec<PathBuf> = runs.iter().map(|r| metrics_path(r)).collect();
    let loaded = paths.iter().map(read_metrics).collect::<HarnessResult<Vec<_>>>()?;
    let names: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    aggregate_rows(&names, &loaded)
}

/// Per-run mean of the last `last` evaluation returns.
pub fn final_returns(runs: &[Vec<MetricsRow>], last: usize) -> Vec<f64> {
    runs.iter()
        .map(|r| {
            let tail = &r[r.len().saturating_sub(last)..];
            tail.iter().map(|x| x.mean_return).sum::<f64>() / tail.len() as f64
        })
        .collect()
}

pub fn write_aggregate(path: impl AsRef<Path>, rows: &[AggregateRow]) -> HarnessResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([r.step.to_string(), r.mean.to_string(), r.std.to_string(), r.runs.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_aggregate(path: impl AsRef<Path>) -> HarnessResult<Vec<AggregateRow>> {
    let path = path.as_ref();
    let bad = |what: &str| HarnessError::Other(format!("{}: bad {what}", path.display()));
    let mut reader = csv::Reader::from_path(path)?;
    if reader.headers()?.iter().ne(HEADER) {
        return Err(bad("header"));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            if rec.len() != HEADER.len() {
                return Err(bad("row"));
            }
            Ok(AggregateRow {
                step: rec[0].parse().map_err(|_| bad("step"))?,
                mean: rec[1].parse().map_err(|_| bad("mean"))?,
                std: rec[2].parse().map_err(|_| bad("std"))?,
                runs: rec[3].parse().map_err(|_| bad("run count"))?,
            })
        })
        .collect()
}
