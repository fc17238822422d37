//! Evaluation metrics CSV: one row per evaluation, appended and flushed as
//! the run progresses so a crash leaves every completed row on disk.

use std::fs::File;
use std::path::Path;

use crate::{HarnessError, HarnessResult};

pub const HEADER: [&str; 7] = ["step", "mean_return", "ep_returns", "critic_loss", "actor_loss", "fpn_loss", "wall_s"];

/// Separator between the per-episode returns inside one CSV field.
const RETURN_SEP: char = ';';

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub mean_return: f64,
    pub ep_returns: Vec<f64>,
    /// Mean over the updates since the previous row; empty before learning.
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    /// Only learned-fraction runs report it.
    pub fpn_loss: Option<f64>,
    pub wall_s: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_f64(field: &str, what: &str) -> HarnessResult<f64> {
    field
        .parse()
        .map_err(|_| HarnessError::Other(format!("bad {what} value {field:?}")))
}

fn parse_opt(field: &str, what: &str) -> HarnessResult<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_f64(field, what).map(Some)
    }
}

impl MetricsRow {
    fn record(&self) -> [String; 7] {
        let returns: Vec<String> = self.ep_returns.iter().map(|r| r.to_string()).collect();
        [
            self.step.to_string(),
            self.mean_return.to_string(),
            returns.join(&RETURN_SEP.to_string()),
            opt(self.critic_loss),
            opt(self.actor_loss),
            opt(self.fpn_loss),
            format!("{:.3}", self.wall_s),
        ]
    }

    fn parse(rec: &csv::StringRecord) -> HarnessResult<Self> {
        if rec.len() != HEADER.len() {
            return Err(HarnessError::Other(format!("expected {} fields, got {}", HEADER.len(), rec.len())));
        }
        let ep_returns = if rec[2].is_empty() {
            Vec::new()
        } else {
            rec[2]
                .split(RETURN_SEP)
                .map(|x| parse_f64(x, "episode return"))
                .collect::<HarnessResult<_>>()?
        };
        Ok(Self {
            step: rec[0]
                .parse()
                .map_err(|_| HarnessError::Other(format!("bad step {:?}", &rec[0])))?,
            mean_return: parse_f64(&rec[1], "mean_return")?,
            ep_returns,
            critic_loss: parse_opt(&rec[3], "critic_loss")?,
            actor_loss: parse_opt(&rec[4], "actor_loss")?,
            fpn_loss: parse_opt(&rec[5], "fpn_loss")?,
            wall_s: parse_f64(&rec[6], "wall_s")?,
        })
    }
}

/// Append-only writer; every row is flushed before `append` returns.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
    last_step: Option<u64>,
}

impl MetricsWriter {
    pub fn create(path: impl AsRef<Path>) -> HarnessResult<Self> {
        let mut inner = csv::Writer::from_path(path)?;
        inner.write_record(HEADER)?;
        inner.flush()?;
        Ok(Self { inner, last_step: None })
    }

    pub fn append(&mut self, row: &MetricsRow) -> HarnessResult<()> {
        if self.last_step.is_some_and(|s| row.step <= s) {
            return Err(HarnessError::Other(format!("step {} does not increase", row.step)));
        }
        self.inner.write_record(row.record())?;
        self.inner.flush()?;
        self.last_step = Some(row.step);
        Ok(())
    }
}

pub fn read_metrics(path: impl AsRef<Path>) -> HarnessResult<Vec<MetricsRow>> {
    let path = path.as_ref();
    let context = |e: HarnessError| HarnessError::Other(format!("{}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(context(HarnessError::Other(format!("unexpected header {header:?}"))));
    }
    let mut rows: Vec<MetricsRow> = Vec::new();
    for rec in reader.records() {
        let row = MetricsRow::parse(&rec?).map_err(context)?;
        if rows.last().is_some_and(|last| row.step <= last.step) {
            return Err(context(HarnessError::Other(format!("step {} does not increase", row.step))));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// The CSV text with the wall-clock column removed, for reproducibility checks.
pub fn strip_wall_clock(csv_text: &str) -> String {
    csv_text
        .lines()
        .map(|line| line.rsplit_once(',').map_or(line, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: u64) -> MetricsRow {
        MetricsRow {
            step,
            mean_return: -0.1 * step as f64,
            ep_returns: vec![1.5, -2.25],
            critic_loss: Some(0.125),
            actor_loss: None,
            fpn_loss: None,
            wall_s: 1.23456,
        }
    }

    #[test]
    fn round_trip_and_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut w = MetricsWriter::create(&path).unwrap();
        w.append(&row(0)).unwrap();
        w.append(&row(1000)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("step,mean_return,ep_returns,critic_loss,actor_loss,fpn_loss,wall_s"));
        assert_eq!(lines.next(), Some("0,-0,1.5;-2.25,0.125,,,1.235"));
        let back = read_metrics(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].ep_returns, vec![1.5, -2.25]);
        assert_eq!(back[1].actor_loss, None);
        assert_eq!(back[1].critic_loss, Some(0.125));
    }

    #[test]
    fn rows_are_on_disk_before_the_writer_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut w = MetricsWriter::create(&path).unwrap();
        w.append(&row(0)).unwrap();
        assert_eq!(read_metrics(&path).unwrap().len(), 1);
        drop(w);
    }

    #[test]
    fn steps_must_increase() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = MetricsWriter::create(dir.path().join("m.csv")).unwrap();
        w.append(&row(10)).unwrap();
        assert!(w.append(&row(10)).is_err());
    }

    #[test]
    fn wall_clock_column_is_stripped() {
        assert_eq!(strip_wall_clock("a,b,c\n1,2,3.5\n"), "a,b\n1,2");
    }
}
