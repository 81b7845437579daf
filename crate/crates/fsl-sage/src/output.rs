//! Per-run artifacts: `metrics.csv`, `summary.json` and `config.toml`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use fsl_sage_core::metrics::{Channel, Direction, LedgerQuery};
use fsl_sage_core::{MetricsRow, RunConfig, RunReport};
use serde::Serialize;

use crate::config_file::emit_config;
use crate::error::{io_err, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_ECHO_FILE: &str = "config.toml";

/// Column order of `metrics.csv`. Empty cells mean "not measured".
pub const METRICS_HEADER: [&str; 10] = [
    "round",
    "train_loss",
    "eval_loss",
    "eval_accuracy",
    "cumulative_bytes",
    "epsilon_t",
    "grad_norm_sq",
    "alignment_loss",
    "epsilon_pre_align",
    "epsilon_post_align",
];

pub fn metrics_csv(rows: &[MetricsRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(METRICS_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()).into())
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub algorithm: &'static str,
    pub rounds_run: usize,
    pub final_metrics: Option<&'a MetricsRow>,
    pub best_eval_accuracy: Option<f64>,
    pub best_round: Option<usize>,
    pub total_bytes: u64,
    pub bytes_by_channel: BTreeMap<&'static str, u64>,
    pub bytes_by_direction: BTreeMap<&'static str, u64>,
    pub config: &'a RunConfig,
}

impl<'a> Summary<'a> {
    pub fn new(config: &'a RunConfig, report: &'a RunReport) -> Self {
        let best = report
            .rows
            .iter()
            .reduce(|a, b| if b.eval_accuracy > a.eval_accuracy { b } else { a });
        let ledger = &report.ledger;
        let bytes_by_channel = Channel::ALL
            .iter()
            .map(|&c| (c.name(), ledger.bytes(LedgerQuery::all().channel(c))))
            .collect();
        let bytes_by_direction = [("up", Direction::Up), ("down", Direction::Down)]
            .into_iter()
            .map(|(name, d)| (name, ledger.bytes(LedgerQuery::all().direction(d))))
            .collect();
        Self {
            algorithm: config.algorithm.name(),
            rounds_run: report.rows.len(),
            final_metrics: report.rows.last(),
            best_eval_accuracy: best.map(|r| r.eval_accuracy),
            best_round: best.map(|r| r.round),
            total_bytes: ledger.total_bytes(),
            bytes_by_channel,
            bytes_by_direction,
            config,
        }
    }
}

/// Writes the three run artifacts into `dir`, creating it if needed.
pub fn write_run(dir: &Path, config: &RunConfig, report: &RunReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(CONFIG_ECHO_FILE);
    fs::write(&path, emit_config(config)?).map_err(io_err(&path))?;
    let path = dir.join(METRICS_FILE);
    fs::write(&path, metrics_csv(&report.rows)?).map_err(io_err(&path))?;
    let path = dir.join(SUMMARY_FILE);
    let mut json = serde_json::to_string_pretty(&Summary::new(config, report))?;
    json.push('\n');
    fs::write(&path, json).map_err(io_err(&path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(round: usize) -> MetricsRow {
        MetricsRow {
            round,
            train_loss: 1.5,
            eval_loss: 1.25,
            eval_accuracy: 0.5,
            cumulative_bytes: 4096,
            epsilon_t: None,
            grad_norm_sq: Some(0.25),
            alignment_loss: None,
            epsilon_pre_align: None,
            epsilon_post_align: None,
        }
    }

    #[test]
    fn golden_header_and_empty_cells() {
        let text = String::from_utf8(metrics_csv(&[row(0), row(1)]).unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "round,train_loss,eval_loss,eval_accuracy,cumulative_bytes,epsilon_t,grad_norm_sq,alignment_loss,epsilon_pre_align,epsilon_post_align"
        );
        assert_eq!(lines.next().unwrap(), "0,1.5,1.25,0.5,4096,,0.25,,,");
        assert_eq!(lines.count(), 1);
    }

    #[test]
    fn header_matches_row_fields() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(row(0)).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), METRICS_HEADER.join(","));
    }
}
