//! Grid sweeps over a base configuration.
//!
//! A sweep spec is TOML with an optional accuracy target and one `[[axis]]`
//! table per swept parameter:
//!
//! ```toml
//! target_accuracy = 0.75
//!
//! [[axis]]
//! name = "algorithm"
//! values = ["fsl_sage", "cse_fsl", "splitfed_ss"]
//!
//! [[axis]]
//! name = "l"
//! values = [2, 5, 10]
//! ```
//!
//! Names are either short aliases (`algorithm`, `alpha`, `l`, `T_prime`,
//! `m`, `T`, `K`, `Q`, `eta`, `eta_L`, `B`, `align_steps`, `align_lr`,
//! `store_capacity`, `seed`, `aux_hidden`) or dotted paths into the run
//! configuration such as `data.separation`. The string `"none"` clears an
//! optional field. `aux_hidden` takes a list of hidden widths (or one
//! integer) for the auxiliary network, or `"server"` to copy the server
//! architecture.
//!
//! Every grid point runs in its own sub-directory; `comparison.csv`
//! collects one row per point.

use std::fs;
use std::path::{Path, PathBuf};

use fsl_sage_core::config::Seeds;
use fsl_sage_core::numcore::{Activation, MlpSpec};
use fsl_sage_core::RunConfig;
use rayon::prelude::*;
use serde::Deserialize;
use toml::Value;

use crate::error::{io_err, Error, Result};
use crate::run_to_dir;

pub const COMPARISON_FILE: &str = "comparison.csv";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub target_accuracy: Option<f64>,
    #[serde(default, rename = "axis")]
    pub axes: Vec<Axis>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<Value>,
}

/// One configuration of the grid with the axis values that produced it.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub index: usize,
    pub settings: Vec<(String, Value)>,
    pub config: RunConfig,
}

impl GridPoint {
    pub fn dir_name(&self) -> String {
        let label: Vec<String> = self
            .settings
            .iter()
            .map(|(k, v)| format!("{k}={}", display_value(v)))
            .collect();
        let label: String = label
            .join("_")
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || "=.-_".contains(c) {
                    c
                } else {
                    '-'
                }
            })
            .collect();
        format!("{:03}_{label}", self.index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub dir: PathBuf,
    pub best_accuracy: Option<f64>,
    pub best_round: Option<usize>,
    pub bytes_to_target: Option<u64>,
    pub total_bytes: u64,
    pub final_eval_accuracy: Option<f64>,
}

pub fn parse_sweep(text: &str) -> std::result::Result<SweepSpec, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_sweep(&text).map_err(|message| Error::Parse {
        path: path.to_owned(),
        message,
    })
}

fn display_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(display_value).collect();
            format!("[{}]", parts.join("-"))
        }
        other => other.to_string(),
    }
}

fn alias(name: &str) -> Option<&'static str> {
    Some(match name {
        "algorithm" => "algorithm",
        "alpha" | "dirichlet_alpha" => "data.dirichlet_alpha",
        "l" | "align_interval" => "schedule.align_interval",
        "T_prime" | "lazy_rounds" => "schedule.lazy_rounds",
        "m" | "clients" => "schedule.clients",
        "T" | "rounds" => "schedule.rounds",
        "K" | "local_steps" => "schedule.local_steps",
        "Q" | "uplinks_per_round" => "schedule.uplinks_per_round",
        "eta" | "server_lr" => "optim.server_lr",
        "eta_L" | "client_lr" => "optim.client_lr",
        "B" | "batch_size" => "optim.batch_size",
        "align_steps" => "optim.align_steps",
        "align_lr" => "optim.align_lr",
        "store_capacity" => "protocol.store_capacity",
        _ => return None,
    })
}

const OPTIONAL_LEAVES: [&str; 6] = [
    "schedule.lazy_rounds",
    "optim.aux_lr",
    "data.dirichlet_alpha",
    "data.dataset_file",
    "protocol.store_capacity",
    "stop.max_bytes",
];

fn set_path(root: &mut Value, path: &str, value: &Value) -> std::result::Result<(), String> {
    let keys: Vec<&str> = path.split('.').collect();
    let (leaf, parents) = keys.split_last().expect("split yields at least one key");
    let mut node = root;
    for key in parents {
        node = node
            .get_mut(*key)
            .filter(|v| v.is_table())
            .ok_or_else(|| format!("unknown parameter name {path:?}"))?;
    }
    let table = node.as_table_mut().expect("checked above");
    let optional = OPTIONAL_LEAVES.contains(&path);
    if !table.contains_key(*leaf) && !optional {
        return Err(format!("unknown parameter name {path:?}"));
    }
    if value.as_str() == Some("none") {
        if !optional {
            return Err(format!("{path} cannot be \"none\""));
        }
        table.remove(*leaf);
    } else {
        table.insert((*leaf).to_owned(), value.clone());
    }
    Ok(())
}

fn set_aux_hidden(config: &mut RunConfig, value: &Value) -> std::result::Result<(), String> {
    if value.as_str() == Some("server") {
        config.model.aux = config.model.server_spec();
        return Ok(());
    }
    let hidden: Vec<usize> = match value {
        Value::Integer(h) => vec![usize::try_from(*h).map_err(|_| format!("bad aux width {h}"))?],
        Value::Array(items) => items
            .iter()
            .map(|v| {
                v.as_integer()
                    .and_then(|h| usize::try_from(h).ok())
                    .ok_or_else(|| format!("bad aux width {v}"))
            })
            .collect::<std::result::Result<_, _>>()?,
        other => return Err(format!("aux_hidden takes widths or \"server\", got {other}")),
    };
    let mut dims = vec![config.model.cut_dim()];
    dims.extend(&hidden);
    dims.push(config.model.full.output_dim());
    let mut activations = vec![Activation::Relu; hidden.len()];
    activations.push(Activation::Identity);
    config.model.aux = MlpSpec::new(dims, activations, config.model.full.head).map_err(|e| e.to_string())?;
    Ok(())
}

/// Applies one axis setting to `config`.
pub fn apply_setting(config: &RunConfig, name: &str, value: &Value) -> std::result::Result<RunConfig, String> {
    let mut out = config.clone();
    match name {
        "seed" => {
            let seed = value
                .as_integer()
                .and_then(|s| u64::try_from(s).ok())
                .ok_or_else(|| format!("seed must be a non-negative integer, got {value}"))?;
            out.seeds = Seeds::all(seed);
        }
        "aux_hidden" => set_aux_hidden(&mut out, value)?,
        _ => {
            let path = alias(name).unwrap_or(name);
            let mut tree = Value::try_from(config).map_err(|e| e.to_string())?;
            set_path(&mut tree, path, value)?;
            out = tree.try_into().map_err(|e: toml::de::Error| format!("{name}: {e}"))?;
        }
    }
    Ok(out)
}

/// Expands the cartesian product of the axes, first axis outermost.
pub fn expand_grid(base: &RunConfig, spec: &SweepSpec) -> Result<Vec<GridPoint>> {
    if spec.axes.is_empty() || spec.axes.iter().any(|a| a.values.is_empty()) {
        return Err(Error::Sweep("empty grid".into()));
    }
    let mut points: Vec<(Vec<(String, Value)>, RunConfig)> = vec![(Vec::new(), base.clone())];
    for axis in &spec.axes {
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for (settings, config) in &points {
            for value in &axis.values {
                let config = apply_setting(config, &axis.name, value).map_err(Error::Sweep)?;
                let mut settings = settings.clone();
                settings.push((axis.name.clone(), value.clone()));
                next.push((settings, config));
            }
        }
        points = next;
    }
    points
        .into_iter()
        .enumerate()
        .map(|(index, (settings, config))| {
            config
                .validate()
                .map_err(|e| Error::Sweep(format!("grid point {index}: {e}")))?;
            Ok(GridPoint {
                index,
                settings,
                config,
            })
        })
        .collect()
}

/// Runs every grid point in parallel and writes `comparison.csv`.
pub fn run_sweep(base: &RunConfig, spec: &SweepSpec, outdir: &Path, quiet: bool) -> Result<Vec<PointResult>> {
    let points = expand_grid(base, spec)?;
    fs::create_dir_all(outdir).map_err(io_err(outdir))?;
    let results = points
        .par_iter()
        .map(|p| {
            let dir = outdir.join(p.dir_name());
            let report = run_to_dir(&p.config, &dir, true)?;
            if !quiet {
                eprintln!("{}: best accuracy {:?}", p.dir_name(), report.best_accuracy());
            }
            let best = report
                .rows
                .iter()
                .reduce(|a, b| if b.eval_accuracy > a.eval_accuracy { b } else { a });
            Ok(PointResult {
                dir,
                best_accuracy: best.map(|r| r.eval_accuracy),
                best_round: best.map(|r| r.round),
                bytes_to_target: spec.target_accuracy.and_then(|t| report.bytes_to_target(t)),
                total_bytes: report.ledger.total_bytes(),
                final_eval_accuracy: report.rows.last().map(|r| r.eval_accuracy),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let path = outdir.join(COMPARISON_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["point".to_owned(), "dir".to_owned()];
    header.extend(spec.axes.iter().map(|a| a.name.clone()));
    header.extend(
        [
            "best_accuracy",
            "best_round",
            "bytes_to_target",
            "total_bytes",
            "final_eval_accuracy",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for (p, r) in points.iter().zip(&results) {
        let mut record = vec![p.index.to_string(), p.dir_name()];
        record.extend(p.settings.iter().map(|(_, v)| display_value(v)));
        record.push(opt(r.best_accuracy.map(|v| v.to_string())));
        record.push(opt(r.best_round.map(|v| v.to_string())));
        record.push(opt(r.bytes_to_target.map(|v| v.to_string())));
        record.push(r.total_bytes.to_string());
        record.push(opt(r.final_eval_accuracy.map(|v| v.to_string())));
        w.write_record(&record)?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(results)
}
