//! Run configurations as TOML.
//!
//! One top-level key and one table per concern:
//!
//! ```toml
//! algorithm = "fsl_sage"   # fedavg | splitfed_ms | splitfed_ss | cse_fsl
//!
//! [schedule]
//! clients = 4              # m
//! rounds = 30              # T
//! local_steps = 10         # K
//! uplinks_per_round = 2    # Q, must divide K
//! align_interval = 5       # l
//! lazy_rounds = 20         # T′, optional; omit to align for the whole run
//!
//! [optim]
//! server_lr = 0.05
//! client_lr = 0.05
//! batch_size = 32
//! align_steps = 30
//! align_lr = 10.0
//! aux_lr = 0.05            # optional, CSE-FSL only; defaults to client_lr
//!
//! [data]
//! samples = 8000
//! eval_samples = 1000
//! features = 20
//! classes = 5
//! separation = 2.0
//! dirichlet_alpha = 1.0    # optional; omit for an i.i.d. split
//! dataset_file = "d.bin"   # optional; load rows instead of generating
//!
//! [model]
//! cut_index = 2
//! [model.full]
//! layer_dims = [20, 32, 16, 32, 5]
//! activations = ["relu", "tanh", "relu", "identity"]
//! head = "softmax_xent"
//! [model.aux]
//! layer_dims = [16, 16, 5]
//! activations = ["relu", "identity"]
//! head = "softmax_xent"
//!
//! [protocol]
//! probe_size = 512
//! store_capacity = 40      # optional; omit to keep every record
//! distinct_aux_init = false
//!
//! [seeds]
//! dataset = 0
//! partition = 0
//! init = 0
//! streams = 0
//!
//! [stop]
//! max_bytes = 100000000    # optional
//! ```
//!
//! Unknown keys are rejected.

use std::fs;
use std::path::Path;

use fsl_sage_core::config::Seeds;
use fsl_sage_core::RunConfig;

use crate::error::{io_err, Error, Result};

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> std::result::Result<RunConfig, String> {
    let config: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text).map_err(|message| Error::Parse {
        path: path.to_owned(),
        message,
    })
}

/// The exact text written as a run's configuration echo.
pub fn emit_config(config: &RunConfig) -> Result<String> {
    Ok(toml::to_string_pretty(config)?)
}

/// `--seed-override`: one seed for every purpose.
pub fn override_seeds(config: &mut RunConfig, seed: u64) {
    config.seeds = Seeds::all(seed);
}
