//! Deterministic simulation core for federated split learning with
//! auxiliary cut-layer gradient estimators.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs and seeds: dense matrices and small MLPs with
//! analytic backpropagation, model splitting, synthetic data and non-i.i.d.
//! partitioning, the FSL-SAGE client / S-server / F-server protocol, the
//! FedAvg, SplitFed and CSE-FSL baselines, and the communication ledger.
//!
//! File formats, configuration files and the command line live in the
//! `fsl-sage` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

pub mod baselines;
pub mod config;
pub mod data;
mod error;
pub mod metrics;
pub mod models;
pub mod numcore;
pub mod protocol;
pub mod rng;
pub mod sim;

pub use crate::config::{Algorithm, RunConfig};
pub use crate::error::{Error, Result};
pub use crate::metrics::{CommLedger, MetricsRow};
pub use crate::sim::{run, RunReport};
