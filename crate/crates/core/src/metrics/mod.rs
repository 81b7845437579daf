//! Communication ledger, measurement probes and per-round metrics.

mod ledger;
mod probes;

pub use ledger::{Channel, CommEvent, CommLedger, Direction, LedgerQuery, WIRE_BYTES_PER_SCALAR};
pub use probes::{
    estimated_client_grad, estimation_error, evaluate, global_objective, grad_norm_full, true_client_grad,
    ObjectiveProbe, Probe,
};

/// One row per completed round.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsRow {
    pub round: usize,
    /// Global objective on the per-client probes.
    pub train_loss: f64,
    pub eval_loss: f64,
    pub eval_accuracy: f64,
    pub cumulative_bytes: u64,
    /// Auxiliary gradient estimation error at the end of the round.
    pub epsilon_t: Option<f64>,
    pub grad_norm_sq: Option<f64>,
    /// Mean final alignment loss over clients, on rounds that aligned.
    pub alignment_loss: Option<f64>,
    /// Estimation error just before and just after this round's alignment.
    pub epsilon_pre_align: Option<f64>,
    pub epsilon_post_align: Option<f64>,
}
