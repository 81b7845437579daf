use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::models::{compose, decompose, ModelBundle};
use crate::numcore::{argmax_rows, forward, head_loss, loss_and_grad, vjp_params, DenseMatrix, ParamVector, Targets};
use crate::protocol::{ClientState, ServerState};

/// A fixed batch used for measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub inputs: DenseMatrix,
    pub labels: Vec<usize>,
}

impl Probe {
    pub fn new(inputs: DenseMatrix, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::EmptyBatch);
        }
        if inputs.rows() != labels.len() {
            return Err(crate::error::dim_err!(
                "{} labels for {} probe rows",
                labels.len(),
                inputs.rows()
            ));
        }
        Ok(Self { inputs, labels })
    }
}

/// Client-parameter gradient of the true loss, through the composed network.
pub fn true_client_grad(
    bundle: &ModelBundle,
    client: &ParamVector,
    server: &ParamVector,
    probe: &Probe,
) -> Result<ParamVector> {
    let (spec, full) = compose(&bundle.split, client, server)?;
    let lg = loss_and_grad(&spec, &full, &probe.inputs, Targets::Classes(&probe.labels))?;
    Ok(decompose(&bundle.split, &lg.grad_params)?.0)
}

/// Client-parameter gradient when the auxiliary network supplies the
/// cut-layer gradient.
pub fn estimated_client_grad(
    bundle: &ModelBundle,
    client: &ParamVector,
    aux: &ParamVector,
    probe: &Probe,
) -> Result<ParamVector> {
    let z = forward(&bundle.client_spec, client, &probe.inputs)?;
    let zhat = loss_and_grad(&bundle.aux_spec, aux, z.output(), Targets::Classes(&probe.labels))?.grad_inputs;
    vjp_params(&bundle.client_spec, client, &probe.inputs, &zhat)
}

/// Mean over clients of `‖∇_c F̂_i − ∇_c F_i‖²` on a shared probe batch.
pub fn estimation_error(
    bundle: &ModelBundle,
    clients: &[ClientState],
    server: &ServerState,
    probe: &Probe,
) -> Result<f64> {
    if clients.is_empty() {
        return Err(Error::Contract("estimation error needs at least one client"));
    }
    let mut total = 0.0;
    for c in clients {
        let est = estimated_client_grad(bundle, &c.client_params, &c.aux_params, probe)?;
        let truth = true_client_grad(bundle, &c.client_params, &server.params, probe)?;
        total += est.sub(&truth)?.norm_sq();
    }
    Ok(total / clients.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveProbe {
    /// `(1/m) Σ_i` of the per-client probe mean losses.
    pub loss: f64,
    /// Squared norm of the gradient of `loss` over all model parameters.
    pub grad_norm_sq: f64,
}

/// Global objective and its stationarity gap at `(client, server)`, with one
/// probe per client.
pub fn global_objective(
    bundle: &ModelBundle,
    client: &ParamVector,
    server: &ParamVector,
    probes: &[Probe],
) -> Result<ObjectiveProbe> {
    if probes.is_empty() {
        return Err(Error::Contract("global objective needs at least one probe"));
    }
    let (spec, full) = compose(&bundle.split, client, server)?;
    let weight = 1.0 / probes.len() as f64;
    let mut grad = ParamVector::zeros(spec.manifest());
    let mut loss = 0.0;
    for p in probes {
        let lg = loss_and_grad(&spec, &full, &p.inputs, Targets::Classes(&p.labels))?;
        loss += weight * lg.loss;
        grad.axpy(weight, &lg.grad_params)?;
    }
    Ok(ObjectiveProbe {
        loss,
        grad_norm_sq: grad.norm_sq(),
    })
}

pub fn grad_norm_full(
    bundle: &ModelBundle,
    client: &ParamVector,
    server: &ParamVector,
    probes: &[Probe],
) -> Result<f64> {
    global_objective(bundle, client, server, probes).map(|o| o.grad_norm_sq)
}

/// Mean loss and accuracy of the composed model on `probe`.
pub fn evaluate(bundle: &ModelBundle, client: &ParamVector, server: &ParamVector, probe: &Probe) -> Result<(f64, f64)> {
    let (spec, full) = compose(&bundle.split, client, server)?;
    let trace = forward(&spec, &full, &probe.inputs)?;
    let (loss, _) = head_loss(spec.head, trace.output(), Targets::Classes(&probe.labels))?;
    let hits = argmax_rows(trace.output())
        .iter()
        .zip(&probe.labels)
        .filter(|(p, y)| p == y)
        .count();
    Ok((loss, hits as f64 / probe.labels.len() as f64))
}
