use alloc::vec::Vec;

use super::store::{AlignmentStore, SmashedRecord};
use crate::error::{dim_err, Error, Result};
use crate::numcore::{
    input_grad_match, loss_and_grad, sgd_step_in_place, DenseMatrix, LossGrad, MlpSpec, ParamVector, Targets,
};

/// S-server state: the server-side model and one alignment store per client.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub params: ParamVector,
    pub stores: Vec<AlignmentStore>,
}

impl ServerState {
    pub fn new(params: ParamVector, clients: usize, capacity: Option<usize>) -> Self {
        Self {
            params,
            stores: (0..clients).map(|_| AlignmentStore::new(capacity)).collect(),
        }
    }

    /// One server step on a smashed record, then archive it for alignment.
    /// Returns the server loss on the record.
    pub fn sserver_process(&mut self, server_spec: &MlpSpec, record: SmashedRecord, eta: f64) -> Result<f64> {
        let client = record.origin.client;
        if client >= self.stores.len() {
            return Err(dim_err!(
                "record from client {client}, server knows {}",
                self.stores.len()
            ));
        }
        let lg = server_update(server_spec, &mut self.params, &record.z_f, &record.labels, eta)?;
        self.stores[client].push(record);
        Ok(lg.loss)
    }
}

/// Computes the server loss and gradients at the current parameters and
/// then takes one SGD step. The returned `grad_inputs` is the true
/// cut-layer gradient `z_b` for the pre-update server.
pub fn server_update(
    server_spec: &MlpSpec,
    params: &mut ParamVector,
    z_f: &DenseMatrix,
    labels: &[usize],
    eta: f64,
) -> Result<LossGrad> {
    if z_f.cols() != server_spec.input_dim() {
        return Err(dim_err!(
            "smashed width {} differs from server input width {}",
            z_f.cols(),
            server_spec.input_dim()
        ));
    }
    let lg = loss_and_grad(server_spec, params, z_f, Targets::Classes(labels))?;
    if !lg.loss.is_finite() {
        return Err(Error::NonFinite("server loss"));
    }
    sgd_step_in_place(params, &lg.grad_params, eta)?;
    Ok(lg)
}

/// Mean elementwise average in ascending client order.
pub fn fserver_aggregate(params: &[ParamVector]) -> Result<ParamVector> {
    let refs: Vec<&ParamVector> = params.iter().collect();
    aggregate_refs(&refs)
}

pub fn aggregate_refs(params: &[&ParamVector]) -> Result<ParamVector> {
    let Some(first) = params.first() else {
        return Err(Error::Contract("aggregation over zero clients"));
    };
    for p in &params[1..] {
        first.check_layout(p, "aggregate")?;
    }
    let inv = 1.0 / params.len() as f64;
    let mut out = (*first).clone();
    for (j, slot) in out.as_mut_slice().iter_mut().enumerate() {
        let v0 = *slot;
        // the mean of equal values is that value, bit for bit
        if params[1..].iter().all(|p| p.as_slice()[j].to_bits() == v0.to_bits()) {
            continue;
        }
        let mut sum = 0.0;
        for p in params {
            sum += p.as_slice()[j];
        }
        *slot = sum * inv;
    }
    Ok(out)
}

/// Backward targets `z_b` for every stored record under `server_params`.
pub fn backward_targets(
    server_spec: &MlpSpec,
    server_params: &ParamVector,
    store: &AlignmentStore,
) -> Result<Vec<DenseMatrix>> {
    store
        .iter()
        .map(|r| Ok(loss_and_grad(server_spec, server_params, &r.z_f, Targets::Classes(&r.labels))?.grad_inputs))
        .collect()
}

/// Empirical alignment loss `(1/r) Σ_j ‖ẑ_b(x_a; z_f^j, y^j) − z_b^j‖²` and
/// its gradient with respect to the auxiliary parameters.
pub fn alignment_loss(
    aux_spec: &MlpSpec,
    aux_params: &ParamVector,
    store: &AlignmentStore,
    targets: &[DenseMatrix],
) -> Result<(f64, ParamVector)> {
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    if targets.len() != store.len() {
        return Err(dim_err!("{} targets for {} stored records", targets.len(), store.len()));
    }
    let w = 1.0 / store.len() as f64;
    let mut value = 0.0;
    let mut grad = ParamVector::zeros(aux_spec.manifest());
    for (rec, target) in store.iter().zip(targets) {
        let m = input_grad_match(aux_spec, aux_params, &rec.z_f, Targets::Classes(&rec.labels), target)?;
        value += w * m.residual_sq;
        grad.axpy(w, &m.grad)?;
    }
    Ok((value, grad))
}

#[derive(Debug, Clone)]
pub struct AlignmentOutcome {
    pub params: ParamVector,
    /// Empirical alignment loss before the first step.
    pub loss_before: f64,
    /// Empirical alignment loss at the returned parameters.
    pub loss_after: f64,
}

/// Fits the auxiliary network's input gradient to the current server's
/// cut-layer gradients on the stored smashed data, by `steps` full-batch
/// gradient descent steps.
pub fn align_auxiliary(
    aux_spec: &MlpSpec,
    server_spec: &MlpSpec,
    aux_params: &ParamVector,
    store: &AlignmentStore,
    server_params: &ParamVector,
    steps: usize,
    align_lr: f64,
) -> Result<AlignmentOutcome> {
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    let targets = backward_targets(server_spec, server_params, store)?;
    let mut params = aux_params.clone();
    let (loss_before, mut grad) = alignment_loss(aux_spec, &params, store, &targets)?;
    let mut loss_after = loss_before;
    for _ in 0..steps {
        sgd_step_in_place(&mut params, &grad, align_lr)?;
        let (l, g) = alignment_loss(aux_spec, &params, store, &targets)?;
        if !l.is_finite() {
            return Err(Error::NonFinite("alignment loss"));
        }
        loss_after = l;
        grad = g;
    }
    Ok(AlignmentOutcome {
        params,
        loss_before,
        loss_after,
    })
}
