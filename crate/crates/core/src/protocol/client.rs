use alloc::vec::Vec;

use super::store::{RecordOrigin, SmashedRecord};
use crate::data::{BatchStream, Dataset, Shard};
use crate::error::{config_err, Result};
use crate::models::ModelBundle;
use crate::numcore::{backward, forward, loss_and_grad, sgd_step_in_place, DenseMatrix, MlpSpec, ParamVector, Targets};

/// Everything a client holds between rounds.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub client_params: ParamVector,
    pub aux_params: ParamVector,
    pub shard: Shard,
    pub stream: BatchStream,
    pub batch_size: usize,
}

/// `K` local steps and the `Q` uplink slots within them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalSchedule {
    pub local_steps: usize,
    pub uplinks: usize,
}

impl LocalSchedule {
    pub fn new(local_steps: usize, uplinks: usize) -> Result<Self> {
        if uplinks == 0 || local_steps == 0 || !local_steps.is_multiple_of(uplinks) {
            return Err(config_err!("Q must divide K (Q = {uplinks}, K = {local_steps})"));
        }
        Ok(Self { local_steps, uplinks })
    }

    /// Step `k` (0-based) uplinks when `(k + 1)` is a multiple of `K/Q`.
    pub fn uplinks_at(&self, k: usize) -> bool {
        (k + 1).is_multiple_of(self.local_steps / self.uplinks)
    }
}

/// Runs the local loop shared by FSL-SAGE and CSE-FSL.
///
/// At every step the client forwards a batch, asks `cut_grad` for the
/// cut-layer cotangent (it may also update the auxiliary parameters it is
/// handed) and applies `Jᵀ · cotangent` with rate `eta_l`.
pub fn local_round_with<F>(
    state: &mut ClientState,
    client_spec: &MlpSpec,
    dataset: &Dataset,
    schedule: LocalSchedule,
    eta_l: f64,
    round: usize,
    mut cut_grad: F,
) -> Result<Vec<SmashedRecord>>
where
    F: FnMut(&mut ParamVector, &DenseMatrix, &[usize]) -> Result<DenseMatrix>,
{
    let mut sent = Vec::with_capacity(schedule.uplinks);
    for k in 0..schedule.local_steps {
        let (x, y) = state.stream.sample_batch(&state.shard, dataset, state.batch_size)?;
        let trace = forward(client_spec, &state.client_params, &x)?;
        let z_f = trace.output();
        if schedule.uplinks_at(k) {
            sent.push(SmashedRecord::new(
                z_f.clone(),
                y.clone(),
                RecordOrigin {
                    client: state.id,
                    round,
                    local_step: k,
                },
            )?);
        }
        let cotangent = cut_grad(&mut state.aux_params, z_f, &y)?;
        let (g, _) = backward(client_spec, &state.client_params, &trace, &cotangent)?;
        sgd_step_in_place(&mut state.client_params, &g, eta_l)?;
    }
    Ok(sent)
}

/// One FSL-SAGE round at a client: the auxiliary network's input gradient
/// replaces the server's. The auxiliary parameters are not touched.
pub fn client_local_round(
    state: &mut ClientState,
    bundle: &ModelBundle,
    dataset: &Dataset,
    local_steps: usize,
    uplinks: usize,
    eta_l: f64,
    round: usize,
) -> Result<Vec<SmashedRecord>> {
    let schedule = LocalSchedule::new(local_steps, uplinks)?;
    let aux_spec = &bundle.aux_spec;
    local_round_with(
        state,
        &bundle.client_spec,
        dataset,
        schedule,
        eta_l,
        round,
        |aux, z, y| Ok(loss_and_grad(aux_spec, aux, z, Targets::Classes(y))?.grad_inputs),
    )
}
