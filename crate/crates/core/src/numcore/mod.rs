//! Dense linear algebra and small MLPs with exact gradients.

mod matrix;
mod mlp;
mod params;
mod second_order;

pub use matrix::DenseMatrix;
pub use mlp::{
    argmax_rows, backward, forward, head_loss, loss, loss_and_grad, vjp_params, Activation, ForwardTrace, Head,
    LossGrad, MlpSpec, Targets,
};
pub use params::{BlockShape, ParamVector};
pub use second_order::{input_grad_match, InputGradMatch};

use crate::error::{Error, Result};

/// Central-difference gradient of `f`, one evaluation pair per coordinate.
pub fn fd_grad<F>(mut f: F, params: &ParamVector, step: f64) -> ParamVector
where
    F: FnMut(&ParamVector) -> f64,
{
    debug_assert!(step > 0.0);
    let mut probe = params.clone();
    let mut grad = ParamVector::zeros(params.manifest().to_vec());
    for i in 0..params.len() {
        let orig = params.as_slice()[i];
        probe.as_mut_slice()[i] = orig + step;
        let up = f(&probe);
        probe.as_mut_slice()[i] = orig - step;
        let down = f(&probe);
        probe.as_mut_slice()[i] = orig;
        grad.as_mut_slice()[i] = (up - down) / (2.0 * step);
    }
    grad
}

/// `params − lr · grad`.
pub fn sgd_step(params: &ParamVector, grad: &ParamVector, lr: f64) -> Result<ParamVector> {
    let mut next = params.clone();
    sgd_step_in_place(&mut next, grad, lr)?;
    Ok(next)
}

pub fn sgd_step_in_place(params: &mut ParamVector, grad: &ParamVector, lr: f64) -> Result<()> {
    if lr.is_nan() || lr < 0.0 {
        return Err(Error::Contract("learning rate must be non-negative"));
    }
    params.axpy(-lr, grad)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or 0 when both are zero.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    let scale = na.max(nb);
    if scale == 0.0 {
        libm::sqrt(diff)
    } else {
        libm::sqrt(diff / scale)
    }
}
