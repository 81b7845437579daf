//! Gradient of an input-gradient matching loss.
//!
//! For a network with a loss head, `ẑ(θ) = ∂ℓ(θ; x)/∂x` is the gradient of
//! the batch-mean loss with respect to the inputs. Matching it to a target
//! `t` with `‖ẑ(θ) − t‖²` needs `2 (∂ẑ/∂θ)ᵀ r` where `r = ẑ − t`, which
//! equals `2 ∂/∂θ ⟨∂ℓ/∂x, r⟩`: the parameter gradient of the directional
//! derivative of the loss along `r`. We push the tangent `r` forward
//! alongside the primal pass and then reverse through both.

use alloc::vec;

use super::matrix::{self, DenseMatrix};
use super::mlp::{backward, forward, head_loss, log_sum_exp, Head, MlpSpec, Targets};
use super::params::ParamVector;
use crate::error::{dim_err, Error, Result};

#[derive(Debug, Clone)]
pub struct InputGradMatch {
    /// `‖ẑ − reference‖²` summed over the batch and features.
    pub residual_sq: f64,
    /// Gradient of `residual_sq` with respect to the parameters.
    pub grad: ParamVector,
    /// `ẑ`, the network's input gradient.
    pub input_grad: DenseMatrix,
}

pub fn input_grad_match(
    spec: &MlpSpec,
    params: &ParamVector,
    inputs: &DenseMatrix,
    targets: Targets<'_>,
    reference: &DenseMatrix,
) -> Result<InputGradMatch> {
    if spec.head == Head::None {
        return Err(Error::Contract("input-gradient matching needs a loss head"));
    }
    if reference.shape() != inputs.shape() {
        return Err(dim_err!(
            "reference {:?} does not match inputs {:?}",
            reference.shape(),
            inputs.shape()
        ));
    }
    let trace = forward(spec, params, inputs)?;
    let (_, d_out) = head_loss(spec.head, trace.output(), targets)?;
    let (_, zhat) = backward(spec, params, &trace, &d_out)?;
    let residual = zhat.sub(reference)?;
    let residual_sq = residual.norm_sq();

    let layers = spec.num_layers();

    // tangent pass along `residual`
    let mut tangent_pre = alloc::vec::Vec::with_capacity(layers);
    let mut tangent_post: alloc::vec::Vec<DenseMatrix> = alloc::vec::Vec::with_capacity(layers);
    for l in 0..layers {
        let act = spec.activations[l];
        let a_dot = if l == 0 { &residual } else { &tangent_post[l - 1] };
        let p_dot = matrix::affine(a_dot, params.block(2 * l), None, spec.layer_dims[l + 1]);
        let mut y_dot = p_dot.clone();
        for ((v, &x), &y) in y_dot
            .as_mut_slice()
            .iter_mut()
            .zip(trace.pre[l].as_slice())
            .zip(trace.post[l].as_slice())
        {
            *v *= act.derivative(x, y);
        }
        tangent_pre.push(p_dot);
        tangent_post.push(y_dot);
    }

    // adjoints of the directional derivative at the head
    let out = trace.output();
    let out_dot = &tangent_post[layers - 1];
    let (n, k) = out.shape();
    let inv_n = 1.0 / n as f64;
    let mut primal_adj = vec![0.0; n * k];
    match spec.head {
        Head::SoftmaxXent => {
            let mut probs = vec![0.0; k];
            for i in 0..n {
                let row = out.row(i);
                let lse = log_sum_exp(row);
                for (p, &o) in probs.iter_mut().zip(row) {
                    *p = libm::exp(o - lse);
                }
                let dot_row = out_dot.row(i);
                let pd: f64 = probs.iter().zip(dot_row).map(|(p, d)| p * d).sum();
                for j in 0..k {
                    primal_adj[i * k + j] = inv_n * probs[j] * (dot_row[j] - pd);
                }
            }
        }
        Head::Mse => {
            for (a, &d) in primal_adj.iter_mut().zip(out_dot.as_slice()) {
                *a = 2.0 * inv_n * d;
            }
        }
        Head::None => unreachable!(),
    }
    let mut primal_adj = DenseMatrix::from_raw(n, k, primal_adj);
    let mut tangent_adj = d_out;

    let mut grad = ParamVector::zeros(spec.manifest());
    for l in (0..layers).rev() {
        let act = spec.activations[l];
        let (w_rows, w_cols) = spec.manifest()[2 * l];
        let mut p_dot_adj = tangent_adj;
        let mut p_adj = primal_adj;
        {
            let pre = trace.pre[l].as_slice();
            let post = trace.post[l].as_slice();
            let p_dot = tangent_pre[l].as_slice();
            for idx in 0..pre.len() {
                let d1 = act.derivative(pre[idx], post[idx]);
                let d2 = act.second_derivative(post[idx]);
                let t_adj = p_dot_adj.as_slice()[idx];
                p_adj.as_mut_slice()[idx] = d1 * p_adj.as_slice()[idx] + d2 * p_dot[idx] * t_adj;
                p_dot_adj.as_mut_slice()[idx] = d1 * t_adj;
            }
        }
        let w_off = grad.block_offset(2 * l);
        let b_off = w_off + w_rows * w_cols;
        {
            let g = grad.as_mut_slice();
            let primal_in = if l == 0 { inputs } else { &trace.post[l - 1] };
            let tangent_in = if l == 0 { &residual } else { &tangent_post[l - 1] };
            matrix::accumulate_transpose_times(primal_in, &p_adj, &mut g[w_off..b_off]);
            matrix::accumulate_transpose_times(tangent_in, &p_dot_adj, &mut g[w_off..b_off]);
            matrix::accumulate_col_sums(&p_adj, &mut g[b_off..b_off + w_cols]);
        }
        let w = params.block(2 * l);
        primal_adj = matrix::times_transpose(&p_adj, w, w_rows);
        tangent_adj = matrix::times_transpose(&p_dot_adj, w, w_rows);
    }
    grad.scale(2.0);

    Ok(InputGradMatch {
        residual_sq,
        grad,
        input_grad: zhat,
    })
}
