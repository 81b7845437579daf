//! Fully connected networks with analytic reverse-mode gradients.
//!
//! Layer `l` computes `a_l = act_l(a_{l-1} · W_l + b_l)` with `W_l` stored
//! row-major as `(in, out)`. A network may carry a loss head; the output
//! stack always stops before the head.

use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{self, DenseMatrix};
use super::params::{BlockShape, ParamVector};
use crate::error::{config_err, dim_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => libm::tanh(x),
            Activation::Identity => x,
        }
    }

    /// First derivative given the pre-activation `x` and output `y`.
    /// ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    /// Second derivative given the output `y`.
    #[inline]
    pub fn second_derivative(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => -2.0 * y * (1.0 - y * y),
            Activation::Relu | Activation::Identity => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Head {
    /// Softmax followed by cross-entropy against class labels.
    SoftmaxXent,
    /// Sum of squared errors per example.
    Mse,
    /// No loss; the network feeds another one.
    None,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpSpec {
    /// `d_0 … d_L`.
    pub layer_dims: Vec<usize>,
    /// One per layer, `L` entries.
    pub activations: Vec<Activation>,
    pub head: Head,
}

impl MlpSpec {
    pub fn new(layer_dims: Vec<usize>, activations: Vec<Activation>, head: Head) -> Result<Self> {
        let spec = Self {
            layer_dims,
            activations,
            head,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(config_err!("a network needs at least one layer"));
        }
        if self.layer_dims.contains(&0) {
            return Err(config_err!("layer widths must be positive"));
        }
        if self.activations.len() != self.num_layers() {
            return Err(config_err!(
                "{} activations given for {} layers",
                self.activations.len(),
                self.num_layers()
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn num_layers(&self) -> usize {
        self.layer_dims.len().saturating_sub(1)
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated spec")
    }

    pub fn manifest(&self) -> Vec<BlockShape> {
        self.layer_dims
            .windows(2)
            .flat_map(|w| [(w[0], w[1]), (1, w[1])])
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layer_dims.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub(crate) fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.manifest() != self.manifest().as_slice() {
            return Err(dim_err!(
                "parameter manifest does not match network {:?}",
                self.layer_dims
            ));
        }
        Ok(())
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: DenseMatrix,
    /// Pre-activations, one per layer.
    pub pre: Vec<DenseMatrix>,
    /// Post-activations, one per layer; the last one is the network output.
    pub post: Vec<DenseMatrix>,
}

impl ForwardTrace {
    pub fn output(&self) -> &DenseMatrix {
        self.post.last().expect("at least one layer")
    }

    pub fn layers(&self) -> &[DenseMatrix] {
        &self.post
    }

    fn layer_input(&self, layer: usize) -> &DenseMatrix {
        if layer == 0 {
            &self.input
        } else {
            &self.post[layer - 1]
        }
    }
}

/// What the loss head compares the output against.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Classes(&'a [usize]),
    Values(&'a DenseMatrix),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Values(v) => v.rows(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LossGrad {
    /// Batch-mean loss.
    pub loss: f64,
    pub grad_params: ParamVector,
    /// Gradient of the batch-mean loss with respect to the inputs.
    pub grad_inputs: DenseMatrix,
}

pub fn forward(spec: &MlpSpec, params: &ParamVector, inputs: &DenseMatrix) -> Result<ForwardTrace> {
    spec.check_params(params)?;
    if inputs.cols() != spec.input_dim() {
        return Err(dim_err!(
            "input has {} columns, network expects {}",
            inputs.cols(),
            spec.input_dim()
        ));
    }
    let mut pre = Vec::with_capacity(spec.num_layers());
    let mut post: Vec<DenseMatrix> = Vec::with_capacity(spec.num_layers());
    for (l, &act) in spec.activations.iter().enumerate() {
        let out_dim = spec.layer_dims[l + 1];
        let a = if l == 0 { inputs } else { &post[l - 1] };
        let z = matrix::affine(a, params.block(2 * l), Some(params.block(2 * l + 1)), out_dim);
        let mut y = z.clone();
        for v in y.as_mut_slice() {
            *v = act.apply(*v);
        }
        pre.push(z);
        post.push(y);
    }
    Ok(ForwardTrace {
        input: inputs.clone(),
        pre,
        post,
    })
}

/// Back-propagates `d_output` (the cotangent of the network output) and
/// returns the parameter gradient and the input gradient.
pub fn backward(
    spec: &MlpSpec,
    params: &ParamVector,
    trace: &ForwardTrace,
    d_output: &DenseMatrix,
) -> Result<(ParamVector, DenseMatrix)> {
    spec.check_params(params)?;
    d_output.check_same_shape(trace.output(), "backward cotangent")?;
    let mut grad = ParamVector::zeros(spec.manifest());
    let mut upstream = d_output.clone();
    for l in (0..spec.num_layers()).rev() {
        let act = spec.activations[l];
        let mut delta = upstream;
        for ((d, &x), &y) in delta
            .as_mut_slice()
            .iter_mut()
            .zip(trace.pre[l].as_slice())
            .zip(trace.post[l].as_slice())
        {
            *d *= act.derivative(x, y);
        }
        let w_off = grad.block_offset(2 * l);
        let (w_rows, w_cols) = spec.manifest()[2 * l];
        let b_off = w_off + w_rows * w_cols;
        {
            let g = grad.as_mut_slice();
            matrix::accumulate_transpose_times(trace.layer_input(l), &delta, &mut g[w_off..w_off + w_rows * w_cols]);
            matrix::accumulate_col_sums(&delta, &mut g[b_off..b_off + w_cols]);
        }
        upstream = matrix::times_transpose(&delta, params.block(2 * l), w_rows);
    }
    Ok((grad, upstream))
}

/// Batch-mean loss of `output` under `head` and its gradient with respect
/// to `output`.
pub fn head_loss(head: Head, output: &DenseMatrix, targets: Targets<'_>) -> Result<(f64, DenseMatrix)> {
    let (n, k) = output.shape();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if targets.len() != n {
        return Err(dim_err!("{} targets for a batch of {n}", targets.len()));
    }
    let inv_n = 1.0 / n as f64;
    let mut grad = vec![0.0; n * k];
    let mut total = 0.0;
    match head {
        Head::None => return Err(Error::Contract("loss requested from a network without a loss head")),
        Head::SoftmaxXent => {
            let Targets::Classes(labels) = targets else {
                return Err(Error::Contract("softmax cross-entropy needs class labels"));
            };
            for i in 0..n {
                let y = labels[i];
                if y >= k {
                    return Err(dim_err!("label {y} out of range for {k} classes"));
                }
                let row = output.row(i);
                let lse = log_sum_exp(row);
                total += lse - row[y];
                let g = &mut grad[i * k..(i + 1) * k];
                for (gj, &oj) in g.iter_mut().zip(row) {
                    *gj = libm::exp(oj - lse) * inv_n;
                }
                g[y] -= inv_n;
            }
        }
        Head::Mse => {
            for i in 0..n {
                let row = output.row(i);
                let g = &mut grad[i * k..(i + 1) * k];
                for j in 0..k {
                    let t = match targets {
                        Targets::Values(v) => {
                            if v.cols() != k {
                                return Err(dim_err!("targets have {} columns, output {k}", v.cols()));
                            }
                            v.get(i, j)
                        }
                        Targets::Classes(labels) => {
                            if labels[i] >= k {
                                return Err(dim_err!("label {} out of range for {k} outputs", labels[i]));
                            }
                            if labels[i] == j {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    };
                    let r = row[j] - t;
                    total += r * r;
                    g[j] = 2.0 * r * inv_n;
                }
            }
        }
    }
    Ok((total * inv_n, DenseMatrix::from_raw(n, k, grad)))
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = row.iter().map(|&v| libm::exp(v - mx)).sum();
    mx + libm::log(s)
}

/// Batch-mean loss and its exact gradients with respect to the parameters
/// and the inputs.
pub fn loss_and_grad(
    spec: &MlpSpec,
    params: &ParamVector,
    inputs: &DenseMatrix,
    targets: Targets<'_>,
) -> Result<LossGrad> {
    if spec.head == Head::None {
        return Err(Error::Contract("loss_and_grad on a network without a loss head"));
    }
    if inputs.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let trace = forward(spec, params, inputs)?;
    let (loss, d_out) = head_loss(spec.head, trace.output(), targets)?;
    let (grad_params, grad_inputs) = backward(spec, params, &trace, &d_out)?;
    Ok(LossGrad {
        loss,
        grad_params,
        grad_inputs,
    })
}

/// Batch-mean loss only.
pub fn loss(spec: &MlpSpec, params: &ParamVector, inputs: &DenseMatrix, targets: Targets<'_>) -> Result<f64> {
    let trace = forward(spec, params, inputs)?;
    head_loss(spec.head, trace.output(), targets).map(|(l, _)| l)
}

/// `Jᵀ · cotangent`: the gradient of `⟨cotangent, output(params)⟩` with the
/// cotangent held fixed. Any loss head on `spec` is ignored.
pub fn vjp_params(
    spec: &MlpSpec,
    params: &ParamVector,
    inputs: &DenseMatrix,
    cotangent: &DenseMatrix,
) -> Result<ParamVector> {
    let trace = forward(spec, params, inputs)?;
    if cotangent.shape() != trace.output().shape() {
        return Err(dim_err!(
            "cotangent {:?} does not match output {:?}",
            cotangent.shape(),
            trace.output().shape()
        ));
    }
    backward(spec, params, &trace, cotangent).map(|(g, _)| g)
}

/// Index of the largest logit in each row (first one on ties).
pub fn argmax_rows(output: &DenseMatrix) -> Vec<usize> {
    (0..output.rows())
        .map(|i| {
            let row = output.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
