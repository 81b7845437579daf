//! Random instances and independently written oracles shared by the
//! integration tests and the acceptance suite.

#![allow(dead_code)]

use fsl_sage_core::models::SplitSpec;
use fsl_sage_core::numcore::{forward, Activation, DenseMatrix, Head, MlpSpec, ParamVector};
use fsl_sage_core::rng::SimRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn random_activation(rng: &mut SimRng) -> Activation {
    match rng.random_range(0..3) {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        _ => Activation::Identity,
    }
}

/// 1 to 3 layers, widths 1 to 6.
pub fn random_spec(rng: &mut SimRng, head: Head, input_dim: Option<usize>, output_dim: Option<usize>) -> MlpSpec {
    let layers = rng.random_range(1..=3);
    let mut dims = vec![input_dim.unwrap_or_else(|| rng.random_range(1..=6))];
    for _ in 0..layers {
        dims.push(rng.random_range(1..=6));
    }
    if let Some(out) = output_dim {
        *dims.last_mut().unwrap() = out;
    }
    let acts = (0..layers).map(|_| random_activation(rng)).collect();
    MlpSpec::new(dims, acts, head).unwrap()
}

pub fn random_params(spec: &MlpSpec, rng: &mut SimRng, scale: f64) -> ParamVector {
    let mut p = ParamVector::zeros(spec.manifest());
    for v in p.as_mut_slice() {
        *v = rng.random_range(-scale..scale);
    }
    p
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut SimRng, scale: f64) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_labels(n: usize, classes: usize, rng: &mut SimRng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..classes)).collect()
}

/// A random full network with a softmax head, cut somewhere inside, and an
/// auxiliary network on the cut width.
pub fn random_split(rng: &mut SimRng, aux_is_server: bool) -> SplitSpec {
    let layers = rng.random_range(2..=4);
    let classes = rng.random_range(2..=5);
    let mut dims = vec![rng.random_range(1..=6)];
    for _ in 0..layers - 1 {
        dims.push(rng.random_range(1..=6));
    }
    dims.push(classes);
    let acts: Vec<Activation> = (0..layers).map(|_| random_activation(rng)).collect();
    let full = MlpSpec::new(dims, acts, Head::SoftmaxXent).unwrap();
    let cut_index = rng.random_range(1..layers);
    let probe = SplitSpec {
        full: full.clone(),
        cut_index,
        aux: full.clone(),
    };
    let aux = if aux_is_server {
        probe.server_spec()
    } else {
        random_spec(rng, Head::SoftmaxXent, Some(probe.cut_dim()), Some(classes))
    };
    SplitSpec { full, cut_index, aux }
}

/// Smallest |pre-activation| over ReLU layers; infinite when there are none.
pub fn relu_margin(spec: &MlpSpec, params: &ParamVector, inputs: &DenseMatrix) -> f64 {
    let trace = forward(spec, params, inputs).unwrap();
    let mut margin = f64::INFINITY;
    for (l, pre) in trace.pre.iter().enumerate() {
        if spec.activations[l] == Activation::Relu {
            for &v in pre.as_slice() {
                margin = margin.min(v.abs());
            }
        }
    }
    margin
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Relu => x.max(0.0),
        Activation::Tanh => x.tanh(),
        Activation::Identity => x,
    }
}

/// Straight-line forward pass: reads weights by explicit offsets
/// (`W[i][j]` at `i * out + j`, then `out` biases) and loops per element.
pub fn naive_forward(spec: &MlpSpec, params: &[f64], inputs: &DenseMatrix) -> Vec<Vec<f64>> {
    let mut offset = 0;
    let mut rows: Vec<Vec<f64>> = (0..inputs.rows()).map(|r| inputs.row(r).to_vec()).collect();
    for l in 0..spec.num_layers() {
        let (n_in, n_out) = (spec.layer_dims[l], spec.layer_dims[l + 1]);
        let w = &params[offset..offset + n_in * n_out];
        let b = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        rows = rows
            .iter()
            .map(|a| {
                (0..n_out)
                    .map(|j| {
                        let mut s = b[j];
                        for i in 0..n_in {
                            s += a[i] * w[i * n_out + j];
                        }
                        act(spec.activations[l], s)
                    })
                    .collect()
            })
            .collect();
    }
    assert_eq!(offset, params.len());
    rows
}

/// Mean softmax cross-entropy of raw logits, computed directly.
pub fn naive_xent(logits: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &y) in logits.iter().zip(labels) {
        let z: f64 = row.iter().map(|v| v.exp()).sum();
        total += z.ln() - row[y];
    }
    total / labels.len() as f64
}

/// Neumaier-compensated elementwise mean.
pub fn compensated_mean(vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = vectors[0].len();
    (0..n)
        .map(|j| {
            let mut sum = 0.0f64;
            let mut comp = 0.0f64;
            for v in vectors {
                let x = v[j];
                let t = sum + x;
                if sum.abs() >= x.abs() {
                    comp += (sum - t) + x;
                } else {
                    comp += (x - t) + sum;
                }
                sum = t;
            }
            (sum + comp) / vectors.len() as f64
        })
        .collect()
}

/// Wraps a matrix as a single-block parameter vector so `fd_grad` can
/// differentiate with respect to it.
pub fn as_params(m: &DenseMatrix) -> ParamVector {
    ParamVector::from_parts(vec![(m.rows(), m.cols())], m.as_slice().to_vec()).unwrap()
}

pub fn as_matrix(p: &ParamVector, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_vec(rows, cols, p.as_slice().to_vec()).unwrap()
}

/// A quick configuration: few rows, few rounds, the default architecture.
pub fn small_config() -> fsl_sage_core::RunConfig {
    let mut c = fsl_sage_core::RunConfig::default();
    c.data.samples = 600;
    c.data.eval_samples = 120;
    c.schedule.rounds = 6;
    c.schedule.local_steps = 4;
    c.schedule.uplinks_per_round = 2;
    c.schedule.align_interval = 2;
    c.optim.batch_size = 16;
    c.optim.align_steps = 5;
    c.protocol.probe_size = 64;
    c
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}
