mod support;

use fsl_sage_core::models::{compose, decompose};
use fsl_sage_core::numcore::{
    backward, fd_grad, forward, input_grad_match, loss, loss_and_grad, vjp_params, Head, Targets,
};
use rand::Rng;
use support::*;

const STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-6;
const KINK: f64 = 1e-3;

#[test]
fn forward_matches_naive_reimplementation() {
    let mut rng = rng(1);
    for _ in 0..200 {
        let spec = random_spec(&mut rng, Head::SoftmaxXent, None, None);
        let params = random_params(&spec, &mut rng, 1.0);
        let x = random_matrix(rng.random_range(1..=5), spec.input_dim(), &mut rng, 2.0);
        let got = forward(&spec, &params, &x).unwrap();
        let want: Vec<f64> = naive_forward(&spec, params.as_slice(), &x).concat();
        assert!(rel_err(got.output().as_slice(), &want) <= 1e-12);
        let labels = random_labels(x.rows(), spec.output_dim(), &mut rng);
        let l = loss(&spec, &params, &x, Targets::Classes(&labels)).unwrap();
        let naive = naive_xent(&naive_forward(&spec, params.as_slice(), &x), &labels);
        assert!((l - naive).abs() <= 1e-12 * naive.abs().max(1.0));
    }
}

#[test]
fn forward_is_bitwise_deterministic() {
    let mut rng = rng(2);
    let spec = random_spec(&mut rng, Head::SoftmaxXent, Some(6), Some(4));
    let params = random_params(&spec, &mut rng, 1.0);
    let x = random_matrix(9, 6, &mut rng, 1.0);
    let a = forward(&spec, &params, &x).unwrap();
    let b = forward(&spec, &params, &x).unwrap();
    let bits = |m: &fsl_sage_core::numcore::DenseMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(a.output()), bits(b.output()));
}

#[test]
fn loss_gradients_match_finite_differences() {
    let mut rng = rng(3);
    let mut accepted = 0;
    while accepted < 120 {
        let head = if rng.random_bool(0.5) {
            Head::SoftmaxXent
        } else {
            Head::Mse
        };
        let spec = random_spec(&mut rng, head, None, None);
        let params = random_params(&spec, &mut rng, 1.0);
        let x = random_matrix(rng.random_range(1..=4), spec.input_dim(), &mut rng, 1.5);
        if relu_margin(&spec, &params, &x) < KINK {
            continue;
        }
        let labels = random_labels(x.rows(), spec.output_dim(), &mut rng);
        let t = Targets::Classes(&labels);
        let lg = loss_and_grad(&spec, &params, &x, t).unwrap();
        let fd = fd_grad(|p| loss(&spec, p, &x, t).unwrap(), &params, STEP);
        let e = rel_err(lg.grad_params.as_slice(), fd.as_slice());
        assert!(e <= FD_TOL, "param gradient rel err {e:e} for {spec:?}");
        let fdx = fd_grad(
            |p| loss(&spec, &params, &as_matrix(p, x.rows(), x.cols()), t).unwrap(),
            &as_params(&x),
            STEP,
        );
        let e = rel_err(lg.grad_inputs.as_slice(), fdx.as_slice());
        assert!(e <= FD_TOL, "input gradient rel err {e:e} for {spec:?}");
        accepted += 1;
    }
}

#[test]
fn vjp_matches_finite_differences_of_inner_product() {
    let mut rng = rng(4);
    let mut accepted = 0;
    while accepted < 120 {
        let spec = random_spec(&mut rng, Head::None, None, None);
        let params = random_params(&spec, &mut rng, 1.0);
        let x = random_matrix(rng.random_range(1..=4), spec.input_dim(), &mut rng, 1.5);
        if relu_margin(&spec, &params, &x) < KINK {
            continue;
        }
        let u = random_matrix(x.rows(), spec.output_dim(), &mut rng, 1.0);
        let got = vjp_params(&spec, &params, &x, &u).unwrap();
        let fd = fd_grad(
            |p| forward(&spec, p, &x).unwrap().output().dot(&u).unwrap(),
            &params,
            STEP,
        );
        let e = rel_err(got.as_slice(), fd.as_slice());
        assert!(e <= FD_TOL, "vjp rel err {e:e}");
        accepted += 1;
    }
}

#[test]
fn alignment_gradient_matches_finite_differences() {
    let mut rng = rng(5);
    let mut accepted = 0;
    while accepted < 120 {
        let spec = random_spec(&mut rng, Head::SoftmaxXent, None, None);
        let params = random_params(&spec, &mut rng, 1.0);
        let x = random_matrix(rng.random_range(1..=4), spec.input_dim(), &mut rng, 1.5);
        if relu_margin(&spec, &params, &x) < KINK {
            continue;
        }
        let labels = random_labels(x.rows(), spec.output_dim(), &mut rng);
        let t = Targets::Classes(&labels);
        let reference = random_matrix(x.rows(), x.cols(), &mut rng, 0.3);
        let got = input_grad_match(&spec, &params, &x, t, &reference).unwrap();
        let residual = |p: &fsl_sage_core::numcore::ParamVector| {
            let z = loss_and_grad(&spec, p, &x, t).unwrap().grad_inputs;
            z.sub(&reference).unwrap().norm_sq()
        };
        assert!((got.residual_sq - residual(&params)).abs() <= 1e-14);
        let fd = fd_grad(residual, &params, STEP);
        let e = rel_err(got.grad.as_slice(), fd.as_slice());
        assert!(e <= FD_TOL, "alignment gradient rel err {e:e} for {spec:?}");
        accepted += 1;
    }
}

#[test]
fn alignment_gradient_for_mse_head_matches_finite_differences() {
    let mut rng = rng(6);
    let mut accepted = 0;
    while accepted < 40 {
        let spec = random_spec(&mut rng, Head::Mse, None, None);
        let params = random_params(&spec, &mut rng, 1.0);
        let x = random_matrix(rng.random_range(1..=4), spec.input_dim(), &mut rng, 1.5);
        if relu_margin(&spec, &params, &x) < KINK {
            continue;
        }
        let targets = random_matrix(x.rows(), spec.output_dim(), &mut rng, 1.0);
        let t = Targets::Values(&targets);
        let reference = random_matrix(x.rows(), x.cols(), &mut rng, 0.3);
        let got = input_grad_match(&spec, &params, &x, t, &reference).unwrap();
        let fd = fd_grad(
            |p| {
                loss_and_grad(&spec, p, &x, t)
                    .unwrap()
                    .grad_inputs
                    .sub(&reference)
                    .unwrap()
                    .norm_sq()
            },
            &params,
            STEP,
        );
        assert!(rel_err(got.grad.as_slice(), fd.as_slice()) <= FD_TOL);
        accepted += 1;
    }
}

#[test]
fn client_block_equals_vjp_with_server_cut_gradient() {
    let mut rng = rng(7);
    for _ in 0..50 {
        let split = random_split(&mut rng, false);
        let client_spec = split.client_spec();
        let server_spec = split.server_spec();
        let xc = random_params(&client_spec, &mut rng, 1.0);
        let xs = random_params(&server_spec, &mut rng, 1.0);
        let x = random_matrix(rng.random_range(1..=6), split.full.input_dim(), &mut rng, 1.5);
        let labels = random_labels(x.rows(), split.full.output_dim(), &mut rng);

        let (full_spec, full) = compose(&split, &xc, &xs).unwrap();
        let composed = loss_and_grad(&full_spec, &full, &x, Targets::Classes(&labels)).unwrap();
        let (client_block, server_block) = decompose(&split, &composed.grad_params).unwrap();

        let trace = forward(&client_spec, &xc, &x).unwrap();
        let server = loss_and_grad(&server_spec, &xs, trace.output(), Targets::Classes(&labels)).unwrap();
        let via_vjp = vjp_params(&client_spec, &xc, &x, &server.grad_inputs).unwrap();

        assert!(rel_err(client_block.as_slice(), via_vjp.as_slice()) <= 1e-12);
        assert!(rel_err(server_block.as_slice(), server.grad_params.as_slice()) <= 1e-12);
        assert!((composed.loss - server.loss).abs() <= 1e-12 * composed.loss.abs().max(1.0));

        // input gradient of the whole network, pulled back through the cut
        let (_, dx) = backward(&client_spec, &xc, &trace, &server.grad_inputs).unwrap();
        assert!(rel_err(dx.as_slice(), composed.grad_inputs.as_slice()) <= 1e-12);
    }
}
