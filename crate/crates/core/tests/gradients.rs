mod common;

use proptest::prelude::*;
use seagull::autodiff::Tape;
use seagull::gradcheck::{
    analytic_param_grads, central_difference, kink_pattern, numeric_param_grad, relative_error, straddles_kink, ParamRef,
};
use seagull::network::{Network, NetworkSpec};
use seagull::{ActivationKind, LogPowAbs, Tensor};

use common::uniform_tensor;

fn smooth_net(seed: u64) -> Network {
    let spec = NetworkSpec::mlp(9, &[7, 5], 1, ActivationKind::Tanh).unwrap();
    let net = Network::build(spec, seed).unwrap();
    let net = net.replace_activation(0, ActivationKind::Seagull).unwrap();
    let net = net.replace_activation(1, ActivationKind::Softplus).unwrap();
    // give the zero-initialized biases something to do
    let mut net = net;
    for l in 0..net.num_layers() {
        if let Some(b) = net.bias_mut(l) {
            for (i, x) in b.data_mut().iter_mut().enumerate() {
                *x = 0.1 * (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
    }
    net
}

#[test]
fn every_parameter_of_a_small_smooth_network() {
    let net = smooth_net(11);
    let x = uniform_tensor(6, 9, 1, 2.0);
    let y = uniform_tensor(6, 1, 2, 1.0);
    let grads = analytic_param_grads(&net, &x, &y).unwrap();
    let mut worst = 0.0f64;
    for (layer, (dw, db)) in grads.iter().enumerate() {
        for index in 0..dw.len() {
            let n = numeric_param_grad(&net, ParamRef::Weight { layer, index }, &x, &y, 1e-6).unwrap();
            worst = worst.max(relative_error(dw.data()[index], n, 1e-6));
        }
        let db = db.as_ref().expect("mlp layers have biases");
        for index in 0..db.len() {
            let n = numeric_param_grad(&net, ParamRef::Bias { layer, index }, &x, &y, 1e-6).unwrap();
            worst = worst.max(relative_error(db.data()[index], n, 1e-6));
        }
    }
    assert!(worst < 1e-6, "worst relative error {worst:e}");
}

/// Scalar loss `sum(mul(f(A), B))` probes the vector-Jacobian product of `f`
/// against an arbitrary cotangent `B`.
fn vjp_check(a: &Tensor, cot: &Tensor, f: impl Fn(&mut Tape, seagull::autodiff::Var) -> seagull::autodiff::Var) {
    let mut tape = Tape::new();
    let av = tape.leaf(a.clone());
    let out = f(&mut tape, av);
    let c = tape.constant(cot.clone());
    let prod = tape.mul(out, c).unwrap();
    let loss = tape.sum(prod);
    let g = tape.backward(loss).unwrap().get(av);

    let eval = |a2: &Tensor| {
        let mut t = Tape::new();
        let v = t.constant(a2.clone());
        let o = f(&mut t, v);
        let c = t.constant(cot.clone());
        let p = t.mul(o, c).unwrap();
        let s = t.sum(p);
        t.value(s).data()[0]
    };
    for i in 0..a.len() {
        let numeric = central_difference(
            |h| {
                let mut a2 = a.clone();
                a2.data_mut()[i] = h;
                eval(&a2)
            },
            a.data()[i],
            1e-6,
        );
        let e = relative_error(g.data()[i], numeric, 1e-6);
        assert!(e < 1e-7, "entry {i}: analytic {} numeric {numeric} ({e:e})", g.data()[i]);
    }
}

#[test]
fn matmul_vjp_both_sides() {
    let a = uniform_tensor(3, 4, 3, 1.0);
    let b = uniform_tensor(4, 2, 4, 1.0);
    let cot = uniform_tensor(3, 2, 5, 1.0);
    let (b1, a1) = (b.clone(), a.clone());
    vjp_check(&a, &cot, move |t, v| {
        let bv = t.constant(b1.clone());
        t.matmul(v, bv).unwrap()
    });
    vjp_check(&b, &cot, move |t, v| {
        let av = t.constant(a1.clone());
        t.matmul(av, v).unwrap()
    });
}

#[test]
fn add_bias_transpose_and_activation_vjps() {
    let x = uniform_tensor(5, 3, 6, 1.0);
    let b = Tensor::vector(vec![0.3, -0.2, 0.7]);
    let cot = uniform_tensor(5, 3, 7, 1.0);
    let (x1, b1) = (x.clone(), b.clone());
    vjp_check(&b, &cot, move |t, v| {
        let xv = t.constant(x1.clone());
        t.add_bias(xv, v).unwrap()
    });
    vjp_check(&x, &cot, move |t, v| {
        let bv = t.constant(b1.clone());
        t.add_bias(v, bv).unwrap()
    });
    let cot_t = uniform_tensor(3, 5, 8, 1.0);
    vjp_check(&x, &cot_t, |t, v| t.transpose(v).unwrap());
    for kind in [ActivationKind::Seagull, ActivationKind::Softplus, ActivationKind::Sine, ActivationKind::ELU] {
        vjp_check(&x, &cot, move |t, v| t.activation(v, kind));
    }
}

#[test]
fn backward_is_linear_in_the_loss() {
    let net = smooth_net(3);
    let x = uniform_tensor(4, 9, 9, 2.0);
    let (alpha, beta) = (0.75, -2.5);
    let mut tape = Tape::new();
    let p = net.register(&mut tape);
    let xv = tape.constant(x.clone());
    let out = net.forward_on_tape(&mut tape, &p, xv).unwrap();
    let l1 = tape.sum(out);
    let sq = tape.mul(out, out).unwrap();
    let l2 = tape.sum(sq);
    let s1 = tape.scale(l1, alpha);
    let s2 = tape.scale(l2, beta);
    let both = tape.add(s1, s2).unwrap();
    let combined = tape.backward(both).unwrap().get(p[0].weight);
    let g1 = tape.backward(l1).unwrap().get(p[0].weight);
    let g2 = tape.backward(l2).unwrap().get(p[0].weight);
    for i in 0..combined.len() {
        let expect = alpha * g1.data()[i] + beta * g2.data()[i];
        assert!((combined.data()[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
    }
}

#[test]
fn unbiased_even_first_layer_network_is_even_in_input() {
    for act in [ActivationKind::Seagull, ActivationKind::Square, ActivationKind::LogPowAbs(LogPowAbs::new(1.5, 0.0).unwrap())] {
        let net = Network::build(NetworkSpec::benchmark_unbiased_first(act, ActivationKind::Relu), 5).unwrap();
        let x = uniform_tensor(50, 9, 10, 2.0);
        let neg = x.map(|v| -v);
        assert_eq!(net.forward(&x).unwrap(), net.forward(&neg).unwrap(), "{act}");
    }
}

#[test]
fn pre_activations_reproduce_forward() {
    let net = Network::build(NetworkSpec::benchmark(ActivationKind::Relu), 8).unwrap();
    let x = uniform_tensor(5, 9, 11, 2.0);
    let z = net.pre_activations(&x).unwrap();
    assert_eq!(z.len(), 5);
    // the output layer is the identity
    assert_eq!(z[4], net.forward(&x).unwrap());
    // one entry per hidden ReLU unit per row; the output layer has no kink
    assert_eq!(kink_pattern(&net, &x).unwrap().len(), 5 * 400);
}

#[test]
fn kink_straddling_is_detected() {
    // single ReLU unit with pre-activation exactly 1e-7 for the only input
    let spec = NetworkSpec::new(vec![
        seagull::LayerSpec::new(1, 1, ActivationKind::Relu, true),
        seagull::LayerSpec::new(1, 1, ActivationKind::Identity, false),
    ])
    .unwrap();
    let net = Network::from_parts(
        spec,
        vec![Tensor::new(vec![1, 1], vec![1.0]).unwrap(), Tensor::new(vec![1, 1], vec![1.0]).unwrap()],
        vec![Some(Tensor::vector(vec![0.0])), None],
    )
    .unwrap();
    let x = Tensor::new(vec![1, 1], vec![1e-7]).unwrap();
    let bias = ParamRef::Bias { layer: 0, index: 0 };
    assert!(straddles_kink(&net, bias, &x, 1e-6).unwrap());
    assert!(!straddles_kink(&net, bias, &x, 1e-8).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn even_activations_are_bitwise_even(x in -50.0f64..50.0) {
        for k in [ActivationKind::Seagull, ActivationKind::Square, ActivationKind::LogPowAbs(LogPowAbs::new(0.5, 1e-2).unwrap())] {
            prop_assert_eq!(k.eval(x), k.eval(-x));
            prop_assert_eq!(k.deriv(x), -k.deriv(-x));
        }
    }

    #[test]
    fn fused_eval_deriv_matches_separate_calls(x in -20.0f64..20.0) {
        for k in [ActivationKind::Relu, ActivationKind::ELU, ActivationKind::Sigmoid, ActivationKind::Tanh,
                  ActivationKind::Softplus, ActivationKind::Seagull, ActivationKind::Sine] {
            let (v, d) = k.eval_deriv(x);
            prop_assert_eq!(v, k.eval(x));
            prop_assert!((d - k.deriv(x)).abs() <= 1e-15 * (1.0 + d.abs()));
        }
    }

    #[test]
    fn seagull_derivative_closed_form(x in -1e3f64..1e3) {
        let d = ActivationKind::Seagull.deriv(x);
        prop_assert!((d - 2.0 * x / (1.0 + x * x)).abs() <= 1e-15 * (1.0 + d.abs()));
        prop_assert!(d.abs() <= 1.0);
    }
}
