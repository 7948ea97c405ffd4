mod common;

use common::*;
use rand::seq::SliceRandom;
use rand::Rng;
use weightzoo::data::{gen_synthetic, SyntheticSpec};
use weightzoo::engine::{
    accuracy, argmax, init_params, param_count, permute_units, Activation, InitKind, Initializer, Net, NetworkSpec,
    OptimizerKind, OptimizerState, ParameterSet, Targets,
};

#[test]
fn paper_cnn_has_4970_parameters() {
    let spec = NetworkSpec::small_cnn((28, 28, 1), 10, Activation::Relu, 0.0);
    assert_eq!(param_count(&spec).unwrap(), 4970);
    let p = ParameterSet::<f32>::zeros_for(&spec).unwrap();
    let per_layer: Vec<usize> = (0..4).map(|l| p.layer(l).len()).collect();
    assert_eq!(per_layer, vec![160, 2320, 2320, 170]);
}

#[test]
fn gradients_match_central_differences() {
    let mut r = rng(11);
    for _ in 0..20 {
        let spec = random_spec(&mut r, None);
        let params = random_params(&mut r, &spec, 0.5, false);
        let (x, y) = random_batch(&mut r, &spec, 3);
        let l2 = r.random_range(0.0..1e-2);
        let err = max_gradient_error(&spec, &params, &x, &y, l2);
        assert!(err < 1e-4, "relative error {err} for {spec:?}");
    }
}

#[test]
fn regression_gradient_matches_central_differences() {
    let spec = NetworkSpec::mlp(4, &[5, 3], 1, Activation::Tanh, 0.0);
    let mut r = rng(5);
    let params = random_params(&mut r, &spec, 0.7, false);
    let x: Vec<f64> = (0..12).map(|_| r.random_range(-1.0..1.0)).collect();
    let t = [0.1, 0.5, 0.9];
    let net = Net::new(&spec).unwrap();
    let (_, g) = net.loss_and_grads(&params, &x, Targets::Regression(&t), 0.0, None).unwrap();
    let h = 1e-5;
    for i in 0..params.len() {
        let mut p = params.clone();
        p.as_mut_slice()[i] += h;
        let up = net.loss_and_grads(&p, &x, Targets::Regression(&t), 0.0, None).unwrap().0;
        p.as_mut_slice()[i] -= 2.0 * h;
        let down = net.loss_and_grads(&p, &x, Targets::Regression(&t), 0.0, None).unwrap().0;
        let num = (up - down) / (2.0 * h);
        assert!((num - g.as_slice()[i]).abs() <= 1e-7 + 1e-5 * num.abs(), "param {i}");
    }
}

#[test]
fn zero_parameters_give_uniform_predictions() {
    let spec = NetworkSpec::small_cnn((8, 8, 1), 10, Activation::Relu, 0.0);
    let params = ParameterSet::<f64>::zeros_for(&spec).unwrap();
    let mut r = rng(2);
    let (x, y) = random_batch(&mut r, &spec, 4);
    let net = Net::new(&spec).unwrap();
    assert!(net.forward(&params, &x).unwrap().iter().all(|&v| v == 0.0));
    let (loss, _) = net.loss_and_grads(&params, &x, Targets::Classes(&y), 0.0, None).unwrap();
    assert!((loss - 10f64.ln()).abs() < 1e-12);
}

#[test]
fn l2_adds_its_penalty() {
    let spec = NetworkSpec::mlp(3, &[4], 2, Activation::Relu, 0.0);
    let mut r = rng(3);
    let params = random_params(&mut r, &spec, 1.0, false);
    let (x, y) = random_batch(&mut r, &spec, 5);
    let net = Net::new(&spec).unwrap();
    let a = net.loss_and_grads(&params, &x, Targets::Classes(&y), 0.0, None).unwrap().0;
    let b = net.loss_and_grads(&params, &x, Targets::Classes(&y), 0.01, None).unwrap().0;
    let ss: f64 = params.as_slice().iter().map(|v| v * v).sum();
    assert!((b - a - 0.01 * ss).abs() < 1e-12);
}

#[test]
fn relu_accuracy_is_scale_invariant() {
    let mut r = rng(21);
    for _ in 0..20 {
        let spec = random_spec(&mut r, Some(Activation::Relu));
        let net = Net::new(&spec).unwrap();
        let (x, y) = random_batch(&mut r, &spec, 50);
        for zero_bias in [true, false] {
            let params = random_params(&mut r, &spec, 0.5, zero_bias);
            let base = net.evaluate(&params, &x, &y).unwrap().1;
            for c in [2.0, 10.0, 100.0] {
                let scaled = if zero_bias { params.scaled(c) } else { scale_homogeneous(&params, c) };
                assert_eq!(net.evaluate(&scaled, &x, &y).unwrap().1, base);
            }
        }
    }
}

#[test]
fn permuting_hidden_units_keeps_logits() {
    let mut r = rng(31);
    for _ in 0..20 {
        let spec = random_spec(&mut r, None);
        let params = random_params(&mut r, &spec, 0.5, false);
        let (x, _) = random_batch(&mut r, &spec, 4);
        let net = Net::new(&spec).unwrap();
        let before = net.forward(&params, &x).unwrap();
        let mut p = params.clone();
        for l in 0..spec.param_layer_count() - 1 {
            let units = p.bias(l).len();
            let mut perm: Vec<usize> = (0..units).collect();
            perm.shuffle(&mut r);
            p = permute_units(&spec, &p, l, &perm).unwrap();
        }
        let after = net.forward(&p, &x).unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn training_is_deterministic_and_learns() {
    let mut s = SyntheticSpec::new(4, 40, 12, 3);
    s.noise = 0.3;
    let (train, test) = gen_synthetic(&s).unwrap();
    let spec = NetworkSpec::small_cnn((12, 12, 1), 4, Activation::Relu, 0.1);
    let run = || {
        let init = Initializer {
            kind: InitKind::HeNormal,
            variance: 0.5,
        };
        let mut params = init_params(&spec, init, 9).unwrap();
        let net = Net::new(&spec).unwrap();
        let mut opt = OptimizerState::new(OptimizerKind::Adam, 1e-2, params.len()).unwrap();
        let mut drop = weightzoo::rng::stream(9, &[1]);
        let mut ws = net.workspace();
        let mut grads = ParameterSet::zeros(params.layout().clone());
        for _ in 0..30 {
            for (xb, yb) in train.images().chunks(32 * 144).zip(train.labels().chunks(32)) {
                net.loss_and_grads_into(&params, xb, Targets::Classes(yb), 1e-5, Some(&mut drop), &mut ws, &mut grads)
                    .unwrap();
                opt.step(&mut params, &grads).unwrap();
            }
        }
        params
    };
    let a = run();
    assert_eq!(a, run());
    let acc = accuracy(&spec, &a, &test).unwrap();
    assert!(acc > 0.25 + 0.1, "accuracy {acc}");
}

#[test]
fn argmax_prefers_the_first_of_equals() {
    assert_eq!(argmax(&[0.1, 0.7, 0.7, 0.2]), 1);
    assert_eq!(argmax(&[0.0f32; 10]), 0);
}
