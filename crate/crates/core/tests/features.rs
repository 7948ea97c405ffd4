use proptest::prelude::*;
use weightzoo::data::{gen_synthetic, SyntheticSpec};
use weightzoo::engine::{init_params, Activation, InitKind, Initializer, NetworkSpec, ParameterSet};
use weightzoo::features::{extract, featurize_zoo, layer_norms, stat_block, FeatureKind, FeatureTable};
use weightzoo::zoo::{build_zoo, sample_hyperparams, BuildConfig};

fn paper_cnn_params(seed: u64) -> ParameterSet<f32> {
    let spec = NetworkSpec::small_cnn((28, 28, 1), 10, Activation::Relu, 0.0);
    let init = Initializer {
        kind: InitKind::HeNormal,
        variance: 0.3,
    };
    let mut p = init_params(&spec, init, seed).unwrap();
    // Give the biases something to summarize.
    for l in 0..p.num_layers() {
        for (i, b) in p.bias_mut(l).iter_mut().enumerate() {
            *b = (i as f32 * 0.37).sin() * 0.1;
        }
    }
    p
}

fn dim(kind: &str) -> usize {
    let hp = sample_hyperparams(0, 0);
    extract(&paper_cnn_params(1), &kind.parse().unwrap(), Some(&hp)).unwrap().len()
}

#[test]
fn paper_cnn_dimensions() {
    assert_eq!(dim("flat_all"), 4970);
    assert_eq!(dim("flat_layer:4"), 170);
    assert_eq!(dim("stats_global"), 7);
    assert_eq!(dim("stats_per_layer"), 56);
    assert_eq!(dim("stats_layer_subset:4"), 14);
    assert_eq!(dim("stats_layer_subset:final"), 14);
    assert_eq!(dim("stats_layer_subset:1,4"), 28);
    assert_eq!(dim("norms_l1"), 8);
    assert_eq!(dim("norms_l2"), 8);
    assert_eq!(dim("hyperparams"), 7);
    assert_eq!(dim("hyperparams_lr"), 1);
    assert_eq!(dim("hyperparams_plus_flat"), 4977);
    assert_eq!(dim("bias_range"), 4);
}

#[test]
fn names_follow_layer_then_kernel_then_stat_order() {
    let fv = extract(&paper_cnn_params(1), &FeatureKind::StatsPerLayer, None).unwrap();
    assert_eq!(fv.names[0], "L1.kernel.mean");
    assert_eq!(fv.names[6], "L1.kernel.q100");
    assert_eq!(fv.names[7], "L1.bias.mean");
    assert_eq!(fv.names[55], "L4.bias.q100");
    let fin = extract(&paper_cnn_params(1), &"stats_layer_subset:final".parse().unwrap(), None).unwrap();
    assert_eq!(fin.names[0], "Lfinal.kernel.mean");
    assert_eq!(fin.values, fv.values[42..]);
    let flat = extract(&paper_cnn_params(1), &FeatureKind::FlatAll, None).unwrap();
    assert_eq!(flat.names[160 - 16], "L1.bias.0");
    assert_eq!(flat.names[4969], "L4.bias.9");
}

#[test]
fn missing_layer_and_missing_hyperparams_rejected() {
    let p = paper_cnn_params(1);
    assert!(extract(&p, &FeatureKind::FlatLayer(5), None).is_err());
    assert!(extract(&p, &"stats_layer_subset:1,7".parse().unwrap(), None).is_err());
    assert!(extract(&p, &FeatureKind::Hyperparams, None).is_err());
    assert!(layer_norms(&p, 3).is_err());
}

#[test]
fn fresh_networks_have_zero_bias_range() {
    let spec = NetworkSpec::small_cnn((28, 28, 1), 10, Activation::Tanh, 0.0);
    let init = Initializer {
        kind: InitKind::Orthogonal,
        variance: 0.1,
    };
    let p = init_params(&spec, init, 4).unwrap();
    let fv = extract(&p, &FeatureKind::BiasRange, None).unwrap();
    assert_eq!(fv.values, vec![0.0; 4]);
}

#[test]
fn norms_of_a_small_kernel() {
    let spec = NetworkSpec::mlp(2, &[], 1, Activation::Relu, 0.0);
    let p = ParameterSet::unflatten(ParameterSet::<f32>::zeros_for(&spec).unwrap().layout().clone(), vec![3.0, -4.0, 0.0])
        .unwrap();
    assert_eq!(layer_norms(&p, 2).unwrap().values, vec![5.0, 0.0]);
    assert_eq!(layer_norms(&p, 1).unwrap().values, vec![7.0, 0.0]);
}

#[test]
fn norms_scale_with_the_weights() {
    let p = paper_cnn_params(2);
    for order in [1, 2] {
        let a = layer_norms(&p, order).unwrap().values;
        let b = layer_norms(&p.scaled(4.0), order).unwrap().values;
        for (x, y) in a.iter().zip(&b) {
            assert!((4.0 * x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }
}

#[test]
fn per_layer_stats_transform_under_scaling() {
    let p = paper_cnn_params(3);
    let a = extract(&p, &FeatureKind::StatsPerLayer, None).unwrap().values;
    // A power of two scales every f32 exactly.
    let c = 8.0;
    let b = extract(&p.scaled(c as f32), &FeatureKind::StatsPerLayer, None).unwrap().values;
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        let expect = if i % 7 == 1 { c * c * x } else { c * x };
        assert!((expect - y).abs() <= 1e-12 * expect.abs().max(1e-300), "feature {i}: {expect} vs {y}");
    }
}

fn two_pass(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64)
}

proptest! {
    #[test]
    fn stat_block_matches_oracle(v in prop::collection::vec(-1e3f64..1e3, 1..200)) {
        let s = stat_block(&v).unwrap();
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert_eq!(s.q0, sorted[0]);
        prop_assert_eq!(s.q100, *sorted.last().unwrap());
        let (m, var) = two_pass(&v);
        prop_assert!((s.mean - m).abs() <= 1e-6 * m.abs().max(1.0));
        prop_assert!((s.variance - var).abs() <= 1e-6 * var.max(1.0));
        prop_assert!(s.q0 <= s.q25 && s.q25 <= s.q50 && s.q50 <= s.q75 && s.q75 <= s.q100);
        prop_assert!(s.variance >= 0.0);
    }

    #[test]
    fn stat_block_ignores_order(mut v in prop::collection::vec(-10f64..10.0, 1..100), seed in any::<u64>()) {
        let a = stat_block(&v).unwrap();
        let mut r = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(&mut v[..], &mut r);
        let b = stat_block(&v).unwrap();
        prop_assert_eq!(a.q0, b.q0);
        prop_assert_eq!(a.q25, b.q25);
        prop_assert_eq!(a.q50, b.q50);
        prop_assert_eq!(a.q75, b.q75);
        prop_assert_eq!(a.q100, b.q100);
        prop_assert!((a.mean - b.mean).abs() <= 1e-12 * a.mean.abs().max(1.0));
        prop_assert!((a.variance - b.variance).abs() <= 1e-12 * a.variance.max(1.0));
    }
}

#[test]
fn featurized_zoo_round_trips_through_csv() {
    let mut s = SyntheticSpec::new(4, 20, 8, 3);
    s.test_per_class = 8;
    let (train, test) = gen_synthetic(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = BuildConfig::new(5, 8, 1);
    cfg.threads = Some(1);
    let spec = NetworkSpec::small_cnn((8, 8, 1), 4, Activation::Relu, 0.0);
    let zoo = build_zoo(&spec, &train, &test, &cfg, dir.path()).unwrap();
    let zoo = zoo.with_records(zoo.ok_records().cloned().collect());
    for kind in ["stats_per_layer", "flat_all", "hyperparams"] {
        let table = featurize_zoo(&zoo, &kind.parse().unwrap()).unwrap();
        assert_eq!(table.n_rows(), zoo.len());
        for (t, r) in table.targets.iter().zip(&zoo.records) {
            assert_eq!(Some(*t), r.test_accuracy());
        }
        let path = dir.path().join(format!("{kind}.csv"));
        table.write_csv(&path).unwrap();
        let back = FeatureTable::read_csv(&path).unwrap();
        assert_eq!(back.targets, table.targets);
        assert_eq!(back.names, table.names);
        assert_eq!(back.metadata, table.metadata);
        for (a, b) in back.values().iter().zip(table.values()) {
            assert!((a - b).abs() <= 1e-8 * b.abs());
        }
        if kind == "flat_all" {
            // Nine significant digits restore every f32 parameter exactly.
            for (a, b) in back.values().iter().zip(table.values()) {
                assert_eq!(*a as f32, *b as f32);
            }
        }
        // Rewriting the parsed table gives the same bytes.
        assert_eq!(back.to_csv(), std::fs::read_to_string(&path).unwrap());
        assert_eq!(featurize_zoo(&zoo, &kind.parse().unwrap()).unwrap().to_csv(), table.to_csv());
    }
}

#[test]
fn table_header_and_version_checks() {
    let csv = "# weightzoo feature table v1\n# kind: stats_global\nmodel_id,all.mean,target\nm1,1.0e0,0.5\n";
    let t = FeatureTable::from_csv(csv).unwrap();
    assert_eq!(t.n_rows(), 1);
    assert!(FeatureTable::from_csv(&csv.replace("v1", "v9")).is_err());
    assert!(FeatureTable::from_csv(&csv.replace("m1,1.0e0", "m1,nan")).is_err());
    assert!(FeatureTable::from_csv(&csv.replace(",target", "")).is_err());
}
