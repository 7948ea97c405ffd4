mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use weightzoo::data::{gen_synthetic, SyntheticSpec};
use weightzoo::engine::{init_params, Activation, InitKind, Initializer, NetworkSpec, ParameterSet};
use weightzoo::estimators::{fit_gbm, fit_random_forest, GbmConfig};
use weightzoo::features::{featurize_zoo, FeatureKind, FeatureTable};
use weightzoo::metrics::{
    apply_modification, evaluate, invariance_probe, kendall_tau, mad, mse, r2_score, tau_counts, transfer_matrix,
    EvalReport, ProbeKind, ProbeModification,
};
use weightzoo::zoo::{build_zoo, BuildConfig};
use weightzoo::Error;

fn sorted_bits(v: &[f32]) -> Vec<u32> {
    let mut b: Vec<u32> = v.iter().map(|x| x.to_bits()).collect();
    b.sort_unstable();
    b
}

fn cnn_params(seed: u64) -> ParameterSet<f32> {
    let spec = NetworkSpec::small_cnn((28, 28, 1), 10, Activation::Relu, 0.0);
    let init = Initializer {
        kind: InitKind::Normal,
        variance: 0.05,
    };
    let mut p = init_params(&spec, init, seed).unwrap();
    for l in 0..4 {
        for (i, b) in p.bias_mut(l).iter_mut().enumerate() {
            *b = 1.0 + l as f32 + i as f32 * 1e-3;
        }
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kendall_matches_pair_counting(n in 2usize..200, levels in 2u32..40, seed in any::<u64>()) {
        // Few distinct levels produce plenty of ties.
        let mut r = rng(seed);
        let a: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64).collect();
        let b: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64 / 7.0).collect();
        match (kendall_tau(&a, &b), kendall_naive(&a, &b)) {
            (Ok(got), Some(want)) => {
                prop_assert!((got - want).abs() <= 1e-12, "{} vs {}", got, want);
                prop_assert!((-1.0..=1.0).contains(&got));
            }
            (Err(Error::UndefinedScore(_)), None) => {}
            (got, want) => prop_assert!(false, "{:?} vs {:?}", got, want),
        }
    }

    #[test]
    fn kendall_is_symmetric_and_rank_based(v in prop::collection::vec(-5.0f64..5.0, 3..60)) {
        let w: Vec<f64> = v.iter().map(|x| x.sin()).collect();
        if let Ok(t) = kendall_tau(&v, &w) {
            prop_assert!((kendall_tau(&w, &v).unwrap() - t).abs() < 1e-15);
            // A strictly increasing map of either argument changes nothing.
            let e: Vec<f64> = v.iter().map(|x| x.exp()).collect();
            prop_assert!((kendall_tau(&e, &w).unwrap() - t).abs() < 1e-15);
            let neg: Vec<f64> = w.iter().map(|x| -x).collect();
            prop_assert!((kendall_tau(&v, &neg).unwrap() + t).abs() < 1e-15);
        }
    }
}

proptest! {
    #[test]
    fn r2_ignores_a_shared_shift(
        pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..100),
        c in -10.0f64..10.0,
    ) {
        let (y, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(base) = r2_score(&y, &p) {
            let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
            let ps: Vec<f64> = p.iter().map(|v| v + c).collect();
            let shifted = r2_score(&ys, &ps).unwrap();
            prop_assert!((shifted - base).abs() <= 1e-9 * base.abs().max(1.0), "{} vs {}", shifted, base);
            prop_assert!(base <= 1.0);
        }
    }
}

#[test]
fn kendall_anchors() {
    assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
    assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    let c = tau_counts(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 3.0]).unwrap();
    assert_eq!((c.pairs, c.ties_a, c.ties_b), (6, 1, 1));
    assert!(matches!(kendall_tau(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::UndefinedScore(_))));
    assert!(kendall_tau(&[1.0], &[1.0, 2.0]).is_err());
    assert!(kendall_tau(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    let t = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    assert!((t - 2.0 / 3.0).abs() < 1e-12);
    let r = r2_score(&[0.0, 0.0, 1.0, 1.0], &[0.25, 0.25, 0.75, 0.75]).unwrap();
    assert!((r - 0.75).abs() < 1e-12);
}

#[test]
fn kendall_handles_a_large_input_quickly() {
    let mut r = rng(1);
    let a: Vec<f64> = (0..200_000).map(|_| r.random_range(0.0..1.0)).collect();
    let b: Vec<f64> = a.iter().map(|x| x + r.random_range(-0.1..0.1)).collect();
    let t = kendall_tau(&a, &b).unwrap();
    assert!(t > 0.7 && t < 1.0);
}

#[test]
fn regression_scores() {
    let y = [0.1, 0.4, 0.5, 0.9];
    assert_eq!(mse(&y, &y).unwrap(), 0.0);
    assert_eq!(r2_score(&y, &y).unwrap(), 1.0);
    let p = [0.2, 0.3, 0.6, 0.8];
    assert!((mse(&y, &p).unwrap() - 0.01).abs() < 1e-15);
    assert!((mad(&y, &p).unwrap() - 0.1).abs() < 1e-15);
    // Predicting the mean scores zero; a constant shift away from it goes negative.
    let m = [0.475; 4];
    assert!(r2_score(&y, &m).unwrap().abs() < 1e-12);
    let shifted: Vec<f64> = y.iter().map(|v| v + 0.3).collect();
    let var = y.iter().map(|v| (v - 0.475f64).powi(2)).sum::<f64>() / 4.0;
    assert!((r2_score(&y, &shifted).unwrap() - (1.0 - 0.09 / var)).abs() < 1e-12);
    assert!(matches!(r2_score(&[0.5; 3], &[0.1, 0.2, 0.3]), Err(Error::UndefinedScore(_))));
    assert!(mse(&y, &p[..3]).is_err());
}

#[test]
fn permutations_keep_the_multiset_of_values() {
    let p = cnn_params(3);
    let n = p.num_layers();
    for mix in [false, true] {
        for kind in [
            ProbeKind::GlobalPermute,
            ProbeKind::PermuteAllLayers,
            ProbeKind::PermuteConvLayers,
            ProbeKind::PermuteFinalLayer,
        ] {
            let q = apply_modification(&p, &ProbeModification::permute(kind, mix, 9)).unwrap();
            assert_eq!(q.layout(), p.layout());
            assert_ne!(q, p, "{kind:?} did nothing");
            assert_eq!(sorted_bits(q.as_slice()), sorted_bits(p.as_slice()));
            let touched: Vec<usize> = (0..n).filter(|&l| q.layer(l) != p.layer(l)).collect();
            match kind {
                ProbeKind::PermuteConvLayers => assert_eq!(touched, vec![0, 1, 2]),
                ProbeKind::PermuteFinalLayer => assert_eq!(touched, vec![3]),
                _ => assert_eq!(touched, vec![0, 1, 2, 3]),
            }
            if kind != ProbeKind::GlobalPermute {
                for l in 0..n {
                    assert_eq!(sorted_bits(q.layer(l)), sorted_bits(p.layer(l)));
                }
            }
            // Biases are all at least 1 and kernels are small, so mixing is visible.
            let biases: Vec<f32> = (0..n).flat_map(|l| q.bias(l).to_vec()).collect();
            let stayed = biases.iter().all(|&b| b >= 1.0);
            assert_eq!(stayed, !mix, "{kind:?} mix={mix}");
            if !mix {
                for l in 0..n {
                    if kind != ProbeKind::GlobalPermute {
                        assert_eq!(sorted_bits(q.bias(l)), sorted_bits(p.bias(l)));
                    }
                }
            }
        }
    }
    let again = ProbeModification::permute(ProbeKind::GlobalPermute, true, 9);
    assert_eq!(apply_modification(&p, &again).unwrap(), apply_modification(&p, &again).unwrap());
}

#[test]
fn scaling_and_identity() {
    let p = cnn_params(4);
    assert_eq!(apply_modification(&p, &ProbeModification::identity()).unwrap(), p);
    let q = apply_modification(&p, &ProbeModification::scale(2.0)).unwrap();
    assert_eq!(q, p.scaled(2.0));
    assert!(apply_modification(&p, &ProbeModification::scale(0.0)).is_err());
    assert_eq!(ProbeModification::scale(2.0).label(), "scale(2)");
    assert_eq!(
        ProbeModification::permute(ProbeKind::PermuteFinalLayer, true, 0).label(),
        "permute_final_layer(mixing)"
    );
}

fn tiny_zoo(dir: &std::path::Path, seed: u64) -> weightzoo::zoo::ZooCollection {
    let mut s = SyntheticSpec::new(4, 20, 8, seed);
    s.test_per_class = 10;
    let (train, test) = gen_synthetic(&s).unwrap();
    let mut cfg = BuildConfig::new(12, seed, 2);
    cfg.threads = Some(1);
    cfg.batch_size = 32;
    let spec = NetworkSpec::small_cnn((8, 8, 1), 4, Activation::Relu, 0.0);
    build_zoo(&spec, &train, &test, &cfg, dir).unwrap()
}

#[test]
fn probe_reports_zero_for_identity_and_rejects_other_features() {
    let dir = tempfile::tempdir().unwrap();
    let zoo = tiny_zoo(dir.path(), 5);
    let table = featurize_zoo(&zoo, &FeatureKind::FlatAll).unwrap();
    let model = fit_random_forest(&table, 4, 0).unwrap();
    let mods = [
        ProbeModification::identity(),
        ProbeModification::permute(ProbeKind::GlobalPermute, true, 1),
        ProbeModification::scale(3.0),
    ];
    let res = invariance_probe(&model, &zoo, &mods, 5, 2).unwrap();
    assert_eq!(res.len(), 3);
    assert_eq!(res[0].mad, 0.0);
    assert!(res.iter().all(|r| r.n == 5 && r.mad >= 0.0 && r.mad <= 1.0));
    assert_eq!(res, invariance_probe(&model, &zoo, &mods, 5, 2).unwrap());
    assert!(invariance_probe(&model, &zoo, &mods, 0, 2).is_err());
    assert!(invariance_probe(&model, &zoo, &mods, 1000, 2).is_err());

    let stats = featurize_zoo(&zoo, &FeatureKind::StatsGlobal).unwrap();
    let other = fit_random_forest(&stats, 4, 0).unwrap();
    assert!(invariance_probe(&other, &zoo, &mods, 5, 2).is_err());
}

#[test]
fn transfer_diagonal_equals_direct_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let zoos = [tiny_zoo(&dir.path().join("a"), 1), tiny_zoo(&dir.path().join("b"), 2)];
    let tables: Vec<FeatureTable> = zoos
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let mut t = featurize_zoo(z, &FeatureKind::StatsPerLayer).unwrap();
            t.set_meta("dataset", format!("zoo{i}"));
            t
        })
        .collect();
    let cfg = GbmConfig {
        num_trees: 30,
        min_child_weight: 2,
        min_child_samples: 2,
        ..GbmConfig::default()
    };
    let models: Vec<_> = tables.iter().map(|t| fit_gbm(t, &cfg).unwrap()).collect();
    let m = transfer_matrix(&models, &tables).unwrap();
    assert_eq!(m.tables, ["zoo0", "zoo1"]);
    for i in 0..2 {
        for j in 0..2 {
            let direct = evaluate(&models[i], &tables[j]).unwrap();
            assert_eq!(m.tau[i][j].to_bits(), direct.kendall_tau.to_bits());
            assert_eq!(m.r2[i][j].to_bits(), direct.r2.to_bits());
        }
    }
    let flat = featurize_zoo(&zoos[0], &FeatureKind::FlatAll).unwrap();
    let mixed = [models[0].clone(), fit_random_forest(&flat, 2, 0).unwrap()];
    assert!(transfer_matrix(&mixed, &tables).is_err());
}

#[test]
fn eval_report_serializes() {
    let r = EvalReport::from_predictions(&[0.1, 0.5, 0.9], &[0.2, 0.5, 0.7]).unwrap();
    assert_eq!(r.n, 3);
    assert_eq!(r.kendall_tau, 1.0);
    assert_eq!(r.scatter_csv().lines().next(), Some("true,predicted"));
    assert_eq!(r.scatter_csv().lines().count(), 4);
    let back: EvalReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
}
