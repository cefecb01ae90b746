//! Statistic and bootstrap checked against independently written oracles.

use drift_core::bootstrap::{bootstrap_thresholds, empirical_quantile};
use drift_core::domain::{loss, mask};
use drift_core::model::{fit, Architecture, ModelSpec, TrainedModel};
use drift_core::statistic::{build_subset_plan, d_hat, test_statistic};
use drift_core::{FeatureSet, LabeledSample, LossKind, SampleWindow, TaskKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_window(rng: &mut ChaCha8Rng, d: usize, n: usize, task: TaskKind, start: usize) -> SampleWindow {
    let samples = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = match task {
                TaskKind::Regression => x.iter().take(2).sum::<f64>() + rng.random_range(-0.1..0.1),
                TaskKind::Classification { classes } => rng.random_range(0..classes) as f64,
            };
            LabeledSample::new(x, y)
        })
        .collect();
    SampleWindow::new(samples, start).unwrap()
}

fn quick_model(window: &SampleWindow, task: TaskKind, seed: u64) -> TrainedModel {
    let spec = ModelSpec {
        architecture: Architecture::Mlp { hidden: vec![6] },
        epochs: 5,
        ..ModelSpec::default()
    };
    fit(window, &spec, task, seed).unwrap()
}

fn brute_risk(model: &TrainedModel, window: &SampleWindow, subset: &FeatureSet, kind: LossKind) -> f64 {
    let mut total = 0.0;
    for s in window.samples() {
        let x = mask(&s.features, subset).unwrap();
        total += loss(kind, model.predict(&x).unwrap().prediction(), s.target).unwrap();
    }
    total / window.len() as f64
}

/// Enumerates every subset of `[d] ∖ {k}` with a plain bit loop.
fn brute_d_hat(model: &TrainedModel, p: &SampleWindow, q: &SampleWindow, k: usize, d: usize, kind: LossKind) -> f64 {
    let mut best = 0.0f64;
    for bits in 0u32..(1 << d) {
        if bits & (1 << k) != 0 {
            continue;
        }
        let s: FeatureSet = (0..d).filter(|i| bits & (1 << i) != 0).collect();
        let sk = s.with(k);
        let term = (brute_risk(model, p, &s, kind) - brute_risk(model, p, &sk, kind))
            - (brute_risk(model, q, &s, kind) - brute_risk(model, q, &sk, kind));
        best = best.max(term.abs());
    }
    best
}

#[test]
fn exhaustive_d_hat_matches_brute_force_on_100_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for instance in 0..100u64 {
        let d = rng.random_range(1..=10);
        let n = rng.random_range(5..=30);
        let task = match instance % 3 {
            0 => TaskKind::Regression,
            1 => TaskKind::Classification { classes: 2 },
            _ => TaskKind::Classification { classes: 3 },
        };
        let p = random_window(&mut rng, d, n, task, 0);
        let q = random_window(&mut rng, d, n, task, n);
        let model = quick_model(&p, task, instance);
        let plan = build_subset_plan(d, 0, instance).unwrap();
        assert!(plan.is_exhaustive());
        for k in 0..d {
            let (fast, _) = d_hat(&model, &p, &q, k, &plan, task.loss_kind()).unwrap();
            let slow = brute_d_hat(&model, &p, &q, k, d, task.loss_kind());
            assert_eq!(fast, slow, "instance {instance}, d={d}, k={k}");
        }
        let c = test_statistic(&model, &p, &q, 0, &plan, task.loss_kind()).unwrap();
        assert_eq!(c, n as f64 * brute_d_hat(&model, &p, &q, 0, d, task.loss_kind()));
    }
}

/// `⌈(1 − a/1000 / d)·K⌉` in integers: `⌈(1000·d − a)·K / (1000·d)⌉`.
fn oracle_rank(a_permille: u64, d: u64, k: u64) -> usize {
    let num = (1000 * d - a_permille) * k;
    let den = 1000 * d;
    num.div_ceil(den).max(1) as usize
}

#[test]
fn thresholds_are_order_statistics_on_50_replicate_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for set in 0..50u64 {
        let d = rng.random_range(1..=5);
        let n = rng.random_range(10..=40);
        let task = TaskKind::Classification { classes: 2 };
        let zr = random_window(&mut rng, d, n, task, 0);
        let zn = random_window(&mut rng, d, n, task, n);
        let model = quick_model(&zr, task, set);
        let plan = build_subset_plan(d, 0, set).unwrap();
        let a_permille = rng.random_range(1..=500u64);
        let k = rng.random_range(1..=200usize);
        let alpha = a_permille as f64 / 1000.0;
        let t = bootstrap_thresholds(&model, &zr, &zn, alpha, k, &plan, LossKind::ZeroOne, set).unwrap();
        let rank = oracle_rank(a_permille, d as u64, k as u64);
        for f in 0..d {
            let mut sorted = t.replicates[f].clone();
            assert_eq!(sorted.len(), k);
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(t.thresholds[f], sorted[rank - 1], "set {set}, feature {f}, alpha {alpha}, K {k}");
        }
    }
}

proptest! {
    #[test]
    fn empirical_quantile_matches_integer_rank(
        values in prop::collection::vec(-100.0f64..100.0, 1..300),
        a_permille in 1u64..1000,
        d in 1u64..12,
    ) {
        let q = 1.0 - (a_permille as f64 / 1000.0) / d as f64;
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rank = oracle_rank(a_permille, d, values.len() as u64);
        prop_assert_eq!(empirical_quantile(&values, q), sorted[rank - 1]);
    }

    #[test]
    fn d_hat_is_symmetric_and_bounded(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let task = TaskKind::Classification { classes: 2 };
        let d = rng.random_range(1..=4);
        let p = random_window(&mut rng, d, 12, task, 0);
        let q = random_window(&mut rng, d, 12, task, 12);
        let model = quick_model(&p, task, seed);
        let plan = build_subset_plan(d, 0, seed).unwrap();
        for k in 0..d {
            let (pq, _) = d_hat(&model, &p, &q, k, &plan, LossKind::ZeroOne).unwrap();
            let (qp, _) = d_hat(&model, &q, &p, k, &plan, LossKind::ZeroOne).unwrap();
            prop_assert_eq!(pq, qp);
            // each risk is in [0, 1], so a difference of two drops is at most 2
            prop_assert!((0.0..=2.0).contains(&pq));
        }
    }
}
