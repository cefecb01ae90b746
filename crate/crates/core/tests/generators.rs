use drift_core::baselines::{ks_critical_value, ks_two_sample};
use drift_core::datagen::{generate, Generator, StreamSpec};

#[test]
fn pre_drift_block_is_stationary() {
    for g in Generator::ALL {
        let (_, drifts) = g.default_layout();
        let pre = drifts[0];
        let quarter = pre / 4;
        let (mut below, mut total) = (0, 0);
        for seed in 0..20 {
            let (stream, truth) = generate(&StreamSpec::defaults(g, seed)).unwrap();
            assert_eq!(truth.drift_points, drifts);
            let critical = ks_critical_value(0.01, quarter, quarter);
            for k in 0..g.dim() {
                let a: Vec<f64> = stream[..quarter].iter().map(|s| s.features[k]).collect();
                let b: Vec<f64> = stream[quarter..2 * quarter].iter().map(|s| s.features[k]).collect();
                below += (ks_two_sample(&a, &b).unwrap() <= critical) as usize;
                total += 1;
            }
        }
        assert!(below as f64 >= 0.95 * total as f64, "{g}: {below}/{total}");
    }
}

#[test]
fn labels_follow_truth_tables_after_noise_free_generation() {
    for g in [Generator::D1, Generator::D2] {
        let (stream, truth) = generate(&StreamSpec::defaults(g, 3)).unwrap();
        let drift = truth.drift_points[0];
        for (t, s) in stream.iter().enumerate() {
            let x: Vec<bool> = s.features.iter().map(|&v| v == 1.0).collect();
            let y = match (g, t < drift) {
                (Generator::D1, true) => (x[0] ^ x[1]) || x[2],
                (Generator::D1, false) => x[0] || x[2],
                (_, true) => x[0] && x[1],
                (_, false) => x[0] && x[2],
            };
            assert_eq!(s.target, y as u8 as f64);
        }
    }
}
