//! Null-distribution thresholds by resampling the pooled windows.
//!
//! The reference and new windows are pooled, each replicate shuffles the pool
//! and splits it back into two pseudo-windows of the original size, and the
//! per-feature threshold is the empirical `(1 − α/d)` quantile of the
//! replicate statistics (Bonferroni over features).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{derive_seed, LossKind, SampleWindow};
use crate::error::{DriftError, Result};
use crate::model::TrainedModel;
use crate::statistic::{SubsetLossTable, SubsetPlan};

/// Per-feature thresholds plus the replicate statistics they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSet {
    pub thresholds: Vec<f64>,
    pub alpha: f64,
    pub replicate_count: usize,
    pub seed: u64,
    /// `replicates[k]` holds feature `k`'s statistic for each replicate, in replicate order.
    pub replicates: Vec<Vec<f64>>,
}

/// 0-based position of the empirical `q`-quantile in an ascending array of
/// `count` values: `⌈q·count⌉ − 1`, clamped to `[0, count − 1]`.
///
/// A relative slack of `1e-9` absorbs representation error in `q·count`
/// (e.g. `0.95 · 100`).
pub fn quantile_rank(q: f64, count: usize) -> usize {
    assert!(count > 0, "quantile of an empty sample");
    let scaled = q * count as f64;
    let rank = (scaled - 1e-9 * scaled.abs().max(1.0)).ceil();
    (rank.max(1.0) as usize - 1).min(count - 1)
}

/// Empirical `q`-quantile under [`quantile_rank`].
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[quantile_rank(q, sorted.len())]
}

fn check_args(n_pool: usize, n_eff: usize, alpha: f64, replicate_count: usize) -> Result<()> {
    if replicate_count < 1 {
        return Err(DriftError::config("K", "need at least one bootstrap replicate"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DriftError::config("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    if n_eff == 0 || n_pool != 2 * n_eff {
        return Err(DriftError::Protocol(format!(
            "bootstrap needs two nonempty windows of equal size, pool has {n_pool} for window size {n_eff}"
        )));
    }
    Ok(())
}

/// Raw `d̂ᵏ` of every replicate: `result[replicate][feature]`.
///
/// The table's pool must be the concatenation of two windows of size `n_eff`.
pub fn replicate_d_hats(table: &SubsetLossTable, n_eff: usize, replicate_count: usize, seed: u64) -> Vec<Vec<f64>> {
    let pool = table.n_samples();
    (0..replicate_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let mut order: Vec<usize> = (0..pool).collect();
            order.shuffle(&mut rng);
            let (a, b) = order.split_at(n_eff);
            table
                .d_hat_all(&table.risks(a), &table.risks(b))
                .into_iter()
                .map(|(v, _)| v)
                .collect()
        })
        .collect()
}

/// Thresholds from a precomputed loss table over the pooled windows.
pub fn thresholds_from_table(
    table: &SubsetLossTable,
    n_eff: usize,
    alpha: f64,
    replicate_count: usize,
    seed: u64,
) -> Result<ThresholdSet> {
    check_args(table.n_samples(), n_eff, alpha, replicate_count)?;
    let d = table.dim();
    let raw = replicate_d_hats(table, n_eff, replicate_count, seed);
    let multiplier = n_eff as f64;
    let replicates: Vec<Vec<f64>> = (0..d)
        .map(|k| raw.iter().map(|row| multiplier * row[k]).collect())
        .collect();
    let q = 1.0 - alpha / d as f64;
    let thresholds = replicates.iter().map(|vals| empirical_quantile(vals, q)).collect();
    Ok(ThresholdSet {
        thresholds,
        alpha,
        replicate_count,
        seed,
        replicates,
    })
}

/// Bootstrap thresholds `Tᵏ_α` for every feature.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_thresholds(
    model: &TrainedModel,
    zr: &SampleWindow,
    zn: &SampleWindow,
    alpha: f64,
    replicate_count: usize,
    plan: &SubsetPlan,
    loss_kind: LossKind,
    seed: u64,
) -> Result<ThresholdSet> {
    if zr.len() != zn.len() {
        return Err(DriftError::Protocol(format!(
            "windows must have equal size, got {} and {}",
            zr.len(),
            zn.len()
        )));
    }
    check_args(zr.len() + zn.len(), zr.len(), alpha, replicate_count)?;
    let mut pool = zr.samples().to_vec();
    pool.extend_from_slice(zn.samples());
    let table = SubsetLossTable::new(model, &pool, plan, loss_kind)?;
    thresholds_from_table(&table, zr.len(), alpha, replicate_count, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{LabeledSample, TaskKind};
    use crate::model::{fit, ModelSpec};
    use crate::statistic::build_subset_plan;
    use rand::Rng;

    #[test]
    fn quantile_rank_rule() {
        // 1 − 0.05/5 = 0.99 → ⌈99⌉ = 99th smallest of 100 = 2nd largest
        assert_eq!(quantile_rank(0.99, 100), 98);
        assert_eq!(quantile_rank(1.0 - 0.05 / 4.0, 100), 98);
        assert_eq!(quantile_rank(0.95, 100), 94);
        assert_eq!(quantile_rank(0.5, 1), 0);
        assert_eq!(quantile_rank(0.0, 10), 0);
        assert_eq!(quantile_rank(1.0, 10), 9);
    }

    fn random_windows(seed: u64, n: usize) -> (SampleWindow, SampleWindow) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |start| {
            let samples = (0..n)
                .map(|_| {
                    let x: Vec<f64> = (0..3).map(|_| rng.random_range(0..2) as f64).collect();
                    let y = ((x[0] as u8 ^ x[1] as u8) | x[2] as u8) as f64;
                    LabeledSample::new(x, y)
                })
                .collect();
            SampleWindow::new(samples, start).unwrap()
        };
        (draw(0), draw(n))
    }

    #[test]
    fn constant_model_gives_zero_thresholds() {
        let model = TrainedModel::constant_classifier(3, 2, 0);
        let (zr, zn) = random_windows(1, 50);
        let plan = build_subset_plan(3, 0, 0).unwrap();
        let t = bootstrap_thresholds(&model, &zr, &zn, 0.05, 20, &plan, LossKind::ZeroOne, 9).unwrap();
        assert_eq!(t.thresholds, vec![0.0; 3]);
        assert!(t.replicates.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_in_seed() {
        let (zr, zn) = random_windows(2, 60);
        let model = fit(&zr, &ModelSpec { epochs: 30, ..ModelSpec::default() }, TaskKind::Classification { classes: 2 }, 0).unwrap();
        let plan = build_subset_plan(3, 0, 0).unwrap();
        let a = bootstrap_thresholds(&model, &zr, &zn, 0.05, 50, &plan, LossKind::ZeroOne, 4).unwrap();
        let b = bootstrap_thresholds(&model, &zr, &zn, 0.05, 50, &plan, LossKind::ZeroOne, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.thresholds.iter().all(|&t| t >= 0.0));
    }

    #[test]
    fn thresholds_nonincreasing_in_alpha() {
        let (zr, zn) = random_windows(3, 60);
        let model = fit(&zr, &ModelSpec { epochs: 30, ..ModelSpec::default() }, TaskKind::Classification { classes: 2 }, 0).unwrap();
        let plan = build_subset_plan(3, 0, 0).unwrap();
        let mut previous: Option<Vec<f64>> = None;
        for alpha in [0.01, 0.05, 0.1, 0.3, 0.6] {
            let t = bootstrap_thresholds(&model, &zr, &zn, alpha, 100, &plan, LossKind::ZeroOne, 8).unwrap();
            if let Some(prev) = &previous {
                for (p, c) in prev.iter().zip(&t.thresholds) {
                    assert!(c <= p, "alpha {alpha}: {c} > {p}");
                }
            }
            previous = Some(t.thresholds);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let model = TrainedModel::constant_classifier(3, 2, 0);
        let (zr, zn) = random_windows(4, 20);
        let plan = build_subset_plan(3, 0, 0).unwrap();
        let short = zn.prefix(10).unwrap();
        assert!(matches!(
            bootstrap_thresholds(&model, &zr, &short, 0.05, 10, &plan, LossKind::ZeroOne, 0),
            Err(DriftError::Protocol(_))
        ));
        assert!(matches!(
            bootstrap_thresholds(&model, &zr, &zn, 0.05, 0, &plan, LossKind::ZeroOne, 0),
            Err(DriftError::Configuration { .. })
        ));
    }
}
