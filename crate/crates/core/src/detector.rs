//! The sliding-window detection loop.
//!
//! A model is trained on the first `⌊nr⌋` samples and the following `ñ`
//! samples become the reference window. At each cursor `i` the first `ñ`
//! samples of the next `n` are tested against the reference. On drift the
//! batch `[i, i + n)` supplies a new model and reference window and the
//! cursor jumps by `n`; otherwise it slides by `delta`.

use std::sync::Arc;

use crate::bootstrap::thresholds_from_table;
use crate::domain::{derive_seed, DetectorConfig, FeatureSet, LabeledSample, SampleWindow, Standardizer, TaskKind};
use crate::error::{DriftError, Result};
use crate::model::{fit, TrainedModel};
use crate::statistic::{build_subset_plan, FeatureTestResult, SubsetLossTable, SubsetPlan};

const MODEL_STREAM: u64 = 0x6d6f_6465_6c00;
const PLAN_STREAM: u64 = 0x706c_616e_0000;
const BOOTSTRAP_STREAM: u64 = 0x626f_6f74_0000;

/// A declared drift and the per-feature evidence behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEvent {
    /// Stream index of the first sample of the tested window.
    pub stream_index: usize,
    pub flagged_features: FeatureSet,
    pub per_feature: Vec<FeatureTestResult>,
}

/// Model and windows that were active when an event fired.
#[derive(Debug, Clone)]
pub struct EventSnapshot {
    pub model: Arc<TrainedModel>,
    pub reference: SampleWindow,
    pub tested: SampleWindow,
}

/// Full record of a detector run.
#[derive(Debug, Clone)]
pub struct DetectionTrace {
    pub events: Vec<DriftEvent>,
    /// Accuracy (classification) or R² (regression), one entry per iteration.
    pub performance: Vec<f64>,
    pub config: DetectorConfig,
    pub stream_length: usize,
    /// Aligned with `events`.
    pub snapshots: Vec<EventSnapshot>,
}

impl DetectionTrace {
    pub fn drift_indices(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.stream_index).collect()
    }
}

/// Fraction correct for classification, `1 − SS_res/SS_tot` for regression.
pub fn performance_metric(model: &TrainedModel, window: &SampleWindow, task: TaskKind) -> Result<f64> {
    if window.is_empty() {
        return Err(DriftError::InsufficientData("performance of an empty window".into()));
    }
    let mut scratch = model.scratch();
    match task {
        TaskKind::Classification { .. } => {
            let mut correct = 0usize;
            for s in window.samples() {
                if let crate::domain::Prediction::Class(c) = model.predict_with(&s.features, &mut scratch)? {
                    if c as f64 == s.target {
                        correct += 1;
                    }
                }
            }
            Ok(correct as f64 / window.len() as f64)
        }
        TaskKind::Regression => {
            let n = window.len() as f64;
            let mean = window.samples().iter().map(|s| s.target).sum::<f64>() / n;
            let ss_tot: f64 = window.samples().iter().map(|s| (s.target - mean).powi(2)).sum();
            if ss_tot <= 0.0 {
                return Err(DriftError::InsufficientData(
                    "R² is undefined for a window with constant targets".into(),
                ));
            }
            let mut ss_res = 0.0;
            for s in window.samples() {
                if let crate::domain::Prediction::Value(v) = model.predict_with(&s.features, &mut scratch)? {
                    ss_res += (v - s.target).powi(2);
                }
            }
            Ok(1.0 - ss_res / ss_tot)
        }
    }
}

/// Tests every feature of `tested` against `reference`.
///
/// The statistic and its bootstrap thresholds share one subset plan and one
/// table of masked losses over the pooled windows. The bootstrap seed is
/// derived from the plan seed.
pub fn check_window(
    model: &TrainedModel,
    reference: &SampleWindow,
    tested: &SampleWindow,
    config: &DetectorConfig,
    plan: &SubsetPlan,
) -> Result<Vec<FeatureTestResult>> {
    if reference.len() != tested.len() || reference.is_empty() {
        return Err(DriftError::Protocol(format!(
            "reference and tested windows must have equal nonzero size, got {} and {}",
            reference.len(),
            tested.len()
        )));
    }
    let n_eff = reference.len();
    let mut pool = reference.samples().to_vec();
    pool.extend_from_slice(tested.samples());
    let table = SubsetLossTable::new(model, &pool, plan, config.task.loss_kind())?;

    let p: Vec<usize> = (0..n_eff).collect();
    let q: Vec<usize> = (n_eff..2 * n_eff).collect();
    let observed = table.d_hat_all(&table.risks(&p), &table.risks(&q));
    let thresholds = thresholds_from_table(
        &table,
        n_eff,
        config.alpha,
        config.bootstrap_count,
        derive_seed(plan.seed(), BOOTSTRAP_STREAM),
    )?;

    Ok(observed
        .into_iter()
        .enumerate()
        .map(|(k, (d_hat, pos))| {
            FeatureTestResult::new(
                k,
                n_eff as f64 * d_hat,
                thresholds.thresholds[k],
                table.subset(k, pos).clone(),
            )
        })
        .collect())
}

/// Validates a stream for the given task and returns its dimensionality.
pub fn validate_stream(stream: &[LabeledSample], task: TaskKind) -> Result<usize> {
    let dim = stream
        .first()
        .map(LabeledSample::dim)
        .ok_or_else(|| DriftError::InsufficientData("empty stream".into()))?;
    if dim == 0 {
        return Err(DriftError::Data("samples must have at least one feature".into()));
    }
    for (i, s) in stream.iter().enumerate() {
        if s.dim() != dim {
            return Err(DriftError::Dimensionality {
                expected: dim,
                found: s.dim(),
            });
        }
        if s.features.iter().any(|v| !v.is_finite()) {
            return Err(DriftError::Data(format!("non-finite feature value at stream index {i}")));
        }
        task.check_target(s.target)
            .map_err(|e| DriftError::Data(format!("stream index {i}: {e}")))?;
    }
    Ok(dim)
}

/// Per-check test used by the sliding loop.
pub(crate) trait WindowTest {
    fn test(
        &self,
        model: &TrainedModel,
        reference: &SampleWindow,
        tested: &SampleWindow,
        config: &DetectorConfig,
        check: u64,
    ) -> Result<Vec<FeatureTestResult>>;
}

struct FeatureRiskTest {
    dim: usize,
}

impl WindowTest for FeatureRiskTest {
    fn test(
        &self,
        model: &TrainedModel,
        reference: &SampleWindow,
        tested: &SampleWindow,
        config: &DetectorConfig,
        check: u64,
    ) -> Result<Vec<FeatureTestResult>> {
        let plan_seed = derive_seed(derive_seed(config.seed, PLAN_STREAM), check);
        let plan = build_subset_plan(self.dim, config.subset_budget, plan_seed)?;
        check_window(model, reference, tested, config, &plan)
    }
}

fn model_seed(config: &DetectorConfig, generation: u64) -> u64 {
    derive_seed(derive_seed(config.seed, MODEL_STREAM), generation)
}

pub(crate) fn sliding_loop(stream: &[LabeledSample], config: &DetectorConfig, tester: &dyn WindowTest) -> Result<DetectionTrace> {
    config.validate()?;
    validate_stream(stream, config.task)?;
    let n = config.n;
    if stream.len() < 2 * n {
        return Err(DriftError::InsufficientData(format!(
            "stream of length {} is shorter than 2n = {}",
            stream.len(),
            2 * n
        )));
    }
    let train = config.train_size();
    let n_eff = config.effective_size();

    let standardized;
    let stream = if config.standardize {
        let scaler = Standardizer::fit(&stream[..train])?;
        standardized = scaler.apply_all(stream);
        &standardized[..]
    } else {
        stream
    };

    let mut generation = 0u64;
    let mut model = Arc::new(fit(
        &SampleWindow::from_stream(stream, 0, train)?,
        &config.model_spec,
        config.task,
        model_seed(config, generation),
    )?);
    let mut reference = SampleWindow::from_stream(stream, train, n_eff)?;

    let mut events = Vec::new();
    let mut snapshots = Vec::new();
    let mut performance = Vec::new();
    let mut cursor = n;
    let mut check = 0u64;
    while cursor + n <= stream.len() {
        let tested = SampleWindow::from_stream(stream, cursor, n_eff)?;
        let results = tester.test(&model, &reference, &tested, config, check)?;
        let flagged: FeatureSet = results.iter().filter(|r| r.flagged).map(|r| r.feature).collect();
        if !flagged.is_empty() {
            events.push(DriftEvent {
                stream_index: cursor,
                flagged_features: flagged,
                per_feature: results,
            });
            snapshots.push(EventSnapshot {
                model: Arc::clone(&model),
                reference: reference.clone(),
                tested,
            });
            generation += 1;
            model = Arc::new(fit(
                &SampleWindow::from_stream(stream, cursor, train)?,
                &config.model_spec,
                config.task,
                model_seed(config, generation),
            )?);
            reference = SampleWindow::from_stream(stream, cursor + train, n_eff)?;
            performance.push(performance_metric(&model, &reference, config.task)?);
            cursor += n;
        } else {
            let window = SampleWindow::from_stream(stream, cursor, n)?;
            performance.push(performance_metric(&model, &window, config.task)?);
            cursor += config.delta;
        }
        check += 1;
    }

    Ok(DetectionTrace {
        events,
        performance,
        config: config.clone(),
        stream_length: stream.len(),
        snapshots,
    })
}

/// Runs the feature-interaction aware detector over a finite stream.
pub fn run_detector(stream: &[LabeledSample], config: &DetectorConfig) -> Result<DetectionTrace> {
    let dim = validate_stream(stream, config.task)?;
    sliding_loop(stream, config, &FeatureRiskTest { dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    fn binary() -> TaskKind {
        TaskKind::Classification { classes: 2 }
    }

    #[test]
    fn performance_metric_values() {
        let model = TrainedModel::constant_classifier(1, 2, 1);
        let w = SampleWindow::new(
            [1.0, 1.0, 1.0, 0.0]
                .iter()
                .map(|&t| LabeledSample::new(vec![0.0], t))
                .collect(),
            0,
        )
        .unwrap();
        assert_eq!(performance_metric(&model, &w, binary()).unwrap(), 0.75);
        let all = w.prefix(3).unwrap();
        assert_eq!(performance_metric(&model, &all, binary()).unwrap(), 1.0);
    }

    #[test]
    fn regression_r2_at_mean_is_zero() {
        // a model fitted to a feature-free window predicts the target mean
        let samples: Vec<_> = [1.0, 2.0, 3.0, 6.0].iter().map(|&t| LabeledSample::new(vec![0.0], t)).collect();
        let w = SampleWindow::new(samples, 0).unwrap();
        let spec = ModelSpec {
            architecture: crate::model::Architecture::Linear,
            epochs: 300,
            learning_rate: 0.1,
            batch_size: 4,
            l2: 0.0,
        };
        let model = fit(&w, &spec, TaskKind::Regression, 0).unwrap();
        let r2 = performance_metric(&model, &w, TaskKind::Regression).unwrap();
        assert!(r2.abs() < 1e-9, "r2 {r2}");
        let constant = SampleWindow::new(vec![LabeledSample::new(vec![0.0], 1.0); 3], 0).unwrap();
        assert!(performance_metric(&model, &constant, TaskKind::Regression).is_err());
    }

    #[test]
    fn identical_windows_flag_nothing() {
        let samples: Vec<_> = (0..40)
            .map(|i| LabeledSample::new(vec![(i % 2) as f64, ((i / 2) % 2) as f64], ((i % 2) ^ ((i / 2) % 2)) as f64))
            .collect();
        let w = SampleWindow::new(samples, 0).unwrap();
        let model = fit(&w, &ModelSpec::default(), binary(), 0).unwrap();
        let config = DetectorConfig::default();
        let plan = build_subset_plan(2, 0, 0).unwrap();
        let results = check_window(&model, &w, &w, &config, &plan).unwrap();
        assert_eq!(results.len(), 2);
        for r in results {
            assert_eq!(r.statistic, 0.0);
            assert!(!r.flagged);
            assert!(r.threshold >= 0.0);
        }
    }

    #[test]
    fn constant_model_never_flags() {
        let model = TrainedModel::constant_classifier(2, 2, 0);
        let a = SampleWindow::new((0..30).map(|i| LabeledSample::new(vec![i as f64, 1.0], (i % 2) as f64)).collect(), 0).unwrap();
        let b = SampleWindow::new((0..30).map(|i| LabeledSample::new(vec![-(i as f64), 3.0], 1.0)).collect(), 30).unwrap();
        let plan = build_subset_plan(2, 0, 0).unwrap();
        for r in check_window(&model, &a, &b, &DetectorConfig::default(), &plan).unwrap() {
            assert_eq!((r.statistic, r.threshold, r.flagged), (0.0, 0.0, false));
        }
    }

    #[test]
    fn rejects_short_streams_and_bad_values() {
        let config = DetectorConfig {
            n: 10,
            delta: 5,
            ..DetectorConfig::default()
        };
        let short: Vec<_> = (0..15).map(|_| LabeledSample::new(vec![0.0], 0.0)).collect();
        assert!(matches!(run_detector(&short, &config), Err(DriftError::InsufficientData(_))));
        let mut bad: Vec<_> = (0..30).map(|_| LabeledSample::new(vec![0.0], 0.0)).collect();
        bad[17].features[0] = f64::INFINITY;
        assert!(matches!(run_detector(&bad, &config), Err(DriftError::Data(_))));
    }
}
