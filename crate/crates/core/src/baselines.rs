//! Comparison detectors: feature-wise two-sample KS (Marginal) and DDM.

use crate::detector::{sliding_loop, validate_stream, DetectionTrace, WindowTest};
use crate::domain::{DetectorConfig, FeatureSet, LabeledSample, SampleWindow};
use crate::error::{DriftError, Result};
use crate::model::TrainedModel;
use crate::statistic::FeatureTestResult;

/// Two-sample Kolmogorov-Smirnov statistic `max_t |F̂a(t) − F̂b(t)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(DriftError::InsufficientData("KS test needs two nonempty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic KS critical value `c(α)·sqrt((m+n)/(m·n))`, `c(α) = sqrt(−ln(α/2)/2)`.
pub fn ks_critical_value(alpha: f64, m: usize, n: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((m + n) as f64 / (m as f64 * n as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsFeatureResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub flagged: bool,
}

/// Feature-wise KS test with Bonferroni level `α/d`. Drift iff any feature flags.
pub fn marginal_ks(zr: &SampleWindow, zn: &SampleWindow, alpha: f64) -> Result<Vec<KsFeatureResult>> {
    if zr.is_empty() || zn.is_empty() {
        return Err(DriftError::InsufficientData("marginal KS needs two nonempty windows".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DriftError::config("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let d = zr.dim().unwrap_or(0);
    if zn.dim() != Some(d) {
        return Err(DriftError::Dimensionality {
            expected: d,
            found: zn.dim().unwrap_or(0),
        });
    }
    let critical = ks_critical_value(alpha / d as f64, zr.len(), zn.len());
    let column = |w: &SampleWindow, k: usize| -> Vec<f64> { w.samples().iter().map(|s| s.features[k]).collect() };
    (0..d)
        .map(|k| {
            let statistic = ks_two_sample(&column(zr, k), &column(zn, k))?;
            Ok(KsFeatureResult {
                statistic,
                critical_value: critical,
                flagged: statistic > critical,
            })
        })
        .collect()
}

struct MarginalTest;

impl WindowTest for MarginalTest {
    fn test(
        &self,
        _model: &TrainedModel,
        reference: &SampleWindow,
        tested: &SampleWindow,
        config: &DetectorConfig,
        _check: u64,
    ) -> Result<Vec<FeatureTestResult>> {
        Ok(marginal_ks(reference, tested, config.alpha)?
            .into_iter()
            .enumerate()
            .map(|(k, r)| FeatureTestResult::new(k, r.statistic, r.critical_value, FeatureSet::empty()))
            .collect())
    }
}

/// Marginal KS under the same sliding-window protocol and retraining as the
/// main detector, so performance and events are directly comparable.
pub fn run_marginal(stream: &[LabeledSample], config: &DetectorConfig) -> Result<DetectionTrace> {
    sliding_loop(stream, config, &MarginalTest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdmLevel {
    InControl,
    Warning,
    Drift,
}

/// Samples observed before DDM may raise a warning or drift.
pub const DDM_WARMUP: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdmState {
    pub sample_count: u64,
    pub error_rate: f64,
    pub std: f64,
    pub p_min: f64,
    pub s_min: f64,
    pub level: DdmLevel,
}

impl Default for DdmState {
    fn default() -> Self {
        Self {
            sample_count: 0,
            error_rate: 0.0,
            std: 0.0,
            p_min: f64::INFINITY,
            s_min: f64::INFINITY,
            level: DdmLevel::InControl,
        }
    }
}

/// One DDM step on a 0/1 error indicator. A `Drift` result carries the
/// counters of the fresh state: only `level` records the alarm.
pub fn ddm_update(state: &DdmState, error: bool) -> DdmState {
    let count = state.sample_count + 1;
    let x = if error { 1.0 } else { 0.0 };
    let p = state.error_rate + (x - state.error_rate) / count as f64;
    let s = (p * (1.0 - p) / count as f64).sqrt();
    let mut next = DdmState {
        sample_count: count,
        error_rate: p,
        std: s,
        p_min: state.p_min,
        s_min: state.s_min,
        level: DdmLevel::InControl,
    };
    if count < DDM_WARMUP {
        return next;
    }
    if p + s <= next.p_min + next.s_min {
        next.p_min = p;
        next.s_min = s;
    }
    // alarms need p + s strictly above its running minimum
    let above = p + s > next.p_min + next.s_min;
    if above && p + s >= next.p_min + 3.0 * next.s_min {
        return DdmState {
            level: DdmLevel::Drift,
            ..DdmState::default()
        };
    }
    if above && p + s >= next.p_min + 2.0 * next.s_min {
        next.level = DdmLevel::Warning;
    }
    next
}

/// Outcome of a DDM pass over a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DdmTrace {
    pub drift_indices: Vec<usize>,
    /// Prequential accuracy of the active model per `n`-sample block.
    pub performance: Vec<f64>,
}

/// DDM over the model's prequential errors. The model is trained on the
/// first `⌊n·r⌋` samples and retrained on the next `⌊n·r⌋` after each drift.
pub fn run_ddm(stream: &[LabeledSample], config: &DetectorConfig) -> Result<DdmTrace> {
    config.validate()?;
    if !config.task.is_classification() {
        return Err(DriftError::config("task", "DDM supports classification only"));
    }
    validate_stream(stream, config.task)?;
    let train = config.train_size();
    if stream.len() <= train {
        return Err(DriftError::InsufficientData(format!(
            "stream of length {} leaves nothing after the {train}-sample training block",
            stream.len()
        )));
    }
    let standardized;
    let stream = if config.standardize {
        standardized = crate::domain::Standardizer::fit(&stream[..train])?.apply_all(stream);
        &standardized[..]
    } else {
        stream
    };
    let fit_at = |start: usize, generation: u64| {
        let seed = crate::domain::derive_seed(crate::domain::derive_seed(config.seed, 0xDD), generation);
        crate::model::fit(
            &SampleWindow::from_stream(stream, start, train)?,
            &config.model_spec,
            config.task,
            seed,
        )
    };

    let mut model = fit_at(0, 0)?;
    let mut scratch = model.scratch();
    let mut state = DdmState::default();
    let mut drift_indices = Vec::new();
    let mut performance = Vec::new();
    let (mut block_correct, mut block_len) = (0usize, 0usize);
    let mut generation = 0;
    let mut t = train;
    while t < stream.len() {
        let sample = &stream[t];
        let predicted = model.predict_with(&sample.features, &mut scratch)?;
        let correct = matches!(predicted, crate::domain::Prediction::Class(c) if c as f64 == sample.target);
        block_correct += correct as usize;
        block_len += 1;
        if block_len == config.n {
            performance.push(block_correct as f64 / block_len as f64);
            block_correct = 0;
            block_len = 0;
        }
        state = ddm_update(&state, !correct);
        t += 1;
        if state.level == DdmLevel::Drift {
            drift_indices.push(t - 1);
            if t + train > stream.len() {
                break;
            }
            generation += 1;
            model = fit_at(t, generation)?;
            scratch = model.scratch();
            t += train;
        }
    }
    if block_len > 0 {
        performance.push(block_correct as f64 / block_len as f64);
    }
    Ok(DdmTrace {
        drift_indices,
        performance,
    })
}
