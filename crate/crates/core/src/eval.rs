//! Detection precision/recall, average performance, occlusion attribution
//! and empirical test power.

use rayon::prelude::*;

use crate::datagen::{generate, Generator, StreamSpec};
use crate::detector::{check_window, performance_metric, DetectionTrace};
use crate::domain::{derive_seed, DetectorConfig, FeatureSet, LabeledSample, SampleWindow, Standardizer, TaskKind};
use crate::error::{DriftError, Result};
use crate::model::{fit, TrainedModel};
use crate::statistic::build_subset_plan;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScore {
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Greedy one-to-one matching: each detection, in order, takes the earliest
/// unmatched truth within `±tolerance`.
pub fn detection_pr(detected: &[usize], truth: &[usize], tolerance: i64) -> Result<DetectionScore> {
    if tolerance < 0 {
        return Err(DriftError::config("tolerance", "must be nonnegative"));
    }
    let tol = tolerance as u64;
    let mut matched = vec![false; truth.len()];
    let mut tp = 0;
    for &d in detected {
        let hit = truth
            .iter()
            .enumerate()
            .find(|&(j, &t)| !matched[j] && (d as i64 - t as i64).unsigned_abs() <= tol);
        if let Some((j, _)) = hit {
            matched[j] = true;
            tp += 1;
        }
    }
    let fp = detected.len() - tp;
    let fn_ = truth.len() - tp;
    let precision = if detected.is_empty() {
        if truth.is_empty() { 1.0 } else { 0.0 }
    } else {
        tp as f64 / detected.len() as f64
    };
    let recall = if truth.is_empty() { 1.0 } else { tp as f64 / truth.len() as f64 };
    Ok(DetectionScore {
        precision,
        recall,
        tp,
        fp,
        fn_,
    })
}

pub fn average_performance(trace: &DetectionTrace) -> Result<f64> {
    mean(&trace.performance)
}

fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(DriftError::InsufficientData("no values to average".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Replaces every feature in `subset` by its mean over the window.
pub fn impute_mean(window: &SampleWindow, subset: &FeatureSet) -> Result<SampleWindow> {
    let n = window.len() as f64;
    let mut samples = window.samples().to_vec();
    for k in subset.iter() {
        if window.dim().is_some_and(|d| k >= d) {
            return Err(DriftError::FeatureIndex {
                index: k,
                dim: window.dim().unwrap_or(0),
            });
        }
        let m = window.samples().iter().map(|s| s.features[k]).sum::<f64>() / n;
        for s in &mut samples {
            s.features[k] = m;
        }
    }
    SampleWindow::new(samples, window.start_index())
}

/// `σ(S) = ΔA([d]) − ΔA([d]∖S)` in percentage points, where `ΔA` is the
/// drop in performance from `zr` to `zn` and `S` is mean-imputed per window.
pub fn occlusion_score(
    model: &TrainedModel,
    zr: &SampleWindow,
    zn: &SampleWindow,
    subset: &FeatureSet,
    task: TaskKind,
) -> Result<f64> {
    if zr.is_empty() || zn.is_empty() {
        return Err(DriftError::InsufficientData("occlusion needs two nonempty windows".into()));
    }
    if subset.is_empty() {
        return Err(DriftError::config("subset", "occlusion needs a nonempty feature subset"));
    }
    let full = performance_metric(model, zr, task)? - performance_metric(model, zn, task)?;
    let occluded = performance_metric(model, &impute_mean(zr, subset)?, task)?
        - performance_metric(model, &impute_mean(zn, subset)?, task)?;
    Ok(100.0 * (full - occluded))
}

/// `σ̄` over the trace's events, each with its flagged set and the model and
/// windows active when it fired.
pub fn occlusion_mean(trace: &DetectionTrace) -> Result<f64> {
    if trace.events.is_empty() {
        return Err(DriftError::InsufficientData("no drift events to attribute".into()));
    }
    if trace.snapshots.len() != trace.events.len() {
        return Err(DriftError::Protocol("trace lacks one snapshot per event".into()));
    }
    let scores = trace
        .events
        .iter()
        .zip(&trace.snapshots)
        .map(|(e, s)| occlusion_score(&s.model, &s.reference, &s.tested, &e.flagged_features, trace.config.task))
        .collect::<Result<Vec<f64>>>()?;
    mean(&scores)
}

/// Fraction of `trials` single-window checks that flag at least one feature.
///
/// Each trial draws a fresh stream of length `n + ñ`: the model is fit on the
/// first `⌊n·r⌋` samples, `Zr` is the rest of the first `n`, and `Zn` the
/// following `ñ`. With `drifted` the concept changes at index `n`, so `Zn`
/// is entirely post-drift; otherwise the stream is stationary.
pub fn rejection_rate(
    generator: Generator,
    noise: f64,
    template: &DetectorConfig,
    n: usize,
    trials: usize,
    drifted: bool,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(DriftError::config("trials", "must be positive"));
    }
    let config = DetectorConfig { n, ..template.clone() };
    config.validate()?;
    let train = config.train_size();
    let n_eff = config.effective_size();
    let flags = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<bool> {
            let trial_seed = derive_seed(derive_seed(seed, n as u64), trial as u64);
            let spec = StreamSpec {
                generator,
                length: n + n_eff,
                drift_points: if drifted { vec![n] } else { vec![] },
                noise,
                seed: derive_seed(trial_seed, 0),
            };
            let (raw, _) = generate(&spec)?;
            let stream: Vec<LabeledSample> = if config.standardize {
                Standardizer::fit(&raw[..train])?.apply_all(&raw)
            } else {
                raw
            };
            let model = fit(
                &SampleWindow::from_stream(&stream, 0, train)?,
                &config.model_spec,
                config.task,
                derive_seed(trial_seed, 1),
            )?;
            let zr = SampleWindow::from_stream(&stream, train, n_eff)?;
            let zn = SampleWindow::from_stream(&stream, n, n_eff)?;
            let plan = build_subset_plan(generator.dim(), config.subset_budget, derive_seed(trial_seed, 2))?;
            Ok(check_window(&model, &zr, &zn, &config, &plan)?.iter().any(|r| r.flagged))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(flags.iter().filter(|&&f| f).count() as f64 / trials as f64)
}

/// Empirical power `(n, rate)` for each window size on the spec's generator.
/// Only the generator, noise and seed of `spec` are used; each trial draws
/// its own stream with the drift placed right after the reference window.
pub fn power_curve(spec: &StreamSpec, window_sizes: &[usize], trials: usize, template: &DetectorConfig) -> Result<Vec<(usize, f64)>> {
    if spec.drift_points.is_empty() {
        return Err(DriftError::config("drifts", "power needs a spec with a drift"));
    }
    if trials < 20 {
        return Err(DriftError::config("trials", "need at least 20 trials"));
    }
    window_sizes
        .iter()
        .map(|&n| Ok((n, rejection_rate(spec.generator, spec.noise, template, n, trials, true, spec.seed)?)))
        .collect()
}
