//! Line-oriented `key: value` run reports.
//!
//! Reals are written in Rust's shortest round-trip form, so parsing a
//! rendered report recovers every number bit for bit.

use std::fmt::Write as _;

use drift_core::model::Architecture;
use drift_core::{DetectorConfig, DriftError, Result};

use crate::config::task_name;

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub index: usize,
    pub flagged: Vec<usize>,
    pub flagged_names: Vec<String>,
    pub statistics: Vec<f64>,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// Effective configuration, `(key, value)` in the config vocabulary.
    pub config: Vec<(String, String)>,
    pub source: String,
    pub stream_length: usize,
    pub events: Vec<EventRecord>,
    pub performance: Vec<f64>,
    pub performance_mean: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub occlusion_mean: Option<f64>,
    pub wall_seconds: f64,
}

pub fn config_echo(c: &DetectorConfig) -> Vec<(String, String)> {
    let (model, hidden) = match &c.model_spec.architecture {
        Architecture::Linear => ("linear", String::new()),
        Architecture::Mlp { hidden } => ("mlp", join(hidden)),
    };
    [
        ("n", c.n.to_string()),
        ("r", real(c.r)),
        ("delta", c.delta.to_string()),
        ("alpha", real(c.alpha)),
        ("K", c.bootstrap_count.to_string()),
        ("subset_budget", c.subset_budget.to_string()),
        ("seed", c.seed.to_string()),
        ("task", task_name(c.task)),
        ("model", model.to_string()),
        ("hidden", hidden),
        ("epochs", c.model_spec.epochs.to_string()),
        ("lr", real(c.model_spec.learning_rate)),
        ("batch", c.model_spec.batch_size.to_string()),
        ("standardize", c.standardize.to_string()),
        ("l2", real(c.model_spec.l2)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn real(v: f64) -> String {
    format!("{v:?}")
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn reals(values: &[f64]) -> String {
    values.iter().map(|v| real(*v)).collect::<Vec<_>>().join(",")
}

impl RunReport {
    pub fn render(&self) -> String {
        let mut out = self.render_deterministic();
        writeln!(out, "wall_seconds: {}", real(self.wall_seconds)).unwrap();
        out
    }

    /// Every field except the wall-clock time.
    pub fn render_deterministic(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.config {
            writeln!(out, "config.{k}: {v}").unwrap();
        }
        writeln!(out, "source: {}", self.source).unwrap();
        writeln!(out, "stream_length: {}", self.stream_length).unwrap();
        writeln!(out, "events: {}", self.events.len()).unwrap();
        for (i, e) in self.events.iter().enumerate() {
            writeln!(out, "event.{i}.index: {}", e.index).unwrap();
            writeln!(out, "event.{i}.flagged: {}", join(&e.flagged)).unwrap();
            writeln!(out, "event.{i}.flagged_names: {}", e.flagged_names.join(",")).unwrap();
            writeln!(out, "event.{i}.statistic: {}", reals(&e.statistics)).unwrap();
            writeln!(out, "event.{i}.threshold: {}", reals(&e.thresholds)).unwrap();
        }
        writeln!(out, "performance: {}", reals(&self.performance)).unwrap();
        writeln!(out, "performance_mean: {}", real(self.performance_mean)).unwrap();
        if let Some(p) = self.precision {
            writeln!(out, "precision: {}", real(p)).unwrap();
        }
        if let Some(r) = self.recall {
            writeln!(out, "recall: {}", real(r)).unwrap();
        }
        if let Some(o) = self.occlusion_mean {
            writeln!(out, "occlusion_mean: {}", real(o)).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut report = RunReport {
            config: Vec::new(),
            source: String::new(),
            stream_length: 0,
            events: Vec::new(),
            performance: Vec::new(),
            performance_mean: 0.0,
            precision: None,
            recall: None,
            occlusion_mean: None,
            wall_seconds: 0.0,
        };
        let mut event_count = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| DriftError::Parse { line: line_no, message };
            if raw.trim().is_empty() {
                continue;
            }
            let (key, value) = raw
                .split_once(':')
                .ok_or_else(|| err(format!("expected `key: value`, got `{raw}`")))?;
            let value = value.strip_prefix(' ').unwrap_or(value);
            let int = |v: &str| v.parse::<usize>().map_err(|_| err(format!("`{v}` is not an integer")));
            let float = |v: &str| v.parse::<f64>().map_err(|_| err(format!("`{v}` is not a number")));
            let list = |v: &str| -> Result<Vec<f64>> {
                if v.is_empty() { Ok(Vec::new()) } else { v.split(',').map(float).collect() }
            };
            if let Some(k) = key.strip_prefix("config.") {
                report.config.push((k.to_string(), value.to_string()));
                continue;
            }
            if let Some(rest) = key.strip_prefix("event.") {
                let (idx, field) = rest.split_once('.').ok_or_else(|| err(format!("bad event key `{key}`")))?;
                let idx = int(idx)?;
                if idx > report.events.len() {
                    return Err(err(format!("event {idx} out of order")));
                }
                if idx == report.events.len() {
                    report.events.push(EventRecord {
                        index: 0,
                        flagged: Vec::new(),
                        flagged_names: Vec::new(),
                        statistics: Vec::new(),
                        thresholds: Vec::new(),
                    });
                }
                let e = &mut report.events[idx];
                match field {
                    "index" => e.index = int(value)?,
                    "flagged" => {
                        e.flagged = if value.is_empty() {
                            Vec::new()
                        } else {
                            value.split(',').map(int).collect::<Result<_>>()?
                        }
                    }
                    "flagged_names" => {
                        e.flagged_names = if value.is_empty() {
                            Vec::new()
                        } else {
                            value.split(',').map(str::to_string).collect()
                        }
                    }
                    "statistic" => e.statistics = list(value)?,
                    "threshold" => e.thresholds = list(value)?,
                    _ => return Err(err(format!("unknown event field `{field}`"))),
                }
                continue;
            }
            match key {
                "source" => report.source = value.to_string(),
                "stream_length" => report.stream_length = int(value)?,
                "events" => event_count = Some(int(value)?),
                "performance" => report.performance = list(value)?,
                "performance_mean" => report.performance_mean = float(value)?,
                "precision" => report.precision = Some(float(value)?),
                "recall" => report.recall = Some(float(value)?),
                "occlusion_mean" => report.occlusion_mean = Some(float(value)?),
                "wall_seconds" => report.wall_seconds = float(value)?,
                _ => return Err(err(format!("unknown report key `{key}`"))),
            }
        }
        if event_count != Some(report.events.len()) {
            return Err(DriftError::Format(format!(
                "report declares {:?} events but lists {}",
                event_count,
                report.events.len()
            )));
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(perf: Vec<f64>, stat: f64) -> RunReport {
        RunReport {
            config: config_echo(&DetectorConfig::default()),
            source: "gen:sine".into(),
            stream_length: 2500,
            events: vec![EventRecord {
                index: 1150,
                flagged: vec![0, 1],
                flagged_names: vec!["f1".into(), "f2".into()],
                statistics: vec![stat, 0.1, 0.0, 1e-300],
                thresholds: vec![1.0 / 3.0, 2.0, 0.5, 7.25],
            }],
            performance_mean: perf.iter().sum::<f64>() / perf.len().max(1) as f64,
            performance: perf,
            precision: Some(1.0),
            recall: Some(0.5),
            occlusion_mean: None,
            wall_seconds: 1.234,
        }
    }

    #[test]
    fn roundtrip_example() {
        let r = sample(vec![0.9, 0.7], 12.5);
        assert_eq!(RunReport::parse(&r.render()).unwrap(), r);
        let empty = RunReport { events: vec![], performance: vec![], ..r };
        assert_eq!(RunReport::parse(&empty.render()).unwrap(), empty);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(RunReport::parse("events: 0\nbogus: 1\n").is_err());
        assert!(RunReport::parse("events: 2\n").is_err());
    }

    proptest! {
        #[test]
        fn numeric_fields_roundtrip_exactly(perf in prop::collection::vec(-1e6f64..1e6, 0..20), stat in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            let r = sample(perf, stat);
            let back = RunReport::parse(&r.render()).unwrap();
            prop_assert_eq!(back, r);
        }
    }
}
