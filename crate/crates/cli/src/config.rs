//! Flat `key=value` configuration with command-line overrides.

use std::path::Path;

use drift_core::model::Architecture;
use drift_core::{DetectorConfig, DriftError, Result, TaskKind};

pub const KEYS: [&str; 15] = [
    "n",
    "r",
    "delta",
    "alpha",
    "K",
    "subset_budget",
    "seed",
    "task",
    "model",
    "hidden",
    "epochs",
    "lr",
    "batch",
    "standardize",
    "l2",
];

/// Ordered `(key, value)` settings. Later entries win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    entries: Vec<(String, String)>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| DriftError::Parse {
                line: i + 1,
                message: format!("expected key=value, got `{line}`"),
            })?;
            entries.push(check_key(key.trim(), value.trim())?);
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path.as_ref())?)
    }

    /// Appends a `key=value` override.
    pub fn push_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| DriftError::config(assignment, "override must have the form key=value"))?;
        self.entries.push(check_key(key.trim(), value.trim())?);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Applies the settings on top of `base` and validates the result.
    pub fn apply(&self, base: DetectorConfig) -> Result<DetectorConfig> {
        let mut c = base;
        let mut hidden: Option<Vec<usize>> = None;
        let mut model: Option<String> = None;
        for (key, value) in &self.entries {
            match key.as_str() {
                "n" => c.n = number(key, value)?,
                "r" => c.r = number(key, value)?,
                "delta" => c.delta = number(key, value)?,
                "alpha" => c.alpha = number(key, value)?,
                "K" => c.bootstrap_count = number(key, value)?,
                "subset_budget" => c.subset_budget = number(key, value)?,
                "seed" => c.seed = number(key, value)?,
                "task" => c.task = parse_task(value)?,
                "model" => model = Some(value.to_ascii_lowercase()),
                "hidden" => hidden = Some(parse_hidden(value)?),
                "epochs" => c.model_spec.epochs = number(key, value)?,
                "lr" => c.model_spec.learning_rate = number(key, value)?,
                "batch" => c.model_spec.batch_size = number(key, value)?,
                "standardize" => c.standardize = parse_bool(key, value)?,
                "l2" => c.model_spec.l2 = number(key, value)?,
                _ => unreachable!("keys are checked on insertion"),
            }
        }
        match model.as_deref() {
            Some("linear") => c.model_spec.architecture = Architecture::Linear,
            Some("mlp") | None => {
                if model.is_some() || hidden.is_some() {
                    let current = match &c.model_spec.architecture {
                        Architecture::Mlp { hidden } => hidden.clone(),
                        Architecture::Linear => vec![32, 16],
                    };
                    c.model_spec.architecture = Architecture::Mlp {
                        hidden: hidden.unwrap_or(current),
                    };
                }
            }
            Some(other) => return Err(DriftError::config("model", format!("expected mlp or linear, got `{other}`"))),
        }
        c.validate()?;
        Ok(c)
    }
}

fn check_key(key: &str, value: &str) -> Result<(String, String)> {
    if !KEYS.contains(&key) {
        return Err(DriftError::config(key, format!("unknown configuration key; expected one of {}", KEYS.join(", "))));
    }
    Ok((key.to_string(), value.to_string()))
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| DriftError::config(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(DriftError::config(key, format!("expected true or false, got `{value}`"))),
    }
}

fn parse_hidden(value: &str) -> Result<Vec<usize>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| number("hidden", v.trim())).collect()
}

/// `regression`, `binary`, `classification` (2 classes) or `classification:C`.
pub fn parse_task(value: &str) -> Result<TaskKind> {
    let v = value.to_ascii_lowercase();
    match v.as_str() {
        "regression" => Ok(TaskKind::Regression),
        "binary" | "classification" => TaskKind::classification(2),
        _ => match v.strip_prefix("classification:") {
            Some(c) => TaskKind::classification(number("task", c)?),
            None => Err(DriftError::config("task", format!("unknown task `{value}`"))),
        },
    }
}

pub fn task_name(task: TaskKind) -> String {
    match task {
        TaskKind::Regression => "regression".into(),
        TaskKind::Classification { classes } => format!("classification:{classes}"),
    }
}
