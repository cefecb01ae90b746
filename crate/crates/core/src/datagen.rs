//! Synthetic drift streams with known drift positions and attributions, and
//! CSV ingestion for external streams.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::{FeatureSet, LabeledSample, TaskKind};
use crate::error::{DriftError, Result};

/// Width of the concept transition in the gradual SEA stream.
pub const SEA_GRADUAL_WIDTH: usize = 500;
/// Probability of keeping a class-1 sample in the imbalanced variants.
pub const IMBALANCE_KEEP_RATE: f64 = 0.25;
const SEA_THRESHOLDS: [f64; 4] = [8.0, 9.0, 7.0, 9.5];
const HYPERPLANE_DIM: usize = 10;
const HYPERPLANE_DRIFTING: usize = 5;
const HYPERPLANE_STEP: f64 = 0.001;
const HYPERPLANE_FLIP: f64 = 0.1;
/// Post-drift probability that a Mixed Boolean feature is 1 (0.5 before).
const MIXED_SHIFTED_RATE: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generator {
    Sine,
    SineImbalance,
    Sea,
    SeaGradual,
    Mixed,
    AugMixed,
    Agrawal,
    AgrawalImbalance,
    Hyperplane,
    Friedmann,
    D1,
    D2,
}

impl Generator {
    pub const ALL: [Generator; 12] = [
        Generator::Sine,
        Generator::SineImbalance,
        Generator::Sea,
        Generator::SeaGradual,
        Generator::Mixed,
        Generator::AugMixed,
        Generator::Agrawal,
        Generator::AgrawalImbalance,
        Generator::Hyperplane,
        Generator::Friedmann,
        Generator::D1,
        Generator::D2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Generator::Sine => "sine",
            Generator::SineImbalance => "sine-imbalance",
            Generator::Sea => "sea",
            Generator::SeaGradual => "sea-gradual",
            Generator::Mixed => "mixed",
            Generator::AugMixed => "aug-mixed",
            Generator::Agrawal => "agrawal",
            Generator::AgrawalImbalance => "agrawal-imbalance",
            Generator::Hyperplane => "hyperplane",
            Generator::Friedmann => "friedmann",
            Generator::D1 => "d1",
            Generator::D2 => "d2",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Generator::Sine | Generator::SineImbalance => 4,
            Generator::Sea | Generator::SeaGradual => 3,
            Generator::Mixed | Generator::AugMixed => 6,
            Generator::Agrawal | Generator::AgrawalImbalance => 9,
            Generator::Hyperplane => HYPERPLANE_DIM,
            Generator::Friedmann => 4,
            Generator::D1 => 3,
            Generator::D2 => 4,
        }
    }

    pub fn task(self) -> TaskKind {
        match self {
            Generator::Friedmann => TaskKind::Regression,
            _ => TaskKind::Classification { classes: 2 },
        }
    }

    /// Whether features should be standardized before modeling. The Boolean
    /// streams keep raw 0/1 inputs so that zero-masking means "absent".
    pub fn standardize_by_default(self) -> bool {
        !matches!(self, Generator::D1 | Generator::D2)
    }

    /// Default `(length, drift points)` used by the CLI and benchmarks.
    pub fn default_layout(self) -> (usize, Vec<usize>) {
        match self {
            Generator::D1 | Generator::D2 => (1600, vec![800]),
            Generator::Sine | Generator::SineImbalance => (2500, vec![1250]),
            Generator::Mixed | Generator::AugMixed => (4000, vec![2000]),
            Generator::Sea | Generator::SeaGradual => (20000, vec![5000, 10000, 15000]),
            Generator::Agrawal | Generator::AgrawalImbalance => (6000, vec![2000, 4000]),
            Generator::Hyperplane => (10000, vec![2000]),
            Generator::Friedmann => (4000, vec![2000]),
        }
    }

    /// Default label-noise rate.
    pub fn default_noise(self) -> f64 {
        match self {
            Generator::Sea | Generator::SeaGradual => 0.05,
            _ => 0.0,
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = DriftError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Generator::ALL
            .into_iter()
            .find(|g| g.name() == key)
            .ok_or_else(|| DriftError::config("generator", format!("unknown generator `{s}`")))
    }
}

/// What to generate.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub generator: Generator,
    pub length: usize,
    pub drift_points: Vec<usize>,
    pub noise: f64,
    pub seed: u64,
}

impl StreamSpec {
    /// The generator's default layout and noise.
    pub fn defaults(generator: Generator, seed: u64) -> Self {
        let (length, drift_points) = generator.default_layout();
        Self {
            generator,
            length,
            drift_points,
            noise: generator.default_noise(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(DriftError::config("length", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(DriftError::config("noise", format!("must lie in [0, 1), got {}", self.noise)));
        }
        if self.drift_points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DriftError::config("drifts", "drift points must be strictly increasing"));
        }
        if let Some(&last) = self.drift_points.last() {
            if last >= self.length {
                return Err(DriftError::config(
                    "drifts",
                    format!("drift point {last} is not below the stream length {}", self.length),
                ));
            }
        }
        Ok(())
    }
}

/// Known drift onsets and the features whose relation to the target changed.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub drift_points: Vec<usize>,
    pub drift_features: Vec<FeatureSet>,
}

fn set(items: &[usize]) -> FeatureSet {
    items.iter().copied().collect()
}

// Relevant attributes of the three Agrawal classification functions.
fn agrawal_relevant(function: usize) -> FeatureSet {
    match function {
        0 => set(&[2]),
        1 => set(&[0, 2]),
        _ => set(&[2, 3]),
    }
}

fn drift_features(generator: Generator, concept_after: usize) -> FeatureSet {
    match generator {
        Generator::Sine | Generator::SineImbalance => set(&[0, 1]),
        Generator::Sea | Generator::SeaGradual => set(&[0, 1]),
        Generator::Mixed => set(&[0, 1]),
        Generator::AugMixed => set(&[0, 1, 2, 3]),
        Generator::Agrawal | Generator::AgrawalImbalance => {
            let before = agrawal_relevant((concept_after - 1) % 3);
            let after = agrawal_relevant(concept_after % 3);
            before.iter().chain(after.iter()).collect()
        }
        Generator::Hyperplane => (0..HYPERPLANE_DRIFTING).collect(),
        Generator::Friedmann => set(&[0, 3]),
        Generator::D1 => set(&[0, 1]),
        Generator::D2 => set(&[1, 2]),
    }
}

struct StreamState {
    rng: ChaCha8Rng,
    hyperplane_weights: Vec<f64>,
    hyperplane_sigma: Vec<f64>,
}

fn bit(rng: &mut ChaCha8Rng, p: f64) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

fn agrawal_sample(rng: &mut ChaCha8Rng, function: usize) -> (Vec<f64>, f64) {
    let salary = rng.random_range(20_000.0..150_000.0);
    let commission = if salary >= 75_000.0 {
        0.0
    } else {
        rng.random_range(10_000.0..75_000.0)
    };
    let age = rng.random_range(20..=80) as f64;
    let elevel = rng.random_range(0..=4) as f64;
    let car = rng.random_range(1..=20) as f64;
    let zipcode = rng.random_range(0..=8) as f64;
    let hvalue = (9.0 - zipcode) * 100_000.0 * rng.random_range(0.5..1.5);
    let hyears = rng.random_range(1..=30) as f64;
    let loan = rng.random_range(0.0..500_000.0);
    let group_a = match function {
        0 => !(40.0..60.0).contains(&age),
        1 => {
            if age < 40.0 {
                (50_000.0..=100_000.0).contains(&salary)
            } else if age < 60.0 {
                (75_000.0..=125_000.0).contains(&salary)
            } else {
                (25_000.0..=75_000.0).contains(&salary)
            }
        }
        _ => {
            if age < 40.0 {
                elevel <= 1.0
            } else if age < 60.0 {
                (1.0..=3.0).contains(&elevel)
            } else {
                elevel >= 2.0
            }
        }
    };
    let label = if group_a { 0.0 } else { 1.0 };
    (
        vec![salary, commission, age, elevel, car, zipcode, hvalue, hyears, loan],
        label,
    )
}

impl StreamState {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hyperplane_weights = (0..HYPERPLANE_DIM).map(|_| rng.random::<f64>()).collect();
        Self {
            rng,
            hyperplane_weights,
            hyperplane_sigma: vec![1.0; HYPERPLANE_DRIFTING],
        }
    }

    /// Draws one `(features, label)` pair under `concept`, before noise and filtering.
    fn draw(&mut self, generator: Generator, concept: usize, drifting: bool) -> (Vec<f64>, f64) {
        let rng = &mut self.rng;
        let odd = concept % 2 == 1;
        match generator {
            Generator::Sine | Generator::SineImbalance => {
                let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
                let positive = x[1] < x[0].sin();
                (x, if positive != odd { 1.0 } else { 0.0 })
            }
            Generator::Sea | Generator::SeaGradual => {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..10.0)).collect();
                let theta = SEA_THRESHOLDS[concept % SEA_THRESHOLDS.len()];
                (x.clone(), if x[0] + x[1] <= theta { 1.0 } else { 0.0 })
            }
            Generator::Mixed | Generator::AugMixed => {
                let rate = if odd { MIXED_SHIFTED_RATE } else { 0.5 };
                let v = bit(rng, rate);
                let w = bit(rng, rate);
                let rest: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
                let curve = rest[1] < 0.5 + 0.3 * (3.0 * PI * rest[0]).sin();
                let votes = v as u8 + w as u8 + curve as u8;
                let mut positive = votes >= 2;
                if generator == Generator::AugMixed && odd {
                    positive = !positive;
                }
                let mut x = vec![v, w];
                x.extend(rest);
                (x, if positive { 1.0 } else { 0.0 })
            }
            Generator::Agrawal | Generator::AgrawalImbalance => agrawal_sample(rng, concept % 3),
            Generator::Hyperplane => {
                let x: Vec<f64> = (0..HYPERPLANE_DIM).map(|_| rng.random::<f64>()).collect();
                let w = &self.hyperplane_weights;
                let score: f64 = w.iter().zip(&x).map(|(w, x)| w * x).sum();
                let half: f64 = w.iter().sum::<f64>() / 2.0;
                let label = if score > half { 1.0 } else { 0.0 };
                if drifting {
                    for j in 0..HYPERPLANE_DRIFTING {
                        if self.rng.random::<f64>() < HYPERPLANE_FLIP {
                            self.hyperplane_sigma[j] = -self.hyperplane_sigma[j];
                        }
                        self.hyperplane_weights[j] += HYPERPLANE_STEP * self.hyperplane_sigma[j];
                    }
                }
                (x, label)
            }
            Generator::Friedmann => {
                let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
                let (a, b) = if odd { (x[3], x[0]) } else { (x[0], x[3]) };
                let eps: f64 = StandardNormal.sample(rng);
                let y = 10.0 * (PI * a * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * b + eps;
                (x, y)
            }
            Generator::D1 => {
                let x: Vec<f64> = (0..3).map(|_| bit(rng, 0.5)).collect();
                let (x1, x2, x3) = (x[0] == 1.0, x[1] == 1.0, x[2] == 1.0);
                let y = if odd { x1 || x3 } else { (x1 ^ x2) || x3 };
                (x, y as u8 as f64)
            }
            Generator::D2 => {
                let x: Vec<f64> = (0..4).map(|_| bit(rng, 0.5)).collect();
                let (x1, x2, x3) = (x[0] == 1.0, x[1] == 1.0, x[2] == 1.0);
                let y = if odd { x1 && x3 } else { x1 && x2 };
                (x, y as u8 as f64)
            }
        }
    }
}

fn concept_at(spec: &StreamSpec, t: usize, rng: &mut ChaCha8Rng) -> usize {
    let passed = spec.drift_points.iter().take_while(|&&p| p <= t).count();
    if spec.generator == Generator::SeaGradual && passed > 0 {
        let onset = spec.drift_points[passed - 1];
        let progress = (t - onset) as f64 / SEA_GRADUAL_WIDTH as f64;
        if progress < 1.0 && rng.random::<f64>() >= progress {
            return passed - 1;
        }
    }
    passed
}

/// Generates the stream and its ground truth. Deterministic in `spec.seed`.
pub fn generate(spec: &StreamSpec) -> Result<(Vec<LabeledSample>, GroundTruth)> {
    spec.validate()?;
    let generator = spec.generator;
    let mut state = StreamState::new(spec.seed);
    let imbalanced = matches!(generator, Generator::SineImbalance | Generator::AgrawalImbalance);
    let classification = generator.task().is_classification();
    let first_drift = spec.drift_points.first().copied();

    let mut stream = Vec::with_capacity(spec.length);
    for t in 0..spec.length {
        let concept = concept_at(spec, t, &mut state.rng);
        let drifting = first_drift.is_some_and(|p| t >= p);
        loop {
            let (x, mut y) = state.draw(generator, concept, drifting);
            if classification && spec.noise > 0.0 && state.rng.random::<f64>() < spec.noise {
                y = 1.0 - y;
            }
            if imbalanced && y == 1.0 && state.rng.random::<f64>() >= IMBALANCE_KEEP_RATE {
                continue;
            }
            stream.push(LabeledSample::new(x, y));
            break;
        }
    }

    let truth = GroundTruth {
        drift_points: spec.drift_points.clone(),
        drift_features: (1..=spec.drift_points.len())
            .map(|c| drift_features(generator, c))
            .collect(),
    };
    Ok((stream, truth))
}

/// Reads a stream from CSV: a header line, feature columns, and a final
/// column named `label`.
pub fn load_csv(path: impl AsRef<Path>, task: TaskKind) -> Result<Vec<LabeledSample>> {
    Ok(load_csv_named(path, task)?.1)
}

/// [`load_csv`] that also returns the feature column names.
pub fn load_csv_named(path: impl AsRef<Path>, task: TaskKind) -> Result<(Vec<String>, Vec<LabeledSample>)> {
    let file = File::open(path.as_ref())?;
    read_csv_named(file, task)
}

/// [`load_csv`] over any reader.
pub fn read_csv(reader: impl std::io::Read, task: TaskKind) -> Result<Vec<LabeledSample>> {
    Ok(read_csv_named(reader, task)?.1)
}

fn read_csv_named(reader: impl std::io::Read, task: TaskKind) -> Result<(Vec<String>, Vec<LabeledSample>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .clone();
    match headers.iter().next_back() {
        Some(name) if name.trim() == "label" => {}
        _ => {
            return Err(DriftError::Format(
                "the last header column must be named `label`".into(),
            ))
        }
    }
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(DriftError::Format("no feature columns before `label`".into()));
    }

    let mut samples = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| csv_error(e, line))?;
        let line = record.position().map_or(line, |p| p.line() as usize);
        let values = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.trim().parse::<f64>().map_err(|_| DriftError::Parse {
                    line,
                    message: format!("column `{}`: `{cell}` is not a number", &headers[col]),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let (features, label) = values.split_at(dim);
        let target = label[0];
        task.check_target(target).map_err(|e| DriftError::Parse {
            line,
            message: e.to_string(),
        })?;
        if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
            return Err(DriftError::Parse {
                line,
                message: format!("non-finite feature value {bad}"),
            });
        }
        samples.push(LabeledSample::new(features.to_vec(), target));
    }
    let names = headers.iter().take(dim).map(|h| h.trim().to_string()).collect();
    Ok((names, samples))
}

fn csv_error(err: csv::Error, fallback_line: usize) -> DriftError {
    let line = err
        .position()
        .map_or(fallback_line, |p| p.line() as usize);
    match err.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => DriftError::Parse {
            line,
            message: format!("expected {expected_len} columns, found {len}"),
        },
        csv::ErrorKind::Io(_) => DriftError::Io(std::io::Error::other(err.to_string())),
        _ => DriftError::Parse {
            line,
            message: err.to_string(),
        },
    }
}

/// Writes a stream in the CSV layout read by [`load_csv`]. Feature columns
/// are named `f1..fd`.
pub fn write_csv(path: impl AsRef<Path>, stream: &[LabeledSample]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    let dim = stream.first().map_or(0, LabeledSample::dim);
    let header: Vec<String> = (1..=dim).map(|i| format!("f{i}")).chain(["label".to_string()]).collect();
    writeln!(out, "{}", header.join(","))?;
    for s in stream {
        let row: Vec<String> = s
            .features
            .iter()
            .chain(std::iter::once(&s.target))
            .map(|v| v.to_string())
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a ground-truth file: one ascending 0-based drift index per line.
pub fn load_truth(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut points: Vec<usize> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let value = text.parse::<usize>().map_err(|_| DriftError::Parse {
            line: i + 1,
            message: format!("`{text}` is not a nonnegative integer"),
        })?;
        if points.last().is_some_and(|&prev| prev >= value) {
            return Err(DriftError::Parse {
                line: i + 1,
                message: "drift indices must be strictly ascending".into(),
            });
        }
        points.push(value);
    }
    Ok(points)
}

pub fn write_truth(path: impl AsRef<Path>, points: &[usize]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    for p in points {
        writeln!(out, "{p}")?;
    }
    out.flush()?;
    Ok(())
}
