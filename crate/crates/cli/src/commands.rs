use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use drift_core::baselines::run_marginal;
use drift_core::datagen::{generate, load_csv_named, load_truth, write_csv, write_truth, Generator, StreamSpec};
use drift_core::detector::run_detector;
use drift_core::eval::{average_performance, detection_pr, occlusion_mean, power_curve};
use drift_core::{DetectorConfig, DriftError, Result};

use crate::config::Settings;
use crate::report::{config_echo, EventRecord, RunReport};

#[derive(Debug, Clone)]
pub enum DataSource {
    Generator(Generator),
    Csv(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub source: DataSource,
    pub truth: Option<PathBuf>,
    pub occlusion: bool,
}

/// Window size used for a generator when the config does not set `n`.
pub fn default_window(generator: Generator) -> usize {
    match generator {
        Generator::D1 | Generator::D2 => 600,
        _ => 1000,
    }
}

/// Detector defaults suited to the generator's task and feature types.
pub fn generator_config(generator: Generator, seed: u64) -> DetectorConfig {
    DetectorConfig {
        n: default_window(generator),
        seed,
        task: generator.task(),
        standardize: generator.standardize_by_default(),
        ..DetectorConfig::default()
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<RunReport> {
    let started = Instant::now();
    let mut settings = match &args.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    for o in &args.overrides {
        settings.push_override(o)?;
    }

    let (config, stream, names, mut truth, source) = match &args.source {
        DataSource::Generator(g) => {
            let config = settings.apply(generator_config(*g, 0))?;
            let (stream, truth) = generate(&StreamSpec::defaults(*g, config.seed))?;
            let names = (1..=g.dim()).map(|i| format!("f{i}")).collect();
            (config, stream, names, Some(truth.drift_points), format!("gen:{g}"))
        }
        DataSource::Csv(path) => {
            let config = settings.apply(DetectorConfig::default())?;
            let (names, stream) = load_csv_named(path, config.task)?;
            (config, stream, names, None, format!("csv:{}", path.display()))
        }
    };
    if let Some(path) = &args.truth {
        truth = Some(load_truth(path)?);
    }

    let trace = run_detector(&stream, &config)?;
    let events = trace
        .events
        .iter()
        .map(|e| {
            let flagged = e.flagged_features.to_vec();
            EventRecord {
                index: e.stream_index,
                flagged_names: flagged.iter().map(|&k| names[k].clone()).collect(),
                flagged,
                statistics: e.per_feature.iter().map(|r| r.statistic).collect(),
                thresholds: e.per_feature.iter().map(|r| r.threshold).collect(),
            }
        })
        .collect();
    let score = truth
        .as_deref()
        .map(|t| detection_pr(&trace.drift_indices(), t, (config.n / 2) as i64))
        .transpose()?;
    let occlusion = if args.occlusion && !trace.events.is_empty() {
        Some(occlusion_mean(&trace)?)
    } else {
        None
    };

    Ok(RunReport {
        config: config_echo(&config),
        source,
        stream_length: stream.len(),
        events,
        performance_mean: average_performance(&trace)?,
        performance: trace.performance,
        precision: score.map(|s| s.precision),
        recall: score.map(|s| s.recall),
        occlusion_mean: occlusion,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Detection,
    Occlusion,
    Power,
}

impl std::str::FromStr for Suite {
    type Err = DriftError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "detection" => Ok(Suite::Detection),
            "occlusion" => Ok(Suite::Occlusion),
            "power" => Ok(Suite::Power),
            _ => Err(DriftError::config("suite", format!("expected detection, occlusion or power, got `{s}`"))),
        }
    }
}

pub const DETECTION_ROSTER: [Generator; 5] = [Generator::Sine, Generator::Sea, Generator::Mixed, Generator::D1, Generator::D2];
pub const OCCLUSION_ROSTER: [Generator; 4] = [Generator::D1, Generator::D2, Generator::Sine, Generator::Sea];
pub const POWER_WINDOWS: [usize; 4] = [100, 250, 500, 1000];
pub const POWER_TRIALS: usize = 50;

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

pub fn cmd_bench(suite: Suite, seed: u64) -> Result<String> {
    let mut out = String::new();
    match suite {
        Suite::Detection => {
            writeln!(out, "dataset\tP\tR\tperf\tmarginal_P\tmarginal_R").unwrap();
            for g in DETECTION_ROSTER {
                let config = generator_config(g, seed);
                let (stream, truth) = generate(&StreamSpec::defaults(g, seed))?;
                let tol = (config.n / 2) as i64;
                let trace = run_detector(&stream, &config)?;
                let s = detection_pr(&trace.drift_indices(), &truth.drift_points, tol)?;
                let m = run_marginal(&stream, &config)?;
                let ms = detection_pr(&m.drift_indices(), &truth.drift_points, tol)?;
                writeln!(
                    out,
                    "{g}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
                    s.precision,
                    s.recall,
                    average_performance(&trace)?,
                    ms.precision,
                    ms.recall
                )
                .unwrap();
            }
        }
        Suite::Occlusion => {
            writeln!(out, "dataset\tevents\tsigma_mean").unwrap();
            for g in OCCLUSION_ROSTER {
                let (stream, _) = generate(&StreamSpec::defaults(g, seed))?;
                let trace = run_detector(&stream, &generator_config(g, seed))?;
                let sigma = if trace.events.is_empty() { None } else { Some(occlusion_mean(&trace)?) };
                writeln!(out, "{g}\t{}\t{}", trace.events.len(), fmt_opt(sigma)).unwrap();
            }
        }
        Suite::Power => {
            writeln!(out, "dataset\tn\tpower").unwrap();
            let g = Generator::Sine;
            let curve = power_curve(&StreamSpec::defaults(g, seed), &POWER_WINDOWS, POWER_TRIALS, &generator_config(g, seed))?;
            for (n, p) in curve {
                writeln!(out, "{g}\t{n}\t{p:.3}").unwrap();
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct GenArgs {
    pub generator: Generator,
    pub length: usize,
    pub drifts: Vec<usize>,
    pub seed: u64,
    pub noise: Option<f64>,
    pub out: PathBuf,
    pub truth_out: Option<PathBuf>,
}

pub fn cmd_gen(args: &GenArgs) -> Result<()> {
    let spec = StreamSpec {
        generator: args.generator,
        length: args.length,
        drift_points: args.drifts.clone(),
        noise: args.noise.unwrap_or(args.generator.default_noise()),
        seed: args.seed,
    };
    let (stream, truth) = generate(&spec)?;
    write_csv(&args.out, &stream)?;
    if let Some(path) = &args.truth_out {
        write_truth(path, &truth.drift_points)?;
    }
    Ok(())
}

/// Parses `i1,i2,...` (empty for no drifts).
pub fn parse_drifts(text: &str) -> Result<Vec<usize>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| DriftError::config("drifts", format!("`{v}` is not a nonnegative integer")))
        })
        .collect()
}
