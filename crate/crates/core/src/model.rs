//! Empirical-risk-minimizing base models and subset-masked risk.
//!
//! The network is a plain fully connected stack: ReLU hidden layers, then
//! per-class sigmoid outputs for classification or a single linear output
//! for regression. Training minimizes cross-entropy (resp. mean squared
//! error) with mini-batch SGD; the zero-one and squared losses in
//! [`crate::domain::LossKind`] are only used to evaluate risk.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{derive_seed, loss, mask_into, FeatureSet, LabeledSample, LossKind, Prediction, SampleWindow, TaskKind};
use crate::error::{DriftError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Architecture {
    Linear,
    Mlp { hidden: Vec<usize> },
}

/// Hyperparameters of the model class.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            architecture: Architecture::Mlp {
                hidden: vec![32, 16],
            },
            epochs: 200,
            learning_rate: 0.1,
            batch_size: 32,
            l2: 0.0,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if let Architecture::Mlp { hidden } = &self.architecture {
            if hidden.is_empty() {
                return Err(DriftError::config("hidden", "an MLP needs at least one hidden layer"));
            }
            if hidden.contains(&0) {
                return Err(DriftError::config("hidden", "hidden layer sizes must be positive"));
            }
        }
        if self.epochs == 0 {
            return Err(DriftError::config("epochs", "must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(DriftError::config("lr", "must be a positive finite number"));
        }
        if self.batch_size == 0 {
            return Err(DriftError::config("batch", "must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(DriftError::config("l2", "must be nonnegative"));
        }
        Ok(())
    }

    fn hidden(&self) -> &[usize] {
        match &self.architecture {
            Architecture::Linear => &[],
            Architecture::Mlp { hidden } => hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs × inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    fn glorot(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let a = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.random_range(-a..=a)).collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.inputs).zip(&self.bias))
        {
            *o = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Model output before reduction to a [`Prediction`].
#[derive(Debug, Clone, PartialEq)]
pub enum ModelOutput {
    /// Per-class sigmoid scores.
    Scores(Vec<f64>),
    Value(f64),
}

impl ModelOutput {
    /// Reduces scores to the argmax class (lowest index wins ties).
    pub fn prediction(&self) -> Prediction {
        match self {
            ModelOutput::Scores(scores) => Prediction::Class(argmax(scores)),
            ModelOutput::Value(v) => Prediction::Value(*v),
        }
    }
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Reusable activation buffers for allocation-free prediction.
#[derive(Debug, Clone)]
pub struct Scratch {
    activations: Vec<Vec<f64>>,
    masked: Vec<f64>,
}

/// A fitted model. Immutable after [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    spec: ModelSpec,
    task: TaskKind,
    input_dim: usize,
    layers: Vec<Layer>,
    // regression targets are trained in standardized units
    target_mean: f64,
    target_scale: f64,
}

impl TrainedModel {
    fn initialize(spec: &ModelSpec, task: TaskKind, input_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
        let outputs = match task {
            TaskKind::Classification { classes } => classes,
            TaskKind::Regression => 1,
        };
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(spec.hidden());
        sizes.push(outputs);
        let layers = sizes
            .windows(2)
            .map(|w| Layer::glorot(w[0], w[1], &mut rng))
            .collect();
        Self {
            spec: spec.clone(),
            task,
            input_dim,
            layers,
            target_mean: 0.0,
            target_scale: 1.0,
        }
    }

    /// A classifier whose scores are identical for every input, favouring `class`.
    pub fn constant_classifier(input_dim: usize, classes: usize, class: usize) -> Self {
        let layer = Layer {
            inputs: input_dim,
            outputs: classes,
            weights: vec![0.0; input_dim * classes],
            bias: (0..classes).map(|c| if c == class { 1.0 } else { -1.0 }).collect(),
        };
        Self {
            spec: ModelSpec {
                architecture: Architecture::Linear,
                ..ModelSpec::default()
            },
            task: TaskKind::Classification { classes },
            input_dim,
            layers: vec![layer],
            target_mean: 0.0,
            target_scale: 1.0,
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            activations: self.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
            masked: vec![0.0; self.input_dim],
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(DriftError::Dimensionality {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    // Leaves raw output-layer values in the last activation buffer.
    fn forward_raw(&self, x: &[f64], scratch: &mut Scratch) {
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let (before, rest) = scratch.activations.split_at_mut(i);
            let input: &[f64] = if i == 0 { x } else { &before[i - 1] };
            let out = &mut rest[0];
            layer.forward(input, out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<ModelOutput> {
        self.check_dim(x)?;
        let mut scratch = self.scratch();
        self.forward_raw(x, &mut scratch);
        let raw = scratch.activations.last().expect("at least one layer");
        Ok(match self.task {
            TaskKind::Classification { .. } => ModelOutput::Scores(raw.iter().map(|&z| sigmoid(z)).collect()),
            TaskKind::Regression => ModelOutput::Value(raw[0] * self.target_scale + self.target_mean),
        })
    }

    /// Prediction reduced for loss evaluation, reusing `scratch`.
    pub fn predict_with(&self, x: &[f64], scratch: &mut Scratch) -> Result<Prediction> {
        self.check_dim(x)?;
        self.forward_raw(x, scratch);
        let raw = scratch.activations.last().expect("at least one layer");
        Ok(match self.task {
            // sigmoid is monotone, so the argmax of raw outputs is the argmax of scores
            TaskKind::Classification { .. } => Prediction::Class(argmax(raw)),
            TaskKind::Regression => Prediction::Value(raw[0] * self.target_scale + self.target_mean),
        })
    }

    /// Prediction on `x ⊙ subset`.
    pub fn predict_masked(&self, x: &[f64], subset: &FeatureSet, scratch: &mut Scratch) -> Result<Prediction> {
        self.check_dim(x)?;
        let mut masked = std::mem::take(&mut scratch.masked);
        let result = mask_into(x, subset, &mut masked).and_then(|_| self.predict_with(&masked, scratch));
        scratch.masked = masked;
        result
    }

    /// Flattened parameter vector: for each layer, weights then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layers.iter().map(Layer::param_count).sum());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// A copy of this model with its parameters replaced.
    pub fn with_parameters(&self, params: &[f64]) -> Result<Self> {
        let expected: usize = self.layers.iter().map(Layer::param_count).sum();
        if params.len() != expected {
            return Err(DriftError::Dimensionality {
                expected,
                found: params.len(),
            });
        }
        let mut out = self.clone();
        let mut offset = 0;
        for l in &mut out.layers {
            let w = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + w]);
            offset += w;
            let b = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + b]);
            offset += b;
        }
        Ok(out)
    }

    /// Training objective on `batch` and its gradient in [`Self::parameters`] order.
    ///
    /// The objective is the mean per-sample cross-entropy (summed over class
    /// outputs) or half squared error in standardized target units, plus
    /// `l2/2 · ‖W‖²` over weights.
    pub fn objective_gradient(&self, batch: &[LabeledSample]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(DriftError::InsufficientData("empty batch".into()));
        }
        let mut grads: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer {
                weights: vec![0.0; l.weights.len()],
                bias: vec![0.0; l.bias.len()],
                ..*l
            })
            .collect();
        let mut work = Backprop::new(self);
        let mut total = 0.0;
        for s in batch {
            self.check_dim(&s.features)?;
            total += work.accumulate(self, s, &mut grads);
        }
        let inv = 1.0 / batch.len() as f64;
        let mut objective = total * inv;
        let mut flat = Vec::new();
        for (l, g) in self.layers.iter().zip(&grads) {
            for (gw, w) in g.weights.iter().zip(&l.weights) {
                flat.push(gw * inv + self.spec.l2 * w);
            }
            flat.extend(g.bias.iter().map(|gb| gb * inv));
            objective += 0.5 * self.spec.l2 * l.weights.iter().map(|w| w * w).sum::<f64>();
        }
        Ok((objective, flat))
    }

    fn sgd_step(&mut self, batch: &[&LabeledSample], grads: &mut [Layer], work: &mut Backprop) {
        for g in grads.iter_mut() {
            g.weights.fill(0.0);
            g.bias.fill(0.0);
        }
        for s in batch {
            work.accumulate(self, s, grads);
        }
        let step = self.spec.learning_rate / batch.len() as f64;
        let decay = self.spec.learning_rate * self.spec.l2;
        for (l, g) in self.layers.iter_mut().zip(grads.iter()) {
            for (w, gw) in l.weights.iter_mut().zip(&g.weights) {
                *w -= step * gw + decay * *w;
            }
            for (b, gb) in l.bias.iter_mut().zip(&g.bias) {
                *b -= step * gb;
            }
        }
    }

    fn standardized_target(&self, target: f64) -> f64 {
        (target - self.target_mean) / self.target_scale
    }
}

/// Forward/backward buffers for one sample at a time.
struct Backprop {
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Backprop {
    fn new(model: &TrainedModel) -> Self {
        let sizes: Vec<usize> = model.layers.iter().map(|l| l.outputs).collect();
        Self {
            pre: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            act: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            delta: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Adds the per-sample gradient into `grads` and returns the per-sample loss.
    fn accumulate(&mut self, model: &TrainedModel, sample: &LabeledSample, grads: &mut [Layer]) -> f64 {
        let last = model.layers.len() - 1;
        for (i, layer) in model.layers.iter().enumerate() {
            let input: &[f64] = if i == 0 { &sample.features } else { &self.act[i - 1] };
            layer.forward(input, &mut self.pre[i]);
            let (pre, act) = (&self.pre[i], &mut self.act[i]);
            if i < last {
                for (a, z) in act.iter_mut().zip(pre) {
                    *a = z.max(0.0);
                }
            } else {
                act.copy_from_slice(pre);
            }
        }

        let out = &self.pre[last];
        let delta = &mut self.delta[last];
        let loss = match model.task {
            TaskKind::Classification { .. } => {
                let class = sample.target as usize;
                let mut total = 0.0;
                for (c, (d, &z)) in delta.iter_mut().zip(out).enumerate() {
                    let t = if c == class { 1.0 } else { 0.0 };
                    *d = sigmoid(z) - t;
                    // log(1 + e^z) − t·z, written stably
                    total += z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z;
                }
                total
            }
            TaskKind::Regression => {
                let err = out[0] - model.standardized_target(sample.target);
                delta[0] = err;
                0.5 * err * err
            }
        };

        for i in (0..=last).rev() {
            let layer = &model.layers[i];
            let input: &[f64] = if i == 0 { &sample.features } else { &self.act[i - 1] };
            let g = &mut grads[i];
            for (o, &d) in self.delta[i].iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            if i > 0 {
                let (lower, upper) = self.delta.split_at_mut(i);
                let below = &mut lower[i - 1];
                below.fill(0.0);
                for (o, &d) in upper[0].iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (b, w) in below.iter_mut().zip(row) {
                        *b += d * w;
                    }
                }
                for (b, z) in below.iter_mut().zip(&self.pre[i - 1]) {
                    if *z <= 0.0 {
                        *b = 0.0;
                    }
                }
            }
        }
        loss
    }
}

fn validate_training_data(train: &SampleWindow, task: TaskKind) -> Result<usize> {
    let dim = train
        .dim()
        .ok_or_else(|| DriftError::InsufficientData("cannot fit a model on an empty window".into()))?;
    for (i, s) in train.samples().iter().enumerate() {
        if let Some(bad) = s.features.iter().find(|v| !v.is_finite()) {
            return Err(DriftError::Data(format!(
                "non-finite feature value {bad} at stream index {}",
                train.start_index() + i
            )));
        }
        task.check_target(s.target)?;
    }
    Ok(dim)
}

/// Fits a model by empirical risk minimization. Deterministic in `seed`.
pub fn fit(train: &SampleWindow, spec: &ModelSpec, task: TaskKind, seed: u64) -> Result<TrainedModel> {
    spec.validate()?;
    let dim = validate_training_data(train, task)?;
    let mut model = TrainedModel::initialize(spec, task, dim, seed);

    if task == TaskKind::Regression {
        let n = train.len() as f64;
        let mean = train.samples().iter().map(|s| s.target).sum::<f64>() / n;
        let var = train.samples().iter().map(|s| (s.target - mean).powi(2)).sum::<f64>() / n;
        model.target_mean = mean;
        model.target_scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let mut order: Vec<&LabeledSample> = train.samples().iter().collect();
    let mut grads: Vec<Layer> = model
        .layers
        .iter()
        .map(|l| Layer {
            weights: vec![0.0; l.weights.len()],
            bias: vec![0.0; l.bias.len()],
            ..*l
        })
        .collect();
    let mut work = Backprop::new(&model);
    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(spec.batch_size) {
            model.sgd_step(batch, &mut grads, &mut work);
        }
    }

    if model.parameters().iter().any(|p| !p.is_finite()) {
        return Err(DriftError::Data(
            "training diverged to non-finite parameters; lower the learning rate".into(),
        ));
    }
    Ok(model)
}

/// Empirical risk of `model` on `window` with inputs zero-projected onto `subset`.
pub fn subset_risk(model: &TrainedModel, window: &SampleWindow, subset: &FeatureSet, loss_kind: LossKind) -> Result<f64> {
    if window.is_empty() {
        return Err(DriftError::InsufficientData("risk of an empty window".into()));
    }
    let mut scratch = model.scratch();
    let mut total = 0.0;
    for s in window.samples() {
        let pred = model.predict_masked(&s.features, subset, &mut scratch)?;
        total += loss(loss_kind, pred, s.target)?;
    }
    Ok(total / window.len() as f64)
}

/// Plain empirical risk (no masking).
pub fn empirical_risk(model: &TrainedModel, window: &SampleWindow, loss_kind: LossKind) -> Result<f64> {
    subset_risk(model, window, &FeatureSet::full(model.input_dim()), loss_kind)
}
