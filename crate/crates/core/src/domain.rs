//! Shared domain types: samples, windows, feature sets, losses and the
//! detector configuration.

use std::fmt;

use crate::error::{DriftError, Result};
use crate::model::ModelSpec;

/// One `(features, target)` observation from a stream.
///
/// Classification targets carry the class index as an integral `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub target: f64,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, target: f64) -> Self {
        Self { features, target }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// An ordered run of samples taken from a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    samples: Vec<LabeledSample>,
    start_index: usize,
}

impl SampleWindow {
    /// Builds a window, checking that every sample shares one dimensionality.
    pub fn new(samples: Vec<LabeledSample>, start_index: usize) -> Result<Self> {
        if let Some(first) = samples.first() {
            let dim = first.dim();
            if dim == 0 {
                return Err(DriftError::Data("samples must have at least one feature".into()));
            }
            if let Some(bad) = samples.iter().find(|s| s.dim() != dim) {
                return Err(DriftError::Dimensionality {
                    expected: dim,
                    found: bad.dim(),
                });
            }
        }
        Ok(Self {
            samples,
            start_index,
        })
    }

    /// Copies `stream[start..start + len]` into a window.
    pub fn from_stream(stream: &[LabeledSample], start: usize, len: usize) -> Result<Self> {
        let end = start
            .checked_add(len)
            .filter(|&end| end <= stream.len())
            .ok_or_else(|| {
                DriftError::InsufficientData(format!(
                    "window [{start}, {start}+{len}) exceeds stream of length {}",
                    stream.len()
                ))
            })?;
        Self::new(stream[start..end].to_vec(), start)
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Dimensionality of the window, or `None` when empty.
    pub fn dim(&self) -> Option<usize> {
        self.samples.first().map(LabeledSample::dim)
    }

    /// The first `len` samples as a new window.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        Self::from_stream(&self.samples, 0, len).map(|w| w.with_start(self.start_index))
    }

    fn with_start(mut self, start_index: usize) -> Self {
        self.start_index = start_index;
        self
    }

    pub fn into_samples(self) -> Vec<LabeledSample> {
        self.samples
    }
}

/// Learning task of the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Classification { classes: usize },
    Regression,
}

impl TaskKind {
    pub fn classification(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(DriftError::config("task", "classification needs at least 2 classes"));
        }
        Ok(TaskKind::Classification { classes })
    }

    /// The risk functional used for this task.
    pub fn loss_kind(&self) -> LossKind {
        match self {
            TaskKind::Classification { .. } => LossKind::ZeroOne,
            TaskKind::Regression => LossKind::Squared,
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, TaskKind::Classification { .. })
    }

    /// Checks that a target value is admissible for the task.
    pub fn check_target(&self, target: f64) -> Result<()> {
        if !target.is_finite() {
            return Err(DriftError::Data(format!("non-finite target {target}")));
        }
        if let TaskKind::Classification { classes } = *self {
            if target.fract() != 0.0 || target < 0.0 || target >= classes as f64 {
                return Err(DriftError::Data(format!(
                    "class label {target} outside [0, {}]",
                    classes - 1
                )));
            }
        }
        Ok(())
    }
}

/// Loss used when estimating risks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    ZeroOne,
    Squared,
}

/// A model output reduced to what a loss needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Class(usize),
    Value(f64),
}

/// Evaluates `kind` on a single prediction.
pub fn loss(kind: LossKind, prediction: Prediction, target: f64) -> Result<f64> {
    match (kind, prediction) {
        (LossKind::ZeroOne, Prediction::Class(class)) => {
            Ok(if class as f64 == target { 0.0 } else { 1.0 })
        }
        (LossKind::Squared, Prediction::Value(value)) => {
            let diff = value - target;
            Ok(diff * diff)
        }
        (LossKind::ZeroOne, Prediction::Value(_)) => Err(DriftError::config(
            "loss",
            "zero-one loss needs a class prediction",
        )),
        (LossKind::Squared, Prediction::Class(_)) => Err(DriftError::config(
            "loss",
            "squared loss needs a real-valued prediction",
        )),
    }
}

/// A set of 0-based feature indices, stored as a bitset.
///
/// Trailing zero words are trimmed so that equal sets compare and hash equal
/// regardless of how they were built.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSet {
    words: Vec<u64>,
}

impl FeatureSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `{0, 1, ..., dim - 1}`.
    pub fn full(dim: usize) -> Self {
        (0..dim).collect()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.words
            .get(index / 64)
            .is_some_and(|w| w & (1u64 << (index % 64)) != 0)
    }

    pub fn insert(&mut self, index: usize) {
        let word = index / 64;
        if self.words.len() <= word {
            self.words.resize(word + 1, 0);
        }
        self.words[word] |= 1u64 << (index % 64);
    }

    pub fn remove(&mut self, index: usize) {
        if let Some(w) = self.words.get_mut(index / 64) {
            *w &= !(1u64 << (index % 64));
        }
        self.trim();
    }

    /// `self ∪ {index}`.
    pub fn with(&self, index: usize) -> Self {
        let mut out = self.clone();
        out.insert(index);
        out
    }

    /// `self \ {index}`.
    pub fn without(&self, index: usize) -> Self {
        let mut out = self.clone();
        out.remove(index);
        out
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn is_subset(&self, other: &FeatureSet) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(i, w)| w & !other.words.get(i).copied().unwrap_or(0) == 0)
    }

    /// Largest index plus one, or 0 for the empty set.
    pub fn bound(&self) -> usize {
        match self.words.last() {
            None => 0,
            Some(w) => (self.words.len() - 1) * 64 + (64 - w.leading_zeros() as usize),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(i * 64 + bit)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }
}

impl FromIterator<usize> for FeatureSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut set = FeatureSet::empty();
        for i in iter {
            set.insert(i);
        }
        set
    }
}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, k) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "}}")
    }
}

/// Zero-projects `x` onto the coordinates in `subset`.
pub fn mask(x: &[f64], subset: &FeatureSet) -> Result<Vec<f64>> {
    let mut out = vec![0.0; x.len()];
    mask_into(x, subset, &mut out)?;
    Ok(out)
}

/// Like [`mask`], writing into a caller-provided buffer of the same length.
pub fn mask_into(x: &[f64], subset: &FeatureSet, out: &mut [f64]) -> Result<()> {
    if subset.bound() > x.len() {
        return Err(DriftError::FeatureIndex {
            index: subset.bound() - 1,
            dim: x.len(),
        });
    }
    debug_assert_eq!(x.len(), out.len());
    out.fill(0.0);
    for k in subset.iter() {
        out[k] = x[k];
    }
    Ok(())
}

/// Per-feature affine standardization fitted on a training block.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    /// Fits means and standard deviations; constant features keep scale 1.
    pub fn fit(samples: &[LabeledSample]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| DriftError::InsufficientData("cannot standardize an empty block".into()))?;
        let dim = first.dim();
        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            for (m, x) in mean.iter_mut().zip(&s.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for s in samples {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(&s.features) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, sample: &LabeledSample) -> LabeledSample {
        let features = sample
            .features
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        LabeledSample::new(features, sample.target)
    }

    pub fn apply_all(&self, samples: &[LabeledSample]) -> Vec<LabeledSample> {
        samples.iter().map(|s| self.apply(s)).collect()
    }
}

/// Configuration of one detector run.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Window size in samples.
    pub n: usize,
    /// Fraction of each batch used for training.
    pub r: f64,
    /// Slide step when no drift is found.
    pub delta: usize,
    pub alpha: f64,
    /// Bootstrap replicate count.
    pub bootstrap_count: usize,
    /// Maximum subsets per feature; 0 means exhaustive.
    pub subset_budget: usize,
    pub seed: u64,
    pub task: TaskKind,
    pub model_spec: ModelSpec,
    /// Standardize features using statistics of the first training block.
    pub standardize: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            r: 0.8,
            delta: 50,
            alpha: 0.05,
            bootstrap_count: 100,
            subset_budget: 0,
            seed: 0,
            task: TaskKind::Classification { classes: 2 },
            model_spec: ModelSpec::default(),
            standardize: false,
        }
    }
}

impl DetectorConfig {
    /// `⌊n·r⌋`, the training block size.
    pub fn train_size(&self) -> usize {
        (self.n as f64 * self.r).floor() as usize
    }

    /// `n − ⌊n·r⌋`, the number of samples per tested window.
    pub fn effective_size(&self) -> usize {
        self.n - self.train_size().min(self.n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(DriftError::config("r", format!("must lie in (0, 1), got {}", self.r)));
        }
        if self.n == 0 {
            return Err(DriftError::config("n", "must be positive"));
        }
        if self.delta < 1 || self.delta > self.n {
            return Err(DriftError::config(
                "delta",
                format!("must lie in [1, n={}], got {}", self.n, self.delta),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(DriftError::config(
                "alpha",
                format!("must lie in (0, 1), got {}", self.alpha),
            ));
        }
        if self.bootstrap_count < 1 {
            return Err(DriftError::config("K", "must be at least 1"));
        }
        if self.train_size() == 0 {
            return Err(DriftError::config("n", "n·r leaves no training samples"));
        }
        if self.effective_size() == 0 {
            return Err(DriftError::config("n", "n − ⌊n·r⌋ must be at least 1"));
        }
        if let TaskKind::Classification { classes } = self.task {
            if classes < 2 {
                return Err(DriftError::config("task", "classification needs at least 2 classes"));
            }
        }
        self.model_spec.validate()
    }
}

/// Derives an independent 64-bit seed from a master seed and a stream id.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined state
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mask_full_set_is_identity() {
        let s: FeatureSet = [0, 1].into_iter().collect();
        assert_eq!(mask(&[3.0, 5.0], &s).unwrap(), vec![3.0, 5.0]);
    }

    #[test]
    fn mask_empty_set_projects_to_zero() {
        assert_eq!(mask(&[3.0, 5.0], &FeatureSet::empty()).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mask_coordinatewise() {
        let s: FeatureSet = [0, 2].into_iter().collect();
        assert_eq!(mask(&[3.0, 5.0, -2.0], &s).unwrap(), vec![3.0, 0.0, -2.0]);
    }

    #[test]
    fn mask_out_of_range() {
        let s: FeatureSet = [3].into_iter().collect();
        assert!(matches!(
            mask(&[1.0, 2.0], &s),
            Err(DriftError::FeatureIndex { index: 3, dim: 2 })
        ));
    }

    #[test]
    fn loss_values() {
        assert_eq!(loss(LossKind::ZeroOne, Prediction::Class(1), 1.0).unwrap(), 0.0);
        assert_eq!(loss(LossKind::ZeroOne, Prediction::Class(0), 1.0).unwrap(), 1.0);
        assert_eq!(loss(LossKind::Squared, Prediction::Value(2.5), 1.0).unwrap(), 2.25);
        assert!(loss(LossKind::ZeroOne, Prediction::Value(1.0), 1.0).is_err());
        assert!(loss(LossKind::Squared, Prediction::Class(1), 1.0).is_err());
    }

    #[test]
    fn feature_set_ops() {
        let s: FeatureSet = [1, 70].into_iter().collect();
        assert!(s.contains(70) && s.contains(1) && !s.contains(0));
        assert_eq!(s.len(), 2);
        assert_eq!(s.bound(), 71);
        assert_eq!(s.without(70), [1].into_iter().collect());
        assert_eq!(s.without(70).bound(), 2);
        assert_eq!(s.to_string(), "{1,70}");
        assert!(s.without(1).is_subset(&s));
        assert!(!s.is_subset(&s.without(1)));
    }

    #[test]
    fn config_validation_names_keys() {
        let cfg = DetectorConfig {
            bootstrap_count: 0,
            ..DetectorConfig::default()
        };
        match cfg.validate() {
            Err(DriftError::Configuration { key, .. }) => assert_eq!(key, "K"),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = DetectorConfig {
            delta: 0,
            ..DetectorConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(DetectorConfig::default().effective_size(), 200);
    }

    #[test]
    fn window_rejects_mixed_dims() {
        let samples = vec![
            LabeledSample::new(vec![1.0, 2.0], 0.0),
            LabeledSample::new(vec![1.0], 0.0),
        ];
        assert!(SampleWindow::new(samples, 0).is_err());
    }

    #[test]
    fn classification_target_check() {
        let task = TaskKind::Classification { classes: 2 };
        assert!(task.check_target(1.0).is_ok());
        assert!(task.check_target(2.0).is_err());
        assert!(task.check_target(0.5).is_err());
        assert!(TaskKind::Regression.check_target(0.5).is_ok());
    }

    fn subset_strategy(dim: usize) -> impl Strategy<Value = FeatureSet> {
        proptest::collection::vec(any::<bool>(), dim)
            .prop_map(|bits| bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect())
    }

    proptest! {
        #[test]
        fn mask_is_idempotent(x in proptest::collection::vec(-10.0f64..10.0, 6), s in subset_strategy(6)) {
            let once = mask(&x, &s).unwrap();
            prop_assert_eq!(mask(&once, &s).unwrap(), once);
        }

        #[test]
        fn mask_monotone_in_subset(
            x in proptest::collection::vec(-10.0f64..10.0, 6),
            a in subset_strategy(6),
            b in subset_strategy(6),
        ) {
            let big: FeatureSet = a.iter().chain(b.iter()).collect();
            let small_m = mask(&x, &a).unwrap();
            let big_m = mask(&x, &big).unwrap();
            for (s, b) in small_m.iter().zip(&big_m) {
                if *s != 0.0 {
                    prop_assert_eq!(s, b);
                }
            }
        }

        #[test]
        fn squared_loss_nonnegative(p in -100.0f64..100.0, t in -100.0f64..100.0) {
            let l = loss(LossKind::Squared, Prediction::Value(p), t).unwrap();
            prop_assert!(l >= 0.0);
            prop_assert_eq!(l == 0.0, p == t);
        }
    }
}
