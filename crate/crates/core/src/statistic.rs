//! The per-feature drift statistic.
//!
//! For feature `k` the statistic compares, between two windows, how much the
//! masked risk drops when `k` is revealed on top of a subset `S`:
//!
//! ```text
//! d̂ᵏ = max_S |(R̂ₚ(S) − R̂ₚ(S∪{k})) − (R̂_q(S) − R̂_q(S∪{k}))|,   ĉᵏ = ñ · d̂ᵏ
//! ```
//!
//! `S` ranges over the subsets of the other features listed in a
//! [`SubsetPlan`]. Subsets containing `k` contribute zero and are skipped.

use std::collections::HashMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{derive_seed, loss, FeatureSet, LabeledSample, LossKind, SampleWindow};
use crate::error::{DriftError, Result};
use crate::model::{subset_risk, TrainedModel};

/// Largest `d − 1` for which an exhaustive plan is materialized.
pub const MAX_EXHAUSTIVE_BITS: usize = 20;

/// Subsets evaluated for each feature.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetPlan {
    per_feature: Vec<Vec<FeatureSet>>,
    exhaustive: bool,
    seed: u64,
}

impl SubsetPlan {
    pub fn dim(&self) -> usize {
        self.per_feature.len()
    }

    pub fn is_exhaustive(&self) -> bool {
        self.exhaustive
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Subsets for feature `k`, in evaluation order.
    pub fn subsets(&self, k: usize) -> Result<&[FeatureSet]> {
        self.per_feature
            .get(k)
            .map(Vec::as_slice)
            .ok_or(DriftError::FeatureIndex {
                index: k,
                dim: self.per_feature.len(),
            })
    }

    /// Every distinct subset needed to evaluate the plan, i.e. all `S` and `S ∪ {k}`.
    pub fn required_subsets(&self) -> Vec<FeatureSet> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for (k, subsets) in self.per_feature.iter().enumerate() {
            for s in subsets {
                for set in [s.clone(), s.with(k)] {
                    if !seen.contains_key(&set) {
                        seen.insert(set.clone(), out.len());
                        out.push(set);
                    }
                }
            }
        }
        out
    }
}

fn complement_without(d: usize, k: usize) -> Vec<usize> {
    (0..d).filter(|&j| j != k).collect()
}

/// Builds the per-feature subset lists.
///
/// The plan is exhaustive when `budget == 0` or when `2^(d−1) ≤ budget`.
/// Otherwise each feature gets `∅`, the full complement, and `budget − 2`
/// further distinct subsets drawn by picking a size uniformly in
/// `1..=d−2` and then a uniform subset of that size.
pub fn build_subset_plan(d: usize, budget: usize, seed: u64) -> Result<SubsetPlan> {
    if d == 0 {
        return Err(DriftError::config("d", "need at least one feature"));
    }
    let others = d - 1;
    let universe_fits = others < 63 && (1usize << others) <= budget;
    let exhaustive = budget == 0 || universe_fits;
    if exhaustive {
        if others > MAX_EXHAUSTIVE_BITS {
            return Err(DriftError::config(
                "subset_budget",
                format!("exhaustive enumeration of 2^{others} subsets per feature is infeasible; set a positive budget"),
            ));
        }
        let per_feature = (0..d)
            .map(|k| {
                let pool = complement_without(d, k);
                (0..1usize << others)
                    .map(|bits| {
                        pool.iter()
                            .enumerate()
                            .filter(|(j, _)| bits & (1 << j) != 0)
                            .map(|(_, &f)| f)
                            .collect()
                    })
                    .collect()
            })
            .collect();
        return Ok(SubsetPlan {
            per_feature,
            exhaustive: true,
            seed,
        });
    }

    // Here 2^(d−1) > budget ≥ 1, so d ≥ 3 once the budget is raised to 2 and
    // enough distinct proper subsets exist to fill it.
    let target = budget.max(2);
    let per_feature = (0..d)
        .map(|k| {
            let pool = complement_without(d, k);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
            let mut list = vec![FeatureSet::empty(), pool.iter().copied().collect()];
            let mut seen: std::collections::HashSet<FeatureSet> = list.iter().cloned().collect();
            while list.len() < target {
                let size = rng.random_range(1..=others - 1);
                let set: FeatureSet = index::sample(&mut rng, others, size)
                    .into_iter()
                    .map(|j| pool[j])
                    .collect();
                if seen.insert(set.clone()) {
                    list.push(set);
                }
            }
            list
        })
        .collect();
    Ok(SubsetPlan {
        per_feature,
        exhaustive: false,
        seed,
    })
}

/// Outcome of testing one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTestResult {
    pub feature: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub flagged: bool,
    pub argmax_subset: FeatureSet,
}

impl FeatureTestResult {
    pub fn new(feature: usize, statistic: f64, threshold: f64, argmax_subset: FeatureSet) -> Self {
        Self {
            feature,
            statistic,
            threshold,
            flagged: statistic > threshold,
            argmax_subset,
        }
    }
}

/// Per-sample losses of one model under every subset a plan needs.
///
/// Losses are computed once for a pool of samples; risks of any split of the
/// pool are then sums over indices. This is what makes the bootstrap cheap:
/// predictions do not depend on how samples are assigned to windows.
#[derive(Debug, Clone)]
pub struct SubsetLossTable {
    /// `losses[column][sample]`
    losses: Vec<Vec<f64>>,
    /// For each feature, `(column of S, column of S ∪ {k})` in plan order.
    pairs: Vec<Vec<(usize, usize)>>,
    subsets: Vec<Vec<FeatureSet>>,
    n_samples: usize,
}

impl SubsetLossTable {
    pub fn new(model: &TrainedModel, samples: &[LabeledSample], plan: &SubsetPlan, loss_kind: LossKind) -> Result<Self> {
        if plan.dim() != model.input_dim() {
            return Err(DriftError::Dimensionality {
                expected: model.input_dim(),
                found: plan.dim(),
            });
        }
        let columns = plan.required_subsets();
        let index: HashMap<&FeatureSet, usize> = columns.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let pairs = plan
            .per_feature
            .iter()
            .enumerate()
            .map(|(k, subsets)| {
                subsets
                    .iter()
                    .map(|s| (index[s], index[&s.with(k)]))
                    .collect()
            })
            .collect();
        let losses = columns
            .par_iter()
            .map(|subset| {
                let mut scratch = model.scratch();
                samples
                    .iter()
                    .map(|s| {
                        let pred = model.predict_masked(&s.features, subset, &mut scratch)?;
                        loss(loss_kind, pred, s.target)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            losses,
            pairs,
            subsets: plan.per_feature.clone(),
            n_samples: samples.len(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    /// Mean loss per column over the samples at `indices`, summed in the given order.
    pub fn risks(&self, indices: &[usize]) -> Vec<f64> {
        let n = indices.len() as f64;
        self.losses
            .iter()
            .map(|col| indices.iter().map(|&i| col[i]).sum::<f64>() / n)
            .collect()
    }

    /// `(d̂ᵏ, position of the maximizing subset)` for every feature.
    ///
    /// Ties keep the earliest subset in plan order.
    pub fn d_hat_all(&self, risks_p: &[f64], risks_q: &[f64]) -> Vec<(f64, usize)> {
        self.pairs
            .iter()
            .map(|pairs| {
                let mut best = (0.0f64, 0usize);
                for (pos, &(s, sk)) in pairs.iter().enumerate() {
                    let v = ((risks_p[s] - risks_p[sk]) - (risks_q[s] - risks_q[sk])).abs();
                    if v > best.0 {
                        best = (v, pos);
                    }
                }
                best
            })
            .collect()
    }

    /// The subset at `position` in feature `k`'s plan list.
    pub fn subset(&self, k: usize, position: usize) -> &FeatureSet {
        &self.subsets[k][position]
    }
}

/// Signed difference of risk drops from revealing `k` on top of `subset`.
pub fn delta_term(
    model: &TrainedModel,
    dp: &SampleWindow,
    dq: &SampleWindow,
    subset: &FeatureSet,
    k: usize,
    loss_kind: LossKind,
) -> Result<f64> {
    if subset.contains(k) {
        return Err(DriftError::Protocol(format!("feature {k} must not belong to the subset {subset}")));
    }
    let with_k = subset.with(k);
    let p = subset_risk(model, dp, subset, loss_kind)? - subset_risk(model, dp, &with_k, loss_kind)?;
    let q = subset_risk(model, dq, subset, loss_kind)? - subset_risk(model, dq, &with_k, loss_kind)?;
    Ok(p - q)
}

fn check_feature(plan: &SubsetPlan, k: usize) -> Result<()> {
    plan.subsets(k).map(|_| ())
}

/// `d̂ᵏ` and the subset attaining it.
pub fn d_hat(
    model: &TrainedModel,
    dp: &SampleWindow,
    dq: &SampleWindow,
    k: usize,
    plan: &SubsetPlan,
    loss_kind: LossKind,
) -> Result<(f64, FeatureSet)> {
    check_feature(plan, k)?;
    if dp.is_empty() || dq.is_empty() {
        return Err(DriftError::InsufficientData("both windows must be nonempty".into()));
    }
    let mut pool = dp.samples().to_vec();
    pool.extend_from_slice(dq.samples());
    let table = SubsetLossTable::new(model, &pool, plan, loss_kind)?;
    let p: Vec<usize> = (0..dp.len()).collect();
    let q: Vec<usize> = (dp.len()..pool.len()).collect();
    let (value, pos) = table.d_hat_all(&table.risks(&p), &table.risks(&q))[k];
    Ok((value, table.subset(k, pos).clone()))
}

/// `ĉᵏ = ñ · d̂ᵏ` for two windows of equal size `ñ`.
pub fn test_statistic(
    model: &TrainedModel,
    dp: &SampleWindow,
    dq: &SampleWindow,
    k: usize,
    plan: &SubsetPlan,
    loss_kind: LossKind,
) -> Result<f64> {
    if dp.len() != dq.len() {
        return Err(DriftError::Protocol(format!(
            "windows must have equal size, got {} and {}",
            dp.len(),
            dq.len()
        )));
    }
    Ok(dp.len() as f64 * d_hat(model, dp, dq, k, plan, loss_kind)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TaskKind;
    use crate::model::{fit, ModelSpec};

    #[test]
    fn exhaustive_plan_d3() {
        let plan = build_subset_plan(3, 0, 1).unwrap();
        assert!(plan.is_exhaustive());
        let f0 = plan.subsets(0).unwrap();
        assert_eq!(f0.len(), 4);
        assert_eq!(f0[0], FeatureSet::empty());
        assert_eq!(f0[3], [1, 2].into_iter().collect());
        for k in 0..3 {
            assert!(plan.subsets(k).unwrap().iter().all(|s| !s.contains(k)));
        }
    }

    #[test]
    fn budget_beyond_universe_is_exhaustive() {
        let plan = build_subset_plan(4, 8, 5).unwrap();
        assert!(plan.is_exhaustive());
        assert_eq!(plan, build_subset_plan(4, 0, 5).unwrap());
    }

    #[test]
    fn sampled_plan_d20() {
        let plan = build_subset_plan(20, 64, 7).unwrap();
        assert!(!plan.is_exhaustive());
        for k in 0..20 {
            let subsets = plan.subsets(k).unwrap();
            assert_eq!(subsets.len(), 64);
            assert_eq!(subsets[0], FeatureSet::empty());
            assert_eq!(subsets[1].len(), 19);
            assert!(!subsets[1].contains(k));
            let distinct: std::collections::HashSet<_> = subsets.iter().collect();
            assert_eq!(distinct.len(), subsets.len());
            assert!(subsets.iter().all(|s| !s.contains(k) && s.bound() <= 20));
        }
        assert_eq!(plan, build_subset_plan(20, 64, 7).unwrap());
        assert_ne!(plan, build_subset_plan(20, 64, 8).unwrap());
    }

    #[test]
    fn exhaustive_on_wide_data_is_rejected() {
        assert!(build_subset_plan(40, 0, 0).is_err());
        assert!(build_subset_plan(100, 32, 0).is_ok());
    }

    fn small_windows() -> (TrainedModel, SampleWindow, SampleWindow) {
        let make = |flip: bool, offset: usize| {
            let samples = (0..64)
                .map(|i| {
                    let x = vec![(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64];
                    let mut y = ((i & 1) ^ ((i >> 1) & 1)) | ((i >> 2) & 1);
                    if flip {
                        y = (i & 1) | ((i >> 2) & 1);
                    }
                    LabeledSample::new(x, y as f64)
                })
                .collect();
            SampleWindow::new(samples, offset).unwrap()
        };
        let pre = make(false, 0);
        let post = make(true, 64);
        let model = fit(&pre, &ModelSpec::default(), TaskKind::Classification { classes: 2 }, 3).unwrap();
        (model, pre, post)
    }

    #[test]
    fn identical_windows_give_zero() {
        let (model, pre, _) = small_windows();
        let plan = build_subset_plan(3, 0, 0).unwrap();
        for k in 0..3 {
            let (v, s) = d_hat(&model, &pre, &pre, k, &plan, LossKind::ZeroOne).unwrap();
            assert_eq!(v, 0.0);
            assert_eq!(s, FeatureSet::empty());
            for subset in plan.subsets(k).unwrap() {
                assert_eq!(delta_term(&model, &pre, &pre, subset, k, LossKind::ZeroOne).unwrap(), 0.0);
            }
        }
        let c = test_statistic(&model, &pre, &pre, 0, &plan, LossKind::ZeroOne).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn d1_pair_term_is_nonzero() {
        let (model, pre, post) = small_windows();
        let s: FeatureSet = [0].into_iter().collect();
        // Cube-balanced windows, model exact on the pre-drift rule. Counting
        // the 8 cells: S={x1} predicts x1 (wrong on 4/8 pre, 2/8 post);
        // S∪{x2} predicts x1⊕x2 (wrong on 2/8 pre, 4/8 post).
        // term = (4/8 − 2/8) − (2/8 − 4/8) = 1/2.
        let term = delta_term(&model, &pre, &post, &s, 1, LossKind::ZeroOne).unwrap();
        assert_eq!(term, 0.5);
    }

    #[test]
    fn d_hat_matches_delta_terms() {
        let (model, pre, post) = small_windows();
        let plan = build_subset_plan(3, 0, 0).unwrap();
        for k in 0..3 {
            let (v, s) = d_hat(&model, &pre, &post, k, &plan, LossKind::ZeroOne).unwrap();
            let brute = plan
                .subsets(k)
                .unwrap()
                .iter()
                .map(|s| delta_term(&model, &pre, &post, s, k, LossKind::ZeroOne).unwrap().abs())
                .fold(0.0, f64::max);
            assert_eq!(v, brute);
            assert_eq!(delta_term(&model, &pre, &post, &s, k, LossKind::ZeroOne).unwrap().abs(), v);
        }
    }

    #[test]
    fn statistic_scales_by_window_size() {
        let (model, pre, post) = small_windows();
        let plan = build_subset_plan(3, 0, 0).unwrap();
        let (v, _) = d_hat(&model, &pre, &post, 1, &plan, LossKind::ZeroOne).unwrap();
        let c = test_statistic(&model, &pre, &post, 1, &plan, LossKind::ZeroOne).unwrap();
        assert_eq!(c, 64.0 * v);
        let short = pre.prefix(10).unwrap();
        assert!(matches!(
            test_statistic(&model, &short, &post, 1, &plan, LossKind::ZeroOne),
            Err(DriftError::Protocol(_))
        ));
    }

    #[test]
    fn delta_term_rejects_k_in_subset() {
        let (model, pre, post) = small_windows();
        let s: FeatureSet = [1].into_iter().collect();
        assert!(delta_term(&model, &pre, &post, &s, 1, LossKind::ZeroOne).is_err());
    }

    #[test]
    fn ignored_feature_contributes_nothing() {
        // a model with zero weights on every input ignores all features
        let model = TrainedModel::constant_classifier(3, 2, 1);
        let (_, pre, post) = small_windows();
        let plan = build_subset_plan(3, 0, 0).unwrap();
        for k in 0..3 {
            for s in plan.subsets(k).unwrap() {
                assert_eq!(delta_term(&model, &pre, &post, s, k, LossKind::ZeroOne).unwrap(), 0.0);
            }
        }
    }
}
