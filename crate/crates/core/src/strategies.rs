//! Model-update strategies over a periodized dataset: sliding-window and
//! full-history retraining, and the SEA and AWE time-based ensembles.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Period, PeriodizedDataset};
use crate::error::{Error, Result};
use crate::learners::{HyperparamSet, LearnerKind};
use crate::matrix::Matrix;
use crate::metrics::mse;
use crate::seed::rng;
use crate::training::{train_model, ScaledModel, SeedPolicy, TrainOptions};

/// MSE of a predictor that outputs 0.5 everywhere.
pub const RANDOM_MSE: f64 = 0.25;
pub const AWE_FOLDS: usize = 10;
/// Probability above which a SEA member votes positive.
pub const VOTE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    SlidingWindow,
    FullHistory,
    Sea,
    Awe,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::SlidingWindow,
        StrategyKind::FullHistory,
        StrategyKind::Sea,
        StrategyKind::Awe,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            StrategyKind::SlidingWindow => "SW",
            StrategyKind::FullHistory => "FH",
            StrategyKind::Sea => "SEA",
            StrategyKind::Awe => "AWE",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::SlidingWindow => "sliding_window",
            StrategyKind::FullHistory => "full_history",
            StrategyKind::Sea => "sea",
            StrategyKind::Awe => "awe",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sw" | "sliding_window" => Ok(StrategyKind::SlidingWindow),
            "fh" | "full_history" => Ok(StrategyKind::FullHistory),
            "sea" => Ok(StrategyKind::Sea),
            "awe" => Ok(StrategyKind::Awe),
            other => Err(Error::InvalidArgument(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Sea,
    Awe,
}

impl EnsembleKind {
    fn name(self) -> &'static str {
        match self {
            EnsembleKind::Sea => "SEA",
            EnsembleKind::Awe => "AWE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub model: ScaledModel,
    pub trained_on_period: usize,
    /// Unused by SEA.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub kind: EnsembleKind,
    pub capacity: usize,
    pub members: Vec<Member>,
}

/// Audit view of one ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSummary {
    pub learner: LearnerKind,
    pub hyperparams: HyperparamSet,
    pub trained_on_period: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub kind: EnsembleKind,
    pub capacity: usize,
    pub members: Vec<MemberSummary>,
}

impl Ensemble {
    pub fn new(kind: EnsembleKind, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("ensemble capacity must be >= 1".into()));
        }
        Ok(Self {
            kind,
            capacity,
            members: Vec::new(),
        })
    }

    /// Half the number of periods, rounded down.
    pub fn default_capacity(n_periods: usize) -> usize {
        n_periods / 2
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn summary(&self) -> EnsembleSummary {
        EnsembleSummary {
            kind: self.kind,
            capacity: self.capacity,
            members: self
                .members
                .iter()
                .map(|m| MemberSummary {
                    learner: m.model.kind(),
                    hyperparams: m.model.model.hyperparams.clone(),
                    trained_on_period: m.trained_on_period,
                    weight: m.weight,
                })
                .collect(),
        }
    }

    fn expect_kind(&self, kind: EnsembleKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                expected: kind.name(),
                actual: self.kind.name(),
            })
        }
    }
}

/// How member and retrained models are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub policy: SeedPolicy,
    pub options: TrainOptions,
}

impl LearnerSpec {
    fn train(&self, data: &Period, base: u64) -> Result<ScaledModel> {
        train_model(
            self.kind,
            data,
            &self.policy.resolve(base),
            crate::seed!(base, "downsample"),
            &self.options,
        )
    }
}

fn window(dataset: &PeriodizedDataset) -> usize {
    dataset.n_periods() / 2
}

/// The `⌊n/2⌋` periods immediately before `target_period`.
pub fn sliding_window_train_set(dataset: &PeriodizedDataset, target_period: usize) -> Result<Period> {
    let w = window(dataset);
    if w == 0 || target_period < w || target_period > dataset.n_periods() {
        return Err(Error::InsufficientHistory(format!(
            "sliding window of {w} periods cannot precede period {target_period}"
        )));
    }
    concat_periods(dataset, target_period - w, target_period)
}

/// Every period before `target_period`.
pub fn full_history_train_set(dataset: &PeriodizedDataset, target_period: usize) -> Result<Period> {
    if target_period == 0 || target_period > dataset.n_periods() {
        return Err(Error::InsufficientHistory(format!(
            "no history precedes period {target_period}"
        )));
    }
    concat_periods(dataset, 0, target_period)
}

fn concat_periods(dataset: &PeriodizedDataset, start: usize, end: usize) -> Result<Period> {
    let parts: Vec<&Period> = dataset.periods[start..end].iter().collect();
    Period::concat(&parts, end - 1)
}

fn model_mse(model: &ScaledModel, period: &Period) -> Result<f64> {
    mse(&model.predict_proba(&period.features)?, &period.labels)
}

/// Adds `previous` while there is room; otherwise it replaces the member with
/// the highest MSE on `new_period` if its own MSE is strictly lower.
pub fn sea_update(mut ensemble: Ensemble, previous: Member, new_period: &Period) -> Result<Ensemble> {
    ensemble.expect_kind(EnsembleKind::Sea)?;
    if ensemble.members.len() < ensemble.capacity {
        ensemble.members.push(previous);
        return Ok(ensemble);
    }
    let candidate = model_mse(&previous.model, new_period)?;
    let mut worst: Option<(usize, f64)> = None;
    for (i, m) in ensemble.members.iter().enumerate() {
        let e = model_mse(&m.model, new_period)?;
        if worst.is_none_or(|(_, w)| e > w) {
            worst = Some((i, e));
        }
    }
    if let Some((i, worst_mse)) = worst {
        if candidate < worst_mse {
            ensemble.members[i] = previous;
        }
    }
    Ok(ensemble)
}

/// Stratified assignment of rows to `k` folds.
fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Vec<usize> {
    let mut fold = vec![0; labels.len()];
    let mut r = rng(seed);
    let mut offset = 0;
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rows.shuffle(&mut r);
        for (j, &i) in rows.iter().enumerate() {
            fold[i] = (offset + j) % k;
        }
        offset += rows.len();
    }
    fold
}

/// Mean held-out MSE over stratified folds of `period`.
fn cross_validated_mse(spec: &LearnerSpec, period: &Period, base: u64) -> Result<f64> {
    let minority = period.positives().min(period.negatives());
    if minority < 2 {
        return Err(Error::SingleClass(format!(
            "cross-validation on period {} needs at least two rows of each class",
            period.period_index
        )));
    }
    let k = AWE_FOLDS.min(minority);
    let folds = stratified_folds(&period.labels, k, crate::seed!(base, "folds"));
    let mut total = 0.0;
    for f in 0..k {
        let train_rows: Vec<usize> = (0..period.len()).filter(|&i| folds[i] != f).collect();
        let test_rows: Vec<usize> = (0..period.len()).filter(|&i| folds[i] == f).collect();
        let model = spec.train(&period.select_rows(&train_rows), crate::seed!(base, "fold", f))?;
        total += model_mse(&model, &period.select_rows(&test_rows))?;
    }
    Ok(total / k as f64)
}

/// Trains a model on period `new_period_index`, reweights every model by
/// `0.25 - MSE`, drops non-positive weights and keeps the `capacity` best.
/// The new model's MSE is cross-validated; members are scored on the period.
pub fn awe_update(
    ensemble: Ensemble,
    dataset: &PeriodizedDataset,
    new_period_index: usize,
    spec: &LearnerSpec,
    seed: u64,
) -> Result<Ensemble> {
    ensemble.expect_kind(EnsembleKind::Awe)?;
    let period = dataset.period(new_period_index)?;
    period.require_both_classes("AWE update needs both classes in the new period")?;
    let base = crate::seed!(seed, "period", new_period_index);
    let model = spec.train(period, base)?;
    let new_mse = cross_validated_mse(spec, period, base)?;
    let mut scored = Vec::with_capacity(ensemble.members.len() + 1);
    for m in ensemble.members {
        let e = model_mse(&m.model, period)?;
        scored.push((m, e));
    }
    scored.push((
        Member {
            model,
            trained_on_period: new_period_index,
            weight: 0.0,
        },
        new_mse,
    ));
    Ok(Ensemble {
        kind: EnsembleKind::Awe,
        capacity: ensemble.capacity,
        members: reweight_and_prune(scored, ensemble.capacity),
    })
}

/// Sets `w = 0.25 - MSE`, removes `w <= 0`, then keeps the `capacity`
/// heaviest (earlier members win ties).
pub fn reweight_and_prune(scored: Vec<(Member, f64)>, capacity: usize) -> Vec<Member> {
    let mut kept: Vec<Member> = scored
        .into_iter()
        .filter_map(|(mut m, e)| {
            m.weight = RANDOM_MSE - e;
            (m.weight > 0.0).then_some(m)
        })
        .collect();
    if kept.len() > capacity {
        let mut order: Vec<usize> = (0..kept.len()).collect();
        order.sort_by(|&a, &b| kept[b].weight.total_cmp(&kept[a].weight).then(a.cmp(&b)));
        let mut keep = vec![false; kept.len()];
        for &i in &order[..capacity] {
            keep[i] = true;
        }
        let mut i = 0;
        kept.retain(|_| {
            i += 1;
            keep[i - 1]
        });
    }
    kept
}

/// SEA: fraction of members voting positive. AWE: weight-normalized mean.
pub fn ensemble_predict(ensemble: &Ensemble, features: &Matrix) -> Result<Vec<f64>> {
    if ensemble.members.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut out = vec![0.0; features.rows()];
    match ensemble.kind {
        EnsembleKind::Sea => {
            for m in &ensemble.members {
                for (o, p) in out.iter_mut().zip(m.model.predict_proba(features)?) {
                    if p > VOTE_THRESHOLD {
                        *o += 1.0;
                    }
                }
            }
            let n = ensemble.members.len() as f64;
            out.iter_mut().for_each(|o| *o /= n);
        }
        EnsembleKind::Awe => {
            let total: f64 = ensemble.members.iter().map(|m| m.weight).sum();
            if !(total > 0.0) {
                return Err(Error::EmptyEnsemble);
            }
            for m in &ensemble.members {
                for (o, p) in out.iter_mut().zip(m.model.predict_proba(features)?) {
                    *o += m.weight * p;
                }
            }
            out.iter_mut().for_each(|o| *o = (*o / total).clamp(0.0, 1.0));
        }
    }
    Ok(out)
}

/// A model produced by a strategy: one retrained model or an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StrategyModel {
    Single(ScaledModel),
    Ensemble(Ensemble),
}

impl StrategyModel {
    pub fn predict_proba(&self, features: &Matrix) -> Result<Vec<f64>> {
        match self {
            StrategyModel::Single(m) => m.predict_proba(features),
            StrategyModel::Ensemble(e) => ensemble_predict(e, features),
        }
    }

    /// Hyperparameters of a single model, or of the newest ensemble member.
    pub fn hyperparams(&self) -> Option<&HyperparamSet> {
        match self {
            StrategyModel::Single(m) => Some(&m.model.hyperparams),
            StrategyModel::Ensemble(e) => e
                .members
                .iter()
                .max_by_key(|m| m.trained_on_period)
                .map(|m| &m.model.model.hyperparams),
        }
    }
}

fn check_target(dataset: &PeriodizedDataset, target_period: usize) -> Result<()> {
    let w = window(dataset);
    if w == 0 || target_period < w || target_period > dataset.n_periods() {
        return Err(Error::InsufficientHistory(format!(
            "strategies need target period in {w}..={}, got {target_period}",
            dataset.n_periods()
        )));
    }
    Ok(())
}

/// The model a strategy offers for predicting `target_period`, trained on
/// periods before it. Deterministic given `seed`.
pub fn run_strategy(
    kind: StrategyKind,
    dataset: &PeriodizedDataset,
    spec: &LearnerSpec,
    target_period: usize,
    seed: u64,
) -> Result<StrategyModel> {
    let mut out = run_strategy_snapshots(kind, dataset, spec, &[target_period], seed, None)?;
    Ok(out.pop().expect("one target"))
}

/// Same as [`run_strategy`] for several targets at once. Ensembles are
/// folded forward a single time and copied at each target, which gives the
/// same models as separate calls. `capacity` overrides `⌊n/2⌋`.
pub fn run_strategy_snapshots(
    kind: StrategyKind,
    dataset: &PeriodizedDataset,
    spec: &LearnerSpec,
    targets: &[usize],
    seed: u64,
    capacity: Option<usize>,
) -> Result<Vec<StrategyModel>> {
    for &t in targets {
        check_target(dataset, t)?;
    }
    let capacity = capacity.unwrap_or_else(|| Ensemble::default_capacity(dataset.n_periods()));
    match kind {
        StrategyKind::SlidingWindow | StrategyKind::FullHistory => targets
            .iter()
            .map(|&t| {
                let data = if kind == StrategyKind::SlidingWindow {
                    sliding_window_train_set(dataset, t)?
                } else {
                    full_history_train_set(dataset, t)?
                };
                Ok(StrategyModel::Single(
                    spec.train(&data, crate::seed!(seed, "target", t))?,
                ))
            })
            .collect(),
        StrategyKind::Sea | StrategyKind::Awe => {
            let last = targets.iter().copied().max().unwrap_or(0);
            let ens_kind = if kind == StrategyKind::Sea {
                EnsembleKind::Sea
            } else {
                EnsembleKind::Awe
            };
            let mut ensemble = Ensemble::new(ens_kind, capacity)?;
            let mut snapshots: Vec<Option<Ensemble>> = vec![None; last + 1];
            let mut previous: Option<Member> = None;
            for i in 0..last {
                let period = dataset.period(i)?;
                ensemble = match ens_kind {
                    EnsembleKind::Sea => {
                        let model = spec.train(period, crate::seed!(seed, "period", i))?;
                        let current = Member {
                            model,
                            trained_on_period: i,
                            weight: 1.0,
                        };
                        match previous.replace(current) {
                            Some(prev) => sea_update(ensemble, prev, period)?,
                            None => ensemble,
                        }
                    }
                    EnsembleKind::Awe => awe_update(ensemble, dataset, i, spec, seed)?,
                };
                snapshots[i + 1] = Some(ensemble.clone());
            }
            targets
                .iter()
                .map(|&t| {
                    let e = snapshots[t].clone().expect("target within folded range");
                    if e.is_empty() {
                        Err(Error::EmptyEnsemble)
                    } else {
                        Ok(StrategyModel::Ensemble(e))
                    }
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Scaler;
    use crate::learners::{default_hyperparams, FittedModel, LogisticState, ModelState};

    /// A model that predicts a constant probability on one feature.
    fn constant_model(p: f64) -> ScaledModel {
        let z = (p / (1.0 - p)).ln();
        ScaledModel {
            scaler: Scaler {
                mean: vec![0.0],
                std: vec![1.0],
            },
            model: FittedModel {
                kind: LearnerKind::LogisticRegression,
                hyperparams: default_hyperparams(LearnerKind::LogisticRegression),
                feature_count: 1,
                state: ModelState::Logistic(LogisticState {
                    weights: vec![0.0],
                    intercept: z,
                    iterations: 0,
                }),
            },
        }
    }

    fn member(p: f64, period: usize) -> Member {
        Member {
            model: constant_model(p),
            trained_on_period: period,
            weight: 1.0,
        }
    }

    fn tiny_dataset(n: usize) -> PeriodizedDataset {
        let periods = (0..n)
            .map(|t| {
                let rows: Vec<[f64; 1]> = (0..(t + 2)).map(|i| [i as f64]).collect();
                let labels = (0..(t + 2)).map(|i| u8::from(i % 2 == 0)).collect();
                Period::new(t, Matrix::from_rows(&rows).unwrap(), labels).unwrap()
            })
            .collect();
        PeriodizedDataset::new(vec!["x".into()], periods).unwrap()
    }

    #[test]
    fn window_arithmetic() {
        let d = tiny_dataset(28);
        let sw = sliding_window_train_set(&d, 27).unwrap();
        let expected: usize = (13..27).map(|t| t + 2).sum();
        assert_eq!(sw.len(), expected);
        let fh = full_history_train_set(&d, 27).unwrap();
        assert_eq!(fh.len(), (0..27).map(|t| t + 2).sum::<usize>());
        let d4 = tiny_dataset(4);
        assert_eq!(sliding_window_train_set(&d4, 2).unwrap().len(), 2 + 3);
        assert!(sliding_window_train_set(&d4, 1).is_err());
        assert!(full_history_train_set(&d4, 0).is_err());
        assert_eq!(full_history_train_set(&d4, 1).unwrap().len(), 2);
    }

    #[test]
    fn sea_appends_then_replaces_worst() {
        // Labels all 1: a constant model's MSE is (1 - p)^2.
        let p = Period::new(0, Matrix::from_rows(&[[0.0], [1.0]]).unwrap(), vec![1, 1]).unwrap();
        let e = Ensemble::new(EnsembleKind::Sea, 3).unwrap();
        let e = sea_update(e, member(0.9, 0), &p).unwrap();
        assert_eq!(e.len(), 1);

        let full = Ensemble {
            kind: EnsembleKind::Sea,
            capacity: 2,
            members: vec![member(1.0 - 0.10f64.sqrt(), 0), member(1.0 - 0.20f64.sqrt(), 1)],
        };
        let replaced = sea_update(full.clone(), member(1.0 - 0.15f64.sqrt(), 2), &p).unwrap();
        let periods: Vec<usize> = replaced.members.iter().map(|m| m.trained_on_period).collect();
        assert_eq!(periods, vec![0, 2]);
        let unchanged = sea_update(full.clone(), member(0.01, 3), &p).unwrap();
        assert_eq!(unchanged, full);
    }

    #[test]
    fn sea_rejects_awe_ensemble() {
        let p = Period::new(0, Matrix::from_rows(&[[0.0]]).unwrap(), vec![1]).unwrap();
        let e = Ensemble::new(EnsembleKind::Awe, 2).unwrap();
        assert!(matches!(
            sea_update(e, member(0.5, 0), &p),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn awe_weights_and_pruning() {
        let kept = reweight_and_prune(vec![(member(0.5, 0), 0.10), (member(0.5, 1), 0.30)], 5);
        assert_eq!(kept.len(), 1);
        assert!((kept[0].weight - 0.15).abs() < 1e-15);
        let none = reweight_and_prune(vec![(member(0.5, 0), 0.25), (member(0.5, 1), 0.25)], 5);
        assert!(none.is_empty());
        let capped = reweight_and_prune(
            vec![(member(0.5, 0), 0.2), (member(0.5, 1), 0.05), (member(0.5, 2), 0.1)],
            2,
        );
        let periods: Vec<usize> = capped.iter().map(|m| m.trained_on_period).collect();
        assert_eq!(periods, vec![1, 2]);
    }

    #[test]
    fn ensemble_prediction_rules() {
        let x = Matrix::from_rows(&[[0.0]]).unwrap();
        let sea = Ensemble {
            kind: EnsembleKind::Sea,
            capacity: 3,
            members: vec![member(0.9, 0), member(0.7, 1), member(0.2, 2)],
        };
        assert!((ensemble_predict(&sea, &x).unwrap()[0] - 2.0 / 3.0).abs() < 1e-15);
        let mut a = member(0.8, 0);
        a.weight = 0.15;
        let mut b = member(0.2, 1);
        b.weight = 0.05;
        let awe = Ensemble {
            kind: EnsembleKind::Awe,
            capacity: 3,
            members: vec![a, b],
        };
        assert!((ensemble_predict(&awe, &x).unwrap()[0] - 0.65).abs() < 1e-12);
        let empty = Ensemble::new(EnsembleKind::Sea, 1).unwrap();
        assert!(matches!(ensemble_predict(&empty, &x), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn strategy_names_parse() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
            assert_eq!(k.short_name().parse::<StrategyKind>().unwrap(), k);
        }
    }
}
