//! Time consistency: how well the interpretation of a model built with each
//! update strategy matches per-period ground-truth interpretations.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::PeriodizedDataset;
use crate::error::Result;
use crate::learners::LearnerKind;
use crate::matrix::Matrix;
use crate::metrics::{agreement_label, auc, kendalls_tau};
use crate::pipeline::report::{num, opt_num, ReportBundle, Table};
use crate::pipeline::rq2::ALPHA;
use crate::pipeline::{argmax, evaluate, require_periods, Evaluation, ExperimentConfig};
use crate::stats::{
    apply_bonferroni, cliffs_delta, kruskal_wallis, wilcoxon_rank_sum, Alternative, Magnitude, TestResult,
};
use crate::strategies::{run_strategy_snapshots, LearnerSpec, StrategyKind, StrategyModel};
use crate::training::{train_model, ScaledModel, SeedPolicy};

/// Training periods (0-based) whose ground truth is extracted: from
/// `⌊n/2⌋ - 1` to `n - 2`, i.e. `n - ⌊n/2⌋` periods. Each is scored on the
/// period after it.
pub fn ground_truth_periods(n_periods: usize) -> RangeInclusive<usize> {
    (n_periods / 2).saturating_sub(1)..=n_periods.saturating_sub(2)
}

/// Strategies compared against every other strategy in the pairwise tables.
pub const REFERENCE_STRATEGIES: [StrategyKind; 2] = [StrategyKind::SlidingWindow, StrategyKind::FullHistory];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    SinglePeriod,
    Strategy(StrategyKind),
}

impl CandidateSource {
    fn label(self) -> String {
        match self {
            CandidateSource::SinglePeriod => "single_period".into(),
            CandidateSource::Strategy(s) => s.name().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub source: CandidateSource,
    pub learner: LearnerKind,
    pub iteration: usize,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestModel {
    pub strategy: StrategyKind,
    pub learner: LearnerKind,
    pub iteration: usize,
    pub evaluation: Evaluation,
    /// Hyperparameters or ensemble membership, for auditing.
    pub summary: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub train_period: usize,
    pub best: Candidate,
    pub candidates: usize,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauScore {
    pub strategy: StrategyKind,
    pub train_period: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub reference: StrategyKind,
    pub compared: StrategyKind,
    pub test: TestResult,
    pub cliffs_d: f64,
    pub magnitude: Magnitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq3Report {
    pub test_models: Vec<TestModel>,
    pub ground_truths: Vec<GroundTruth>,
    /// Every candidate AUC, grouped by ground-truth period in order.
    pub candidates: Vec<(usize, Vec<Candidate>)>,
    pub taus: Vec<TauScore>,
    pub kruskal: TestResult,
    pub comparisons: Vec<StrategyComparison>,
    pub feature_names: Vec<String>,
}

impl Rq3Report {
    pub fn taus_for(&self, strategy: StrategyKind) -> Vec<f64> {
        self.taus
            .iter()
            .filter(|t| t.strategy == strategy)
            .map(|t| t.tau)
            .collect()
    }

    pub fn mean_tau(&self, strategy: StrategyKind) -> f64 {
        let v = self.taus_for(strategy);
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn summarize(model: &StrategyModel) -> Value {
    match model {
        StrategyModel::Single(m) => serde_json::json!({"hyperparams": m.model.hyperparams}),
        StrategyModel::Ensemble(e) => serde_json::to_value(e.summary()).unwrap_or(Value::Null),
    }
}

struct StrategyRun {
    strategy: StrategyKind,
    learner: LearnerKind,
    iteration: usize,
    /// One model per target period `⌊n/2⌋..=n-1`, with its AUC on that target.
    snapshots: Vec<(StrategyModel, f64)>,
}

enum CandidateModel<'a> {
    Single(&'a ScaledModel),
    Strategy(&'a StrategyModel),
}

impl CandidateModel<'_> {
    fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            CandidateModel::Single(m) => m.predict_proba(x),
            CandidateModel::Strategy(m) => m.predict_proba(x),
        }
    }
}

struct SingleRun {
    train_period: usize,
    learner: LearnerKind,
    iteration: usize,
    model: ScaledModel,
    auc: f64,
}

/// Test-model generation, ground-truth extraction and interpretation
/// comparison over the four update strategies.
pub fn run_rq3(config: &ExperimentConfig, dataset: &PeriodizedDataset) -> Result<Rq3Report> {
    config.validate()?;
    require_periods(dataset, 4, "time consistency")?;
    let n = dataset.n_periods();
    let master = config.master_seed;
    let options = config.train_options();
    let targets: Vec<usize> = (n / 2..n).collect();
    let gt_periods: Vec<usize> = ground_truth_periods(n).collect();

    let strategy_jobs: Vec<(StrategyKind, LearnerKind, usize)> = StrategyKind::ALL
        .iter()
        .flat_map(|&s| {
            config
                .learners
                .iter()
                .flat_map(move |&l| (0..config.iterations).map(move |i| (s, l, i)))
        })
        .collect();
    let strategy_runs = strategy_jobs
        .par_iter()
        .map(|&(strategy, learner, iteration)| {
            let spec = LearnerSpec {
                kind: learner,
                policy: SeedPolicy::bootstrap_defaults(),
                options,
            };
            let seed = crate::seed!(master, "rq3", strategy.name(), learner.name(), iteration);
            let models = run_strategy_snapshots(strategy, dataset, &spec, &targets, seed, config.ensemble_capacity)?;
            let snapshots = models
                .into_iter()
                .zip(&targets)
                .map(|(m, &t)| {
                    let p = &dataset.periods[t];
                    let a = auc(&p.labels, &m.predict_proba(&p.features)?)?;
                    Ok((m, a))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(StrategyRun {
                strategy,
                learner,
                iteration,
                snapshots,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let single_jobs: Vec<(usize, LearnerKind, usize)> = gt_periods
        .iter()
        .flat_map(|&t| {
            config
                .learners
                .iter()
                .flat_map(move |&l| (0..config.iterations).map(move |i| (t, l, i)))
        })
        .collect();
    let single_runs = single_jobs
        .par_iter()
        .map(|&(t, learner, iteration)| {
            let base = crate::seed!(master, "rq3", "single", learner.name(), t, iteration);
            let seeds = SeedPolicy::uncontrolled().resolve(base);
            let model = train_model(
                learner,
                &dataset.periods[t],
                &seeds,
                config.downsample_seed(t),
                &options,
            )?;
            let next = &dataset.periods[t + 1];
            let a = auc(&next.labels, &model.predict_proba(&next.features)?)?;
            Ok(SingleRun {
                train_period: t,
                learner,
                iteration,
                model,
                auc: a,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Step 1: the best model of each strategy on the last period.
    let last = targets.len() - 1;
    let test_models = StrategyKind::ALL
        .par_iter()
        .map(|&strategy| {
            let runs: Vec<&StrategyRun> = strategy_runs.iter().filter(|r| r.strategy == strategy).collect();
            let best = runs[argmax(runs.iter().map(|r| r.snapshots[last].1)).expect("non-empty runs")];
            let model = &best.snapshots[last].0;
            Ok(TestModel {
                strategy,
                learner: best.learner,
                iteration: best.iteration,
                evaluation: evaluate(|x| model.predict_proba(x), &dataset.periods[n - 1], config)?,
                summary: summarize(model),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Step 2: the best candidate per ground-truth period.
    let per_period = gt_periods
        .par_iter()
        .map(|&t| {
            let slot = t + 1 - targets[0];
            let mut candidates = Vec::new();
            let mut models: Vec<CandidateModel<'_>> = Vec::new();
            for r in single_runs.iter().filter(|r| r.train_period == t) {
                candidates.push(Candidate {
                    source: CandidateSource::SinglePeriod,
                    learner: r.learner,
                    iteration: r.iteration,
                    auc: r.auc,
                });
                models.push(CandidateModel::Single(&r.model));
            }
            for r in &strategy_runs {
                candidates.push(Candidate {
                    source: CandidateSource::Strategy(r.strategy),
                    learner: r.learner,
                    iteration: r.iteration,
                    auc: r.snapshots[slot].1,
                });
                models.push(CandidateModel::Strategy(&r.snapshots[slot].0));
            }
            let b = argmax(candidates.iter().map(|c| c.auc)).expect("non-empty candidate pool");
            let evaluation = evaluate(|x| models[b].predict_proba(x), &dataset.periods[t + 1], config)?;
            Ok((
                GroundTruth {
                    train_period: t,
                    best: candidates[b].clone(),
                    candidates: candidates.len(),
                    evaluation,
                },
                (t, candidates),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (ground_truths, candidates): (Vec<_>, Vec<_>) = per_period.into_iter().unzip();

    // Step 3: Kendall's tau against every ground truth, then tests.
    let mut taus = Vec::new();
    for tm in &test_models {
        for gt in &ground_truths {
            let (tau, _) = kendalls_tau(&tm.evaluation.ranking, &gt.evaluation.ranking)?;
            taus.push(TauScore {
                strategy: tm.strategy,
                train_period: gt.train_period,
                tau,
            });
        }
    }
    let groups: Vec<Vec<f64>> = StrategyKind::ALL
        .iter()
        .map(|&s| taus.iter().filter(|t| t.strategy == s).map(|t| t.tau).collect())
        .collect();
    let group_refs: Vec<&[f64]> = groups.iter().map(|g| g.as_slice()).collect();
    let kruskal = kruskal_wallis(&group_refs)?;

    let mut comparisons = Vec::new();
    for reference in REFERENCE_STRATEGIES {
        let ri = StrategyKind::ALL
            .iter()
            .position(|&s| s == reference)
            .expect("known strategy");
        let mut family = Vec::new();
        for (ci, &compared) in StrategyKind::ALL.iter().enumerate() {
            if compared == reference {
                continue;
            }
            let test = wilcoxon_rank_sum(&groups[ri], &groups[ci], Alternative::Greater)?;
            let effect = cliffs_delta(&groups[ri], &groups[ci])?;
            family.push(StrategyComparison {
                reference,
                compared,
                test,
                cliffs_d: effect.d,
                magnitude: effect.magnitude,
            });
        }
        let mut tests: Vec<TestResult> = family.iter().map(|c| c.test).collect();
        apply_bonferroni(&mut tests);
        for (c, t) in family.iter_mut().zip(tests) {
            c.test = t;
        }
        comparisons.extend(family);
    }

    Ok(Rq3Report {
        test_models,
        ground_truths,
        candidates,
        taus,
        kruskal,
        comparisons,
        feature_names: dataset.feature_names.clone(),
    })
}

impl Rq3Report {
    pub fn to_bundle(&self) -> ReportBundle {
        let mut test_models = Table::new("rq3_test_models.csv", &["strategy", "learner", "iteration", "auc"]);
        for t in &self.test_models {
            test_models.push(vec![
                t.strategy.name().to_string(),
                t.learner.name().to_string(),
                t.iteration.to_string(),
                num(t.evaluation.auc),
            ]);
        }

        let mut gts = Table::new(
            "rq3_ground_truth.csv",
            &[
                "train_period",
                "eval_period",
                "source",
                "learner",
                "iteration",
                "auc",
                "candidates",
            ],
        );
        for g in &self.ground_truths {
            gts.push(vec![
                g.train_period.to_string(),
                (g.train_period + 1).to_string(),
                g.best.source.label(),
                g.best.learner.name().to_string(),
                g.best.iteration.to_string(),
                num(g.evaluation.auc),
                g.candidates.to_string(),
            ]);
        }

        let mut cands = Table::new(
            "rq3_candidates.csv",
            &["train_period", "source", "learner", "iteration", "auc"],
        );
        for (t, list) in &self.candidates {
            for c in list {
                cands.push(vec![
                    t.to_string(),
                    c.source.label(),
                    c.learner.name().to_string(),
                    c.iteration.to_string(),
                    num(c.auc),
                ]);
            }
        }

        let mut tau = Table::new("rq3_tau.csv", &["strategy", "train_period", "tau", "agreement"]);
        for t in &self.taus {
            tau.push(vec![
                t.strategy.name().to_string(),
                t.train_period.to_string(),
                num(t.tau),
                agreement_label(t.tau).to_string(),
            ]);
        }

        let mut kw = Table::new("rq3_kruskal_wallis.csv", &["statistic", "df", "p_value", "significant"]);
        kw.push(vec![
            num(self.kruskal.statistic),
            (StrategyKind::ALL.len() - 1).to_string(),
            num(self.kruskal.p_value),
            (self.kruskal.p_value < ALPHA).to_string(),
        ]);

        let mut sim = Table::new(
            "rq3_similarity.csv",
            &[
                "reference",
                "compared",
                "statistic",
                "p_value",
                "corrected_p",
                "significant",
                "cliffs_d",
                "magnitude",
            ],
        );
        for c in &self.comparisons {
            sim.push(vec![
                c.reference.short_name().to_string(),
                c.compared.short_name().to_string(),
                num(c.test.statistic),
                num(c.test.p_value),
                opt_num(c.test.corrected_p),
                c.test.corrected_p.is_some_and(|p| p < ALPHA).to_string(),
                num(c.cliffs_d),
                c.magnitude.abbreviation().to_string(),
            ]);
        }

        let mut imp = Table::new("rq3_importance.csv", &["role", "name", "feature", "importance", "rank"]);
        let mut push_eval = |role: &str, name: String, e: &Evaluation| {
            for (j, f) in self.feature_names.iter().enumerate() {
                imp.push(vec![
                    role.to_string(),
                    name.clone(),
                    f.clone(),
                    num(e.scores.values[j]),
                    num(e.ranking.0[j]),
                ]);
            }
        };
        for t in &self.test_models {
            push_eval("test_model", t.strategy.name().to_string(), &t.evaluation);
        }
        for g in &self.ground_truths {
            push_eval("ground_truth", g.train_period.to_string(), &g.evaluation);
        }

        let summaries: Vec<Value> = self
            .test_models
            .iter()
            .map(|t| {
                serde_json::json!({
                    "strategy": t.strategy,
                    "learner": t.learner,
                    "iteration": t.iteration,
                    "model": t.summary,
                })
            })
            .collect();

        ReportBundle {
            tables: vec![test_models, gts, cands, tau, kw, sim, imp],
            documents: vec![("rq3_test_models.json".into(), Value::Array(summaries))],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_truth_period_count() {
        assert_eq!(ground_truth_periods(28).count(), 14);
        assert_eq!(ground_truth_periods(28), 13..=26);
        assert_eq!(ground_truth_periods(4), 1..=2);
        assert_eq!(ground_truth_periods(6), 2..=4);
        assert_eq!(ground_truth_periods(7).count(), 4);
    }
}
