//! Internal consistency under controlled randomness: four experiments that
//! each leave one source of randomness (or none) uncontrolled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::breaks::median;
use crate::data::PeriodizedDataset;
use crate::error::Result;
use crate::learners::LearnerKind;
use crate::metrics::{agreement_label, kendalls_w, top_k_overlap};
use crate::pipeline::report::{num, ReportBundle, Table};
use crate::pipeline::{evaluate, require_periods, Evaluation, ExperimentConfig};
use crate::training::{train_model, SeedPolicy};

/// 1: learner seed free. 2: search seed free. 3: bootstrap free. 4: all fixed.
pub const EXPERIMENTS: [u8; 4] = [1, 2, 3, 4];

/// Agreement among the iterations of one learner on one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyCell {
    pub experiment: u8,
    pub learner: LearnerKind,
    pub train_period: usize,
    pub kendalls_w: f64,
    /// `(k, overlap)` for each configured `k`.
    pub top_k_overlap: Vec<(usize, f64)>,
    pub aucs: Vec<f64>,
    pub evaluations: Vec<Evaluation>,
}

impl ConsistencyCell {
    pub fn overlap(&self, k: usize) -> Option<f64> {
        self.top_k_overlap.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq1Report {
    pub cells: Vec<ConsistencyCell>,
    pub feature_names: Vec<String>,
}

impl Rq1Report {
    pub fn cells_for(&self, experiment: u8, learner: LearnerKind) -> impl Iterator<Item = &ConsistencyCell> {
        self.cells
            .iter()
            .filter(move |c| c.experiment == experiment && c.learner == learner)
    }

    /// Median Kendall's W over the periods of one experiment and learner.
    pub fn median_w(&self, experiment: u8, learner: LearnerKind) -> f64 {
        let ws: Vec<f64> = self.cells_for(experiment, learner).map(|c| c.kendalls_w).collect();
        median(&ws)
    }
}

/// Trains `iterations` models per (experiment, learner, period), scores each
/// on the following period and measures agreement among their rankings.
pub fn run_rq1(config: &ExperimentConfig, dataset: &PeriodizedDataset) -> Result<Rq1Report> {
    config.validate()?;
    require_periods(dataset, 2, "internal consistency")?;
    let options = config.train_options();
    let master = config.master_seed;
    let mut groups = Vec::new();
    for &experiment in &config.experiments {
        for &learner in &config.learners {
            for t in 0..dataset.n_periods() - 1 {
                groups.push((experiment, learner, t));
            }
        }
    }
    let jobs: Vec<(usize, u64)> = (0..groups.len())
        .flat_map(|g| (0..config.iterations).map(move |i| (g, i as u64)))
        .collect();
    let evaluations = jobs
        .par_iter()
        .map(|&(g, i)| {
            let (experiment, learner, t) = groups[g];
            let fixed = crate::seed!(master, "rq1", "fixed", learner.name(), t);
            let policy = SeedPolicy::controlled_experiment(experiment, fixed).expect("validated experiment");
            let base = crate::seed!(master, "rq1", u64::from(experiment), learner.name(), t, i);
            let model = train_model(
                learner,
                &dataset.periods[t],
                &policy.resolve(base),
                config.downsample_seed(t),
                &options,
            )?;
            evaluate(|x| model.predict_proba(x), &dataset.periods[t + 1], config)
        })
        .collect::<Result<Vec<Evaluation>>>()?;

    let mut cells = Vec::with_capacity(groups.len());
    for (g, chunk) in evaluations.chunks(config.iterations).enumerate() {
        let (experiment, learner, train_period) = groups[g];
        let rankings: Vec<_> = chunk.iter().map(|e| e.ranking.clone()).collect();
        let scores: Vec<_> = chunk.iter().map(|e| e.scores.clone()).collect();
        let top_k_overlap = config
            .top_k
            .iter()
            .map(|&k| Ok((k, top_k_overlap(&scores, k, config.negligible)?)))
            .collect::<Result<Vec<_>>>()?;
        cells.push(ConsistencyCell {
            experiment,
            learner,
            train_period,
            kendalls_w: kendalls_w(&rankings)?,
            top_k_overlap,
            aucs: chunk.iter().map(|e| e.auc).collect(),
            evaluations: chunk.to_vec(),
        });
    }
    Ok(Rq1Report {
        cells,
        feature_names: dataset.feature_names.clone(),
    })
}

impl Rq1Report {
    pub fn to_bundle(&self, config: &ExperimentConfig) -> ReportBundle {
        let mut header: Vec<String> = [
            "experiment",
            "learner",
            "train_period",
            "test_period",
            "kendalls_w",
            "agreement",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(config.top_k.iter().map(|k| format!("top{k}_overlap")));
        header.push("median_auc".into());
        let mut cells = Table::with_header("rq1_cells.csv", header);
        let mut aucs = Table::new(
            "rq1_aucs.csv",
            &["experiment", "learner", "train_period", "iteration", "auc"],
        );
        let mut importance = Table::new(
            "rq1_importance.csv",
            &[
                "experiment",
                "learner",
                "train_period",
                "iteration",
                "feature",
                "importance",
                "rank",
            ],
        );
        for c in &self.cells {
            let mut row = vec![
                c.experiment.to_string(),
                c.learner.name().to_string(),
                c.train_period.to_string(),
                (c.train_period + 1).to_string(),
                num(c.kendalls_w),
                agreement_label(c.kendalls_w).to_string(),
            ];
            row.extend(c.top_k_overlap.iter().map(|(_, v)| num(*v)));
            row.push(num(median(&c.aucs)));
            cells.push(row);
            for (i, e) in c.evaluations.iter().enumerate() {
                aucs.push(vec![
                    c.experiment.to_string(),
                    c.learner.name().to_string(),
                    c.train_period.to_string(),
                    i.to_string(),
                    num(e.auc),
                ]);
                for (j, name) in self.feature_names.iter().enumerate() {
                    importance.push(vec![
                        c.experiment.to_string(),
                        c.learner.name().to_string(),
                        c.train_period.to_string(),
                        i.to_string(),
                        name.clone(),
                        num(e.scores.values[j]),
                        num(e.ranking.0[j]),
                    ]);
                }
            }
        }
        let mut summary = Table::new(
            "rq1_randomness_summary.csv",
            &["learner", "experiment", "median_kendalls_w", "min_kendalls_w", "cells"],
        );
        for &learner in &config.learners {
            for &experiment in &config.experiments {
                let ws: Vec<f64> = self.cells_for(experiment, learner).map(|c| c.kendalls_w).collect();
                let min = ws.iter().copied().fold(f64::INFINITY, f64::min);
                summary.push(vec![
                    learner.name().to_string(),
                    experiment.to_string(),
                    num(median(&ws)),
                    num(min),
                    ws.len().to_string(),
                ]);
            }
        }
        ReportBundle {
            tables: vec![cells, aucs, importance, summary],
            documents: Vec::new(),
        }
    }
}
