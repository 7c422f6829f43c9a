//! External consistency: agreement among models of similar performance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::breaks::{elbow_scan, jenks_breaks, median, rank_clusters_by_performance};
use crate::data::PeriodizedDataset;
use crate::error::Result;
use crate::learners::{HyperparamSet, LearnerKind};
use crate::metrics::{kendalls_w, top_k_overlap};
use crate::pipeline::report::{num, opt_num, ReportBundle, Table};
use crate::pipeline::{evaluate, require_periods, Evaluation, ExperimentConfig};
use crate::stats::{apply_bonferroni, cliffs_delta, wilcoxon_rank_sum, Alternative, Magnitude, TestResult};
use crate::training::{train_model, SeedPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub learner: LearnerKind,
    pub iteration: usize,
    pub hyperparams: HyperparamSet,
    pub evaluation: Evaluation,
}

/// All models trained on one period and evaluated on the next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodPool {
    pub train_period: usize,
    pub models: Vec<ModelRecord>,
}

impl PeriodPool {
    pub fn aucs(&self) -> Vec<f64> {
        self.models.iter().map(|m| m.evaluation.auc).collect()
    }
}

/// `learners x iterations` models per period, each from a bootstrap sample
/// with randomized search and free seeds.
pub fn generate_model_pool(config: &ExperimentConfig, dataset: &PeriodizedDataset) -> Result<Vec<PeriodPool>> {
    config.validate()?;
    require_periods(dataset, 2, "external consistency")?;
    let options = config.train_options();
    let master = config.master_seed;
    let periods = dataset.n_periods() - 1;
    let jobs: Vec<(usize, LearnerKind, usize)> = (0..periods)
        .flat_map(|t| {
            config
                .learners
                .iter()
                .flat_map(move |&l| (0..config.iterations).map(move |i| (t, l, i)))
        })
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(t, learner, i)| {
            let base = crate::seed!(master, "rq2", learner.name(), t, i);
            let seeds = SeedPolicy::uncontrolled().resolve(base);
            let model = train_model(
                learner,
                &dataset.periods[t],
                &seeds,
                config.downsample_seed(t),
                &options,
            )?;
            Ok(ModelRecord {
                learner,
                iteration: i,
                hyperparams: model.model.hyperparams.clone(),
                evaluation: evaluate(|x| model.predict_proba(x), &dataset.periods[t + 1], config)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let per_period = config.learners.len() * config.iterations;
    Ok(records
        .chunks(per_period)
        .enumerate()
        .map(|(t, chunk)| PeriodPool {
            train_period: t,
            models: chunk.to_vec(),
        })
        .collect())
}

/// One performance cluster of one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub train_period: usize,
    pub rank: usize,
    pub size: usize,
    /// The configured cluster statistic of member AUCs.
    pub cluster_auc: f64,
    pub median_auc: f64,
    pub kendalls_w: f64,
    pub top_k_overlap: Vec<(usize, f64)>,
    /// Member count per configured learner, in config order.
    pub learner_counts: Vec<usize>,
}

impl ClusterRow {
    pub fn measurement(&self, name: &str) -> Option<f64> {
        if name == "kendalls_w" {
            return Some(self.kendalls_w);
        }
        self.top_k_overlap
            .iter()
            .find(|(k, _)| format!("top{k}_overlap") == name)
            .map(|(_, v)| *v)
    }
}

/// Rank-1 cluster against a lower-ranked one for one measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankComparison {
    pub measurement: String,
    pub rank_x: usize,
    pub rank_y: usize,
    pub n_x: usize,
    pub n_y: usize,
    /// `None` when either side has fewer than two observations.
    pub test: Option<TestResult>,
    pub cliffs_d: Option<f64>,
    pub magnitude: Option<Magnitude>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedPeriod {
    pub train_period: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq2Report {
    pub learners: Vec<LearnerKind>,
    pub pools: Vec<PeriodPool>,
    pub clusters: Vec<ClusterRow>,
    pub excluded: Vec<ExcludedPeriod>,
    pub comparisons: Vec<RankComparison>,
    /// `(train_period, k, wss)`.
    pub elbow: Vec<(usize, usize, f64)>,
}

impl Rq2Report {
    pub fn models_per_period(&self) -> Vec<usize> {
        self.pools.iter().map(|p| p.models.len()).collect()
    }

    /// Share of each configured learner in the rank-1 cluster, per included period.
    pub fn best_cluster_shares(&self) -> Vec<(usize, Vec<f64>)> {
        self.clusters
            .iter()
            .filter(|c| c.rank == 1)
            .map(|c| {
                let shares = c.learner_counts.iter().map(|&n| n as f64 / c.size as f64).collect();
                (c.train_period, shares)
            })
            .collect()
    }
}

pub fn measurement_names(config: &ExperimentConfig) -> Vec<String> {
    let mut names = vec!["kendalls_w".to_string()];
    names.extend(config.top_k.iter().map(|k| format!("top{k}_overlap")));
    names
}

/// Clusters each period's models by AUC with Jenks natural breaks and
/// compares within-cluster agreement across performance ranks.
pub fn run_rq2(config: &ExperimentConfig, dataset: &PeriodizedDataset) -> Result<Rq2Report> {
    let pools = generate_model_pool(config, dataset)?;
    let k = config.k_clusters;
    let mut clusters = Vec::new();
    let mut excluded = Vec::new();
    let mut elbow = Vec::new();
    for pool in &pools {
        let aucs = pool.aucs();
        let k_max = config.elbow_max_k.min(aucs.len());
        for (kk, w) in elbow_scan(&aucs, k_max)? {
            elbow.push((pool.train_period, kk, w));
        }
        if aucs.len() < k {
            excluded.push(ExcludedPeriod {
                train_period: pool.train_period,
                reason: format!("{} models cannot form {k} clusters", aucs.len()),
            });
            continue;
        }
        let breaks = jenks_breaks(&aucs, k)?;
        let sizes = breaks.cluster_sizes();
        if let Some(small) = sizes.iter().position(|&s| s < 2) {
            excluded.push(ExcludedPeriod {
                train_period: pool.train_period,
                reason: format!("cluster {small} has {} model(s)", sizes[small]),
            });
            continue;
        }
        let ranks = rank_clusters_by_performance(&breaks, &aucs, config.cluster_statistic);
        let mut rows = Vec::with_capacity(k);
        for c in 0..k {
            let members = breaks.members(c);
            let member_aucs: Vec<f64> = members.iter().map(|&i| aucs[i]).collect();
            let rankings: Vec<_> = members
                .iter()
                .map(|&i| pool.models[i].evaluation.ranking.clone())
                .collect();
            let scores: Vec<_> = members
                .iter()
                .map(|&i| pool.models[i].evaluation.scores.clone())
                .collect();
            let top_k_overlap = config
                .top_k
                .iter()
                .map(|&kk| Ok((kk, top_k_overlap(&scores, kk, config.negligible)?)))
                .collect::<Result<Vec<_>>>()?;
            rows.push(ClusterRow {
                train_period: pool.train_period,
                rank: ranks[c],
                size: members.len(),
                cluster_auc: config.cluster_statistic.of(&member_aucs),
                median_auc: median(&member_aucs),
                kendalls_w: kendalls_w(&rankings)?,
                top_k_overlap,
                learner_counts: config
                    .learners
                    .iter()
                    .map(|&l| members.iter().filter(|&&i| pool.models[i].learner == l).count())
                    .collect(),
            });
        }
        rows.sort_by_key(|r| r.rank);
        clusters.extend(rows);
    }

    let mut comparisons = Vec::new();
    for name in measurement_names(config) {
        let values_at = |rank: usize| -> Vec<f64> {
            clusters
                .iter()
                .filter(|c| c.rank == rank)
                .filter_map(|c| c.measurement(&name))
                .collect()
        };
        let x = values_at(1);
        let mut family = Vec::new();
        for rank_y in 2..=k {
            let y = values_at(rank_y);
            let test = if x.len() >= 2 && y.len() >= 2 {
                Some(wilcoxon_rank_sum(&x, &y, Alternative::Greater)?)
            } else {
                None
            };
            let effect = if !x.is_empty() && !y.is_empty() {
                Some(cliffs_delta(&x, &y)?)
            } else {
                None
            };
            family.push(RankComparison {
                measurement: name.clone(),
                rank_x: 1,
                rank_y,
                n_x: x.len(),
                n_y: y.len(),
                test,
                cliffs_d: effect.map(|e| e.d),
                magnitude: effect.map(|e| e.magnitude),
            });
        }
        let mut tests: Vec<TestResult> = family.iter().filter_map(|c| c.test).collect();
        apply_bonferroni(&mut tests);
        let mut corrected = tests.into_iter();
        for c in &mut family {
            if c.test.is_some() {
                c.test = corrected.next();
            }
        }
        comparisons.extend(family);
    }

    Ok(Rq2Report {
        learners: config.learners.clone(),
        pools,
        clusters,
        excluded,
        comparisons,
        elbow,
    })
}

pub(crate) fn elbow_table(elbow: &[(usize, usize, f64)]) -> Table {
    let mut t = Table::new("rq2_elbow.csv", &["train_period", "k", "wss"]);
    for &(p, k, w) in elbow {
        t.push(vec![p.to_string(), k.to_string(), num(w)]);
    }
    t
}

pub(crate) fn models_table(pools: &[PeriodPool]) -> Table {
    let mut t = Table::new(
        "rq2_models.csv",
        &[
            "train_period",
            "test_period",
            "learner",
            "iteration",
            "auc",
            "hyperparams",
        ],
    );
    for pool in pools {
        for m in &pool.models {
            t.push(vec![
                pool.train_period.to_string(),
                (pool.train_period + 1).to_string(),
                m.learner.name().to_string(),
                m.iteration.to_string(),
                num(m.evaluation.auc),
                serde_json::to_string(&m.hyperparams).unwrap_or_default(),
            ]);
        }
    }
    t
}

/// Significance level used to mark comparisons.
pub const ALPHA: f64 = 0.05;

impl Rq2Report {
    pub fn to_bundle(&self, config: &ExperimentConfig) -> ReportBundle {
        let mut header: Vec<String> = [
            "train_period",
            "rank",
            "size",
            "cluster_auc",
            "median_auc",
            "kendalls_w",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(config.top_k.iter().map(|k| format!("top{k}_overlap")));
        let mut clusters = Table::with_header("rq2_clusters.csv", header);
        for c in &self.clusters {
            let mut row = vec![
                c.train_period.to_string(),
                c.rank.to_string(),
                c.size.to_string(),
                num(c.cluster_auc),
                num(c.median_auc),
                num(c.kendalls_w),
            ];
            row.extend(c.top_k_overlap.iter().map(|(_, v)| num(*v)));
            clusters.push(row);
        }

        let mut similarity = Table::new(
            "rq2_similarity.csv",
            &[
                "measurement",
                "rank_x",
                "rank_y",
                "n_x",
                "n_y",
                "statistic",
                "p_value",
                "corrected_p",
                "significant",
                "cliffs_d",
                "magnitude",
            ],
        );
        for c in &self.comparisons {
            let corrected = c.test.and_then(|t| t.corrected_p);
            similarity.push(vec![
                c.measurement.clone(),
                c.rank_x.to_string(),
                c.rank_y.to_string(),
                c.n_x.to_string(),
                c.n_y.to_string(),
                opt_num(c.test.map(|t| t.statistic)),
                opt_num(c.test.map(|t| t.p_value)),
                opt_num(corrected),
                corrected.map_or("NA".into(), |p| (p < ALPHA).to_string()),
                opt_num(c.cliffs_d),
                c.magnitude.map_or("NA".into(), |m| m.abbreviation().to_string()),
            ]);
        }

        let mut shares = Table::new("rq2_best_cluster_learners.csv", &["train_period", "learner", "share"]);
        for (period, s) in self.best_cluster_shares() {
            for (l, v) in self.learners.iter().zip(s) {
                shares.push(vec![period.to_string(), l.name().to_string(), num(v)]);
            }
        }

        let mut convergence = Table::new(
            "rq2_auc_vs_w.csv",
            &["train_period", "rank", "median_auc", "kendalls_w"],
        );
        for c in &self.clusters {
            convergence.push(vec![
                c.train_period.to_string(),
                c.rank.to_string(),
                num(c.median_auc),
                num(c.kendalls_w),
            ]);
        }

        let mut excluded = Table::new("rq2_excluded_periods.csv", &["train_period", "reason"]);
        for e in &self.excluded {
            excluded.push(vec![e.train_period.to_string(), e.reason.clone()]);
        }

        ReportBundle {
            tables: vec![
                models_table(&self.pools),
                clusters,
                similarity,
                shares,
                convergence,
                excluded,
                elbow_table(&self.elbow),
            ],
            documents: Vec::new(),
        }
    }
}
