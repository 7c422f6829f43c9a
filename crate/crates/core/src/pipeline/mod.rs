//! Experiment runners for internal, external and time consistency, and the
//! report files they emit.

mod report;
mod rq1;
mod rq2;
mod rq3;

pub use report::{emit_reports, Manifest, ReportBundle, Table};
pub use rq1::{run_rq1, ConsistencyCell, Rq1Report, EXPERIMENTS};
pub use rq2::{generate_model_pool, run_rq2, ClusterRow, ModelRecord, PeriodPool, RankComparison, Rq2Report};
pub use rq3::{
    ground_truth_periods, run_rq3, GroundTruth, Rq3Report, StrategyComparison, TauScore, TestModel,
    REFERENCE_STRATEGIES,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::breaks::ClusterStatistic;
use crate::data::{
    generate_synthetic, load_periodized_csv, spearman_filter, Period, PeriodizedDataset, SyntheticConfig,
};
use crate::error::{Error, Result};
use crate::interpret::{permutation_importance, rank_features, FeatureRanking, ImportanceScores};
use crate::learners::{LearnerKind, DEFAULT_SEARCH_ITERATIONS};
use crate::matrix::Matrix;
use crate::training::TrainOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default = "default_period_column")]
    pub period_column: String,
}

fn default_label_column() -> String {
    "label".into()
}

fn default_period_column() -> String {
    "period".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub generator: SyntheticConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Csv(CsvSource),
    Synthetic(SyntheticSource),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticSource {
            seed: 0,
            generator: SyntheticConfig::default(),
        })
    }
}

/// Everything a runner needs. Unknown keys in the JSON form are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub learners: Vec<LearnerKind>,
    pub iterations: usize,
    pub master_seed: u64,
    pub k_clusters: usize,
    pub top_k: Vec<usize>,
    pub negligible: f64,
    pub search_iterations: usize,
    /// `null` disables majority downsampling.
    pub downsample_ratio: Option<f64>,
    pub permutation_repeats: usize,
    /// `null` disables the Spearman redundancy filter.
    pub spearman_threshold: Option<f64>,
    pub cluster_statistic: ClusterStatistic,
    /// `null` means half the number of periods.
    pub ensemble_capacity: Option<usize>,
    /// Controlled internal-consistency experiments to run.
    pub experiments: Vec<u8>,
    /// Largest cluster count in elbow curves.
    pub elbow_max_k: usize,
    /// Not recorded in manifests, so report trees compare equal across locations.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            learners: LearnerKind::ALL.to_vec(),
            iterations: 10,
            master_seed: 0,
            k_clusters: 4,
            top_k: vec![3, 5],
            negligible: crate::interpret::NEGLIGIBLE_IMPORTANCE,
            search_iterations: DEFAULT_SEARCH_ITERATIONS,
            downsample_ratio: Some(10.0),
            permutation_repeats: crate::interpret::DEFAULT_REPEATS,
            spearman_threshold: Some(0.7),
            cluster_statistic: ClusterStatistic::Median,
            ensemble_capacity: None,
            experiments: EXPERIMENTS.to_vec(),
            elbow_max_k: 10,
            output_dir: PathBuf::from("reports"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.learners.is_empty() {
            return bad("at least one learner is required".into());
        }
        let mut seen = self.learners.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.learners.len() {
            return bad("learners must not repeat".into());
        }
        if self.iterations < 2 {
            return bad(format!("iterations must be >= 2, got {}", self.iterations));
        }
        if self.k_clusters < 2 {
            return bad(format!("k_clusters must be >= 2, got {}", self.k_clusters));
        }
        if self.top_k.is_empty() || self.top_k.contains(&0) {
            return bad("top_k must list positive sizes".into());
        }
        if !(self.negligible >= 0.0 && self.negligible.is_finite()) {
            return bad("negligible must be a finite non-negative number".into());
        }
        if self.search_iterations == 0 || self.permutation_repeats == 0 {
            return bad("search_iterations and permutation_repeats must be >= 1".into());
        }
        if let Some(r) = self.downsample_ratio {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("downsample_ratio must be positive, got {r}"));
            }
        }
        if let Some(t) = self.spearman_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return bad(format!("spearman_threshold must be in (0, 1], got {t}"));
            }
        }
        if self.ensemble_capacity == Some(0) {
            return bad("ensemble_capacity must be >= 1".into());
        }
        if self.experiments.is_empty() || self.experiments.iter().any(|e| !EXPERIMENTS.contains(e)) {
            return bad("experiments must be a non-empty subset of 1..=4".into());
        }
        if self.elbow_max_k == 0 {
            return bad("elbow_max_k must be >= 1".into());
        }
        Ok(())
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            downsample_ratio: self.downsample_ratio,
            search_iterations: self.search_iterations,
        }
    }

    /// Pinned seed shared by every permutation-importance computation.
    pub fn importance_seed(&self) -> u64 {
        crate::seed!(self.master_seed, "importance")
    }

    /// Downsampling seed of a training set, the same in every iteration.
    pub(crate) fn downsample_seed(&self, period: usize) -> u64 {
        crate::seed!(self.master_seed, "downsample", period)
    }
}

/// Loads or generates the dataset and applies the redundancy filter.
pub fn load_dataset(config: &ExperimentConfig) -> Result<PeriodizedDataset> {
    let raw = match &config.dataset {
        DatasetSource::Csv(c) => load_periodized_csv(&c.path, &c.label_column, &c.period_column)?,
        DatasetSource::Synthetic(s) => generate_synthetic(&s.generator, s.seed)?,
    };
    match config.spearman_threshold {
        Some(t) => {
            let keep = spearman_filter(&raw, t)?;
            Ok(raw.select_features(&keep))
        }
        None => Ok(raw),
    }
}

/// AUC, importance scores and ranking of a model on an evaluation period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub auc: f64,
    pub scores: ImportanceScores,
    pub ranking: FeatureRanking,
}

pub(crate) fn evaluate<F>(predict: F, test: &Period, config: &ExperimentConfig) -> Result<Evaluation>
where
    F: Fn(&Matrix) -> Result<Vec<f64>> + Sync,
{
    let scores = permutation_importance(predict, test, config.permutation_repeats, config.importance_seed())?;
    Ok(Evaluation {
        auc: scores.baseline_auc,
        ranking: rank_features(&scores),
        scores,
    })
}

pub(crate) fn require_periods(dataset: &PeriodizedDataset, min: usize, what: &str) -> Result<()> {
    if dataset.n_periods() < min {
        return Err(Error::InsufficientHistory(format!(
            "{what} needs at least {min} periods, dataset has {}",
            dataset.n_periods()
        )));
    }
    Ok(())
}

/// Index of the largest value; ties keep the first.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_keys() {
        let cfg = ExperimentConfig::from_json_str("{}").unwrap();
        assert_eq!(cfg.iterations, 10);
        assert_eq!(cfg.top_k, vec![3, 5]);
        assert_eq!(cfg.search_iterations, 100);
        assert_eq!(cfg.downsample_ratio, Some(10.0));
        assert_eq!(cfg.negligible, 0.0001);
        assert!(ExperimentConfig::from_json_str(r#"{"iteration": 3}"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"iterations": 1}"#).is_err());
        let c = ExperimentConfig::from_json_str(
            r#"{"dataset": {"synthetic": {"seed": 4, "generator": {"periods": 3}}}, "learners": ["gbdt", "cart"]}"#,
        )
        .unwrap();
        assert_eq!(c.learners, vec![LearnerKind::Gbdt, LearnerKind::Cart]);
        assert!(matches!(
            c.dataset,
            DatasetSource::Synthetic(SyntheticSource { seed: 4, .. })
        ));
        assert!(ExperimentConfig::from_json_str(r#"{"dataset": {"synthetic": {"sed": 1}}}"#).is_err());
    }

    #[test]
    fn argmax_keeps_first() {
        assert_eq!(argmax([0.1, 0.5, 0.5, 0.2]), Some(1));
        assert_eq!(argmax(Vec::<f64>::new()), None);
    }
}
