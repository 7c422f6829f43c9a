//! One training run end to end: optional bootstrap, majority downsampling,
//! standardization, hyperparameter choice and fitting. The resulting model
//! carries its scaler so it predicts on raw features.

use serde::{Deserialize, Serialize};

use crate::data::{apply_scaler, bootstrap_sample, downsample_majority, fit_scaler, Period, Scaler};
use crate::error::Result;
use crate::learners::{default_hyperparams, fit, random_search, FittedModel, LearnerKind};
use crate::matrix::Matrix;

/// A seed that is either pinned or drawn per iteration from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Fixed(u64),
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchSeed {
    Fixed(u64),
    Free,
    /// Default hyperparameters, no search.
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    FullPeriod,
    Bootstrap(SeedSource),
}

/// Which randomness sources are pinned and which vary across iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub learner_seed: SeedSource,
    pub search_seed: SearchSeed,
    pub sampling: Sampling,
}

impl SeedPolicy {
    /// The four controlled internal-consistency experiments, numbered 1 to 4.
    /// `fixed` is the value every pinned source receives.
    pub fn controlled_experiment(experiment: u8, fixed: u64) -> Option<Self> {
        let pinned = SeedSource::Fixed(fixed);
        let policy = match experiment {
            1 => SeedPolicy {
                learner_seed: SeedSource::Free,
                search_seed: SearchSeed::Disabled,
                sampling: Sampling::FullPeriod,
            },
            2 => SeedPolicy {
                learner_seed: pinned,
                search_seed: SearchSeed::Free,
                sampling: Sampling::FullPeriod,
            },
            3 => SeedPolicy {
                learner_seed: pinned,
                search_seed: SearchSeed::Disabled,
                sampling: Sampling::Bootstrap(SeedSource::Free),
            },
            4 => SeedPolicy {
                learner_seed: pinned,
                search_seed: SearchSeed::Disabled,
                sampling: Sampling::FullPeriod,
            },
            _ => return None,
        };
        Some(policy)
    }

    /// Bootstrap plus randomized search with every source free.
    pub fn uncontrolled() -> Self {
        SeedPolicy {
            learner_seed: SeedSource::Free,
            search_seed: SearchSeed::Free,
            sampling: Sampling::Bootstrap(SeedSource::Free),
        }
    }

    /// Bootstrap with default hyperparameters, every source free.
    pub fn bootstrap_defaults() -> Self {
        SeedPolicy {
            learner_seed: SeedSource::Free,
            search_seed: SearchSeed::Disabled,
            sampling: Sampling::Bootstrap(SeedSource::Free),
        }
    }

    /// Concrete seeds for one run. Free sources are derived from `base`.
    pub fn resolve(&self, base: u64) -> RunSeeds {
        let pick = |s: SeedSource, label: &str| match s {
            SeedSource::Fixed(v) => v,
            SeedSource::Free => crate::seed!(base, label),
        };
        RunSeeds {
            learner: pick(self.learner_seed, "learner"),
            search: match self.search_seed {
                SearchSeed::Fixed(v) => Some(v),
                SearchSeed::Free => Some(crate::seed!(base, "search")),
                SearchSeed::Disabled => None,
            },
            bootstrap: match self.sampling {
                Sampling::FullPeriod => None,
                Sampling::Bootstrap(s) => Some(pick(s, "bootstrap")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub learner: u64,
    pub search: Option<u64>,
    pub bootstrap: Option<u64>,
}

/// Settings shared by every run of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// `None` keeps the class balance as is.
    pub downsample_ratio: Option<f64>,
    pub search_iterations: usize,
}

/// A fitted model together with the scaler fitted on its training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledModel {
    pub scaler: Scaler,
    pub model: FittedModel,
}

impl ScaledModel {
    pub fn kind(&self) -> LearnerKind {
        self.model.kind
    }

    pub fn predict_proba(&self, features: &Matrix) -> Result<Vec<f64>> {
        if features.is_empty() {
            return Ok(Vec::new());
        }
        if features.cols() != self.model.feature_count {
            return Err(crate::Error::ShapeMismatch {
                expected: self.model.feature_count,
                actual: features.cols(),
            });
        }
        self.model.predict_proba(&self.scaler.transform(features))
    }
}

const BOOTSTRAP_ATTEMPTS: u64 = 64;

/// Redraws (with derived seeds) until the sample holds both classes.
fn bootstrap_with_both_classes(train: &Period, seed: u64) -> Result<Period> {
    train.require_both_classes("bootstrap source must contain both classes")?;
    let mut sample = bootstrap_sample(train, seed)?;
    for attempt in 1..BOOTSTRAP_ATTEMPTS {
        if sample.has_both_classes() {
            break;
        }
        sample = bootstrap_sample(train, crate::seed!(seed, "redraw", attempt))?;
    }
    Ok(sample)
}

/// Bootstraps (if seeded), downsamples the majority class with
/// `downsample_seed`, standardizes, picks hyperparameters and fits.
pub fn train_model(
    kind: LearnerKind,
    train: &Period,
    seeds: &RunSeeds,
    downsample_seed: u64,
    options: &TrainOptions,
) -> Result<ScaledModel> {
    let mut data = match seeds.bootstrap {
        Some(s) => bootstrap_with_both_classes(train, s)?,
        None => train.clone(),
    };
    if let Some(ratio) = options.downsample_ratio {
        data = downsample_majority(&data, ratio, downsample_seed)?;
    }
    let scaler = fit_scaler(&data)?;
    let scaled = apply_scaler(&scaler, &data)?;
    let hyperparams = match seeds.search {
        Some(s) => random_search(kind, &scaled, options.search_iterations, s, seeds.learner)?,
        None => default_hyperparams(kind),
    };
    let model = fit(kind, &scaled, &hyperparams, seeds.learner)?;
    Ok(ScaledModel { scaler, model })
}
