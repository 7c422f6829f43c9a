//! The learner contract: four built-in binary classifiers, their default
//! hyperparameters and search spaces, and seeded randomized search.
//!
//! | learner | consumes `learner_seed` |
//! |---|---|
//! | logistic regression | no (zero-initialized full-batch gradient descent) |
//! | CART | yes (random tie-breaking among equal-gain splits) |
//! | random forest | yes (bootstrap, feature subsampling, ties) |
//! | GBDT | no (all rows and features every round) |

mod boosting;
mod forest;
mod logistic;
mod search;
mod tree;

pub use boosting::BoostedState;
pub use logistic::LogisticState;
pub use search::{random_search, sample_hyperparams, search_spaces_document, DEFAULT_SEARCH_ITERATIONS};
pub use tree::{Node, Tree};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Period;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    #[serde(alias = "lr", alias = "logistic")]
    LogisticRegression,
    Cart,
    #[serde(alias = "rf")]
    RandomForest,
    Gbdt,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [
        LearnerKind::LogisticRegression,
        LearnerKind::Cart,
        LearnerKind::RandomForest,
        LearnerKind::Gbdt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::LogisticRegression => "logistic_regression",
            LearnerKind::Cart => "cart",
            LearnerKind::RandomForest => "random_forest",
            LearnerKind::Gbdt => "gbdt",
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            LearnerKind::LogisticRegression => "LR",
            LearnerKind::Cart => "CART",
            LearnerKind::RandomForest => "RF",
            LearnerKind::Gbdt => "GBDT",
        }
    }

    /// Whether fitting reads from the learner seed.
    pub fn uses_learner_seed(self) -> bool {
        matches!(self, LearnerKind::Cart | LearnerKind::RandomForest)
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic_regression" | "lr" | "logistic" => Ok(LearnerKind::LogisticRegression),
            "cart" => Ok(LearnerKind::Cart),
            "random_forest" | "rf" => Ok(LearnerKind::RandomForest),
            "gbdt" => Ok(LearnerKind::Gbdt),
            other => Err(Error::InvalidArgument(format!("unknown learner `{other}`"))),
        }
    }
}

/// Number of features examined per random-forest split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    Sqrt,
    Log2,
    Fraction(f64),
}

impl FeatureSubset {
    pub fn count(self, features: usize) -> usize {
        let f = features as f64;
        let k = match self {
            FeatureSubset::Sqrt => f.sqrt().floor(),
            FeatureSubset::Log2 => f.log2().floor(),
            FeatureSubset::Fraction(p) => (p * f).floor(),
        };
        (k as usize).clamp(1, features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum Hyperparams {
    LogisticRegression {
        /// L2 penalty strength (inverse of scikit-learn's `C`).
        l2: f64,
        max_iter: usize,
        tol: f64,
    },
    Cart {
        /// `None` means unlimited.
        max_depth: Option<usize>,
        min_leaf: usize,
    },
    RandomForest {
        trees: usize,
        max_depth: Option<usize>,
        features_per_split: FeatureSubset,
        min_leaf: usize,
    },
    Gbdt {
        rounds: usize,
        learning_rate: f64,
        max_depth: usize,
    },
}

impl Hyperparams {
    pub fn kind(&self) -> LearnerKind {
        match self {
            Hyperparams::LogisticRegression { .. } => LearnerKind::LogisticRegression,
            Hyperparams::Cart { .. } => LearnerKind::Cart,
            Hyperparams::RandomForest { .. } => LearnerKind::RandomForest,
            Hyperparams::Gbdt { .. } => LearnerKind::Gbdt,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        match *self {
            Hyperparams::LogisticRegression { l2, max_iter, tol } => {
                if !(l2 >= 0.0 && l2.is_finite()) {
                    return bad("l2 must be a finite non-negative number");
                }
                if max_iter == 0 || !(tol > 0.0) {
                    return bad("max_iter must be >= 1 and tol > 0");
                }
            }
            Hyperparams::Cart { max_depth, min_leaf } => {
                if max_depth == Some(0) || min_leaf == 0 {
                    return bad("max_depth and min_leaf must be >= 1");
                }
            }
            Hyperparams::RandomForest {
                trees,
                max_depth,
                features_per_split,
                min_leaf,
            } => {
                if trees == 0 || max_depth == Some(0) || min_leaf == 0 {
                    return bad("trees, max_depth and min_leaf must be >= 1");
                }
                if let FeatureSubset::Fraction(p) = features_per_split {
                    if !(p > 0.0 && p <= 1.0) {
                        return bad("features_per_split fraction must be in (0, 1]");
                    }
                }
            }
            Hyperparams::Gbdt {
                rounds,
                learning_rate,
                max_depth,
            } => {
                if rounds == 0 || max_depth == 0 || !(learning_rate > 0.0 && learning_rate.is_finite()) {
                    return bad("rounds and max_depth must be >= 1, learning_rate > 0");
                }
            }
        }
        Ok(())
    }
}

/// Hyperparameters plus whether they are the learner's versioned defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamSet {
    #[serde(flatten)]
    pub params: Hyperparams,
    pub default: bool,
}

impl HyperparamSet {
    pub fn kind(&self) -> LearnerKind {
        self.params.kind()
    }
}

/// Version tag of the default hyperparameter table.
pub const DEFAULTS_VERSION: &str = "1";

pub fn default_hyperparams(kind: LearnerKind) -> HyperparamSet {
    let params = match kind {
        LearnerKind::LogisticRegression => Hyperparams::LogisticRegression {
            l2: 1.0,
            max_iter: 1000,
            tol: 1e-6,
        },
        LearnerKind::Cart => Hyperparams::Cart {
            max_depth: None,
            min_leaf: 1,
        },
        LearnerKind::RandomForest => Hyperparams::RandomForest {
            trees: 100,
            max_depth: None,
            features_per_split: FeatureSubset::Sqrt,
            min_leaf: 1,
        },
        LearnerKind::Gbdt => Hyperparams::Gbdt {
            rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
        },
    };
    HyperparamSet { params, default: true }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelState {
    Logistic(LogisticState),
    Tree { tree: Tree },
    Forest { trees: Vec<Tree> },
    Boosted(BoostedState),
}

/// A trained learner. Immutable after [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub kind: LearnerKind,
    pub hyperparams: HyperparamSet,
    pub feature_count: usize,
    pub state: ModelState,
}

/// Fits a learner on one period. Only Cart and RandomForest read `learner_seed`.
pub fn fit(kind: LearnerKind, train: &Period, hyperparams: &HyperparamSet, learner_seed: u64) -> Result<FittedModel> {
    if hyperparams.kind() != kind {
        return Err(Error::InvalidArgument(format!(
            "hyperparameters for {} passed to {kind}",
            hyperparams.kind()
        )));
    }
    hyperparams.params.validate()?;
    if train.feature_count() == 0 {
        return Err(Error::InvalidArgument("training data has no features".into()));
    }
    train.require_both_classes("training data must contain both classes")?;
    if !train.features.all_finite() {
        return Err(Error::NonFinite);
    }
    let x = &train.features;
    let y = &train.labels;
    let state = match hyperparams.params {
        Hyperparams::LogisticRegression { l2, max_iter, tol } => {
            ModelState::Logistic(logistic::fit_logistic(x, y, l2, max_iter, tol))
        }
        Hyperparams::Cart { max_depth, min_leaf } => ModelState::Tree {
            tree: forest::fit_cart(x, y, max_depth, min_leaf, learner_seed),
        },
        Hyperparams::RandomForest {
            trees,
            max_depth,
            features_per_split,
            min_leaf,
        } => ModelState::Forest {
            trees: forest::fit_forest(
                x,
                y,
                trees,
                max_depth,
                features_per_split.count(x.cols()),
                min_leaf,
                learner_seed,
            ),
        },
        Hyperparams::Gbdt {
            rounds,
            learning_rate,
            max_depth,
        } => ModelState::Boosted(boosting::fit_gbdt(x, y, rounds, learning_rate, max_depth)),
    };
    Ok(FittedModel {
        kind,
        hyperparams: hyperparams.clone(),
        feature_count: x.cols(),
        state,
    })
}

impl FittedModel {
    /// Probability of the positive class for each row, in `[0, 1]`.
    pub fn predict_proba(&self, features: &Matrix) -> Result<Vec<f64>> {
        if features.is_empty() {
            return Ok(Vec::new());
        }
        if features.cols() != self.feature_count {
            return Err(Error::ShapeMismatch {
                expected: self.feature_count,
                actual: features.cols(),
            });
        }
        let rows = 0..features.rows();
        let mut out: Vec<f64> = match &self.state {
            ModelState::Logistic(s) => rows.map(|i| s.predict_row(features.row(i))).collect(),
            ModelState::Tree { tree } => rows.map(|i| tree.predict_row(features.row(i))).collect(),
            ModelState::Forest { trees } => forest::predict_forest(trees, features),
            ModelState::Boosted(s) => s.predict(features),
        };
        out.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
        Ok(out)
    }
}

pub fn predict_proba(model: &FittedModel, features: &Matrix) -> Result<Vec<f64>> {
    model.predict_proba(features)
}
