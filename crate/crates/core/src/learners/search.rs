use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

use super::{fit, FeatureSubset, HyperparamSet, Hyperparams, LearnerKind};
use crate::data::Period;
use crate::error::{Error, Result};
use crate::metrics::auc;
use crate::seed::{rng, SeededRng};

pub const DEFAULT_SEARCH_ITERATIONS: usize = 100;
const VALIDATION_FRACTION: f64 = 0.2;

fn log_uniform(r: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    (r.random_range(lo.ln()..hi.ln())).exp()
}

/// Draws one candidate from the learner's search space.
pub fn sample_hyperparams(kind: LearnerKind, r: &mut SeededRng) -> Hyperparams {
    match kind {
        LearnerKind::LogisticRegression => Hyperparams::LogisticRegression {
            l2: log_uniform(r, 1e-4, 1e2),
            max_iter: 1000,
            tol: 1e-6,
        },
        LearnerKind::Cart => Hyperparams::Cart {
            max_depth: Some(r.random_range(2..=20)),
            min_leaf: r.random_range(1..=50),
        },
        LearnerKind::RandomForest => {
            let trees = r.random_range(50..=300);
            // 21 depth choices: 4..=24 plus unlimited.
            let d = r.random_range(0..22usize);
            let max_depth = if d == 21 { None } else { Some(4 + d) };
            let features_per_split = match r.random_range(0..3) {
                0 => FeatureSubset::Sqrt,
                1 => FeatureSubset::Log2,
                _ => FeatureSubset::Fraction(0.5),
            };
            Hyperparams::RandomForest {
                trees,
                max_depth,
                features_per_split,
                min_leaf: 1,
            }
        }
        LearnerKind::Gbdt => Hyperparams::Gbdt {
            rounds: r.random_range(50..=300),
            learning_rate: log_uniform(r, 0.01, 0.3),
            max_depth: r.random_range(2..=8),
        },
    }
}

/// Stratified split: roughly a fifth of each class goes to validation.
fn stratified_split(train: &Period, r: &mut SeededRng) -> Result<(Period, Period)> {
    let mut fit_idx = Vec::new();
    let mut val_idx = Vec::new();
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = (0..train.len()).filter(|&i| train.labels[i] == class).collect();
        if rows.len() < 2 {
            return Err(Error::SingleClass(format!(
                "hyperparameter search needs at least two rows of class {class}"
            )));
        }
        rows.shuffle(r);
        let n_val = ((rows.len() as f64 * VALIDATION_FRACTION).round() as usize).clamp(1, rows.len() - 1);
        val_idx.extend_from_slice(&rows[..n_val]);
        fit_idx.extend_from_slice(&rows[n_val..]);
    }
    fit_idx.sort_unstable();
    val_idx.sort_unstable();
    Ok((train.select_rows(&fit_idx), train.select_rows(&val_idx)))
}

/// Randomized search scored by validation AUC on a stratified hold-out.
/// Candidates and the split come from `search_seed`; every candidate is fit
/// with `learner_seed`. Ties keep the earliest-sampled candidate.
pub fn random_search(
    kind: LearnerKind,
    train: &Period,
    n_iter: usize,
    search_seed: u64,
    learner_seed: u64,
) -> Result<HyperparamSet> {
    if n_iter == 0 {
        return Err(Error::InvalidArgument("search needs at least one iteration".into()));
    }
    let mut split_rng = rng(crate::seed!(search_seed, "split"));
    let (fit_part, val_part) = stratified_split(train, &mut split_rng)?;
    let mut space_rng = rng(crate::seed!(search_seed, "space"));
    let mut best: Option<(f64, Hyperparams)> = None;
    for _ in 0..n_iter {
        let params = sample_hyperparams(kind, &mut space_rng);
        let candidate = HyperparamSet {
            params: params.clone(),
            default: false,
        };
        let model = fit(kind, &fit_part, &candidate, learner_seed)?;
        let score = auc(&val_part.labels, &model.predict_proba(&val_part.features)?)?;
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, params));
        }
    }
    let (_, params) = best.expect("n_iter >= 1");
    Ok(HyperparamSet { params, default: false })
}

/// Machine-readable description of every search space.
pub fn search_spaces_document() -> Value {
    json!({
        "validation": {"split": "stratified", "fraction": VALIDATION_FRACTION, "metric": "auc"},
        "default_iterations": DEFAULT_SEARCH_ITERATIONS,
        "learners": {
            "logistic_regression": {
                "l2": {"distribution": "log_uniform", "low": 1e-4, "high": 1e2},
                "max_iter": {"fixed": 1000},
                "tol": {"fixed": 1e-6}
            },
            "cart": {
                "max_depth": {"distribution": "int_uniform", "low": 2, "high": 20},
                "min_leaf": {"distribution": "int_uniform", "low": 1, "high": 50}
            },
            "random_forest": {
                "trees": {"distribution": "int_uniform", "low": 50, "high": 300},
                "max_depth": {"distribution": "choice", "values": "4..=24 or null"},
                "features_per_split": {"distribution": "choice", "values": ["sqrt", "log2", 0.5]},
                "min_leaf": {"fixed": 1}
            },
            "gbdt": {
                "rounds": {"distribution": "int_uniform", "low": 50, "high": 300},
                "learning_rate": {"distribution": "log_uniform", "low": 0.01, "high": 0.3},
                "max_depth": {"distribution": "int_uniform", "low": 2, "high": 8}
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn toy() -> Period {
        let rows: Vec<[f64; 2]> = (0..60).map(|i| [i as f64, ((i * 7) % 11) as f64]).collect();
        let labels = (0..60).map(|i| u8::from(i >= 40)).collect();
        Period::new(0, Matrix::from_rows(&rows).unwrap(), labels).unwrap()
    }

    #[test]
    fn samples_stay_in_space() {
        let mut r = rng(1);
        for _ in 0..200 {
            match sample_hyperparams(LearnerKind::Gbdt, &mut r) {
                Hyperparams::Gbdt {
                    rounds,
                    learning_rate,
                    max_depth,
                } => {
                    assert!((50..=300).contains(&rounds));
                    assert!((0.01..=0.3).contains(&learning_rate));
                    assert!((2..=8).contains(&max_depth));
                }
                _ => unreachable!(),
            }
            if let Hyperparams::LogisticRegression { l2, .. } =
                sample_hyperparams(LearnerKind::LogisticRegression, &mut r)
            {
                assert!((1e-4..=1e2).contains(&l2));
            }
        }
    }

    #[test]
    fn search_is_deterministic() {
        let p = toy();
        let a = random_search(LearnerKind::Cart, &p, 5, 9, 3).unwrap();
        let b = random_search(LearnerKind::Cart, &p, 5, 9, 3).unwrap();
        assert_eq!(a, b);
        assert!(!a.default);
    }

    #[test]
    fn search_needs_two_minority_rows() {
        let rows: Vec<[f64; 1]> = (0..10).map(|i| [i as f64]).collect();
        let mut labels = vec![0u8; 10];
        labels[9] = 1;
        let p = Period::new(0, Matrix::from_rows(&rows).unwrap(), labels).unwrap();
        assert!(random_search(LearnerKind::Cart, &p, 2, 0, 0).is_err());
    }
}
