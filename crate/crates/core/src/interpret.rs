//! Permutation feature importance and the feature rankings derived from it.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Period;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::auc;
use crate::seed::rng;
use crate::stats::average_ranks;

/// Repeat count used when a caller does not choose one.
pub const DEFAULT_REPEATS: usize = 5;

/// Features whose importance falls below this are ignored by top-K sets.
pub const NEGLIGIBLE_IMPORTANCE: f64 = 0.0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceScores {
    /// Mean AUC drop per feature; may be negative.
    pub values: Vec<f64>,
    pub baseline_auc: f64,
    pub n_repeats: usize,
    pub seed: u64,
}

/// Fractional ranks, 1 = most important.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureRanking(pub Vec<f64>);

impl FeatureRanking {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for FeatureRanking {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Importance of feature `j` is the baseline AUC minus the mean AUC over
/// `n_repeats` shuffles of column `j` of `test`.
///
/// Each (feature, repeat) shuffle draws from its own stream seeded by
/// `seed!(seed, j, r)`, so the result does not depend on evaluation order.
pub fn permutation_importance<F>(predict: F, test: &Period, n_repeats: usize, seed: u64) -> Result<ImportanceScores>
where
    F: Fn(&Matrix) -> Result<Vec<f64>> + Sync,
{
    if n_repeats == 0 {
        return Err(Error::InvalidArgument("n_repeats must be >= 1".into()));
    }
    test.require_both_classes("permutation importance needs both classes in the test period")?;
    let baseline = auc(&test.labels, &predict(&test.features)?)?;
    let values = (0..test.feature_count())
        .into_par_iter()
        .map(|j| {
            let original = test.features.column(j);
            let mut shuffled = test.features.clone();
            let mut total_drop = 0.0;
            for r in 0..n_repeats {
                let mut col = original.clone();
                col.shuffle(&mut rng(crate::seed!(seed, j, r)));
                shuffled.set_column(j, &col);
                let permuted = auc(&test.labels, &predict(&shuffled)?)?;
                total_drop += baseline - permuted;
            }
            Ok(total_drop / n_repeats as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ImportanceScores {
        values,
        baseline_auc: baseline,
        n_repeats,
        seed,
    })
}

/// Descending-importance ranking; exact ties share the mean position.
pub fn rank_features(scores: &ImportanceScores) -> FeatureRanking {
    let negated: Vec<f64> = scores.values.iter().map(|v| -v).collect();
    FeatureRanking(average_ranks(&negated))
}

/// The `k` most important features among those with importance at least
/// `negligible`; ties go to the lower feature index.
pub fn top_k_features(scores: &ImportanceScores, k: usize, negligible: f64) -> Result<BTreeSet<usize>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let mut eligible: Vec<usize> = (0..scores.values.len())
        .filter(|&j| scores.values[j] >= negligible)
        .collect();
    eligible.sort_by(|&a, &b| scores.values[b].total_cmp(&scores.values[a]).then(a.cmp(&b)));
    Ok(eligible.into_iter().take(k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(values: &[f64]) -> ImportanceScores {
        ImportanceScores {
            values: values.to_vec(),
            baseline_auc: 1.0,
            n_repeats: 1,
            seed: 0,
        }
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(rank_features(&scores(&[0.3, 0.1, 0.2])).0, vec![1.0, 3.0, 2.0]);
        assert_eq!(rank_features(&scores(&[0.2, 0.2])).0, vec![1.5, 1.5]);
        assert_eq!(rank_features(&scores(&[0.0; 5])).0, vec![3.0; 5]);
    }

    #[test]
    fn top_k_examples() {
        let s = scores(&[0.5, 0.00005, 0.2]);
        assert_eq!(top_k_features(&s, 3, 0.0001).unwrap(), BTreeSet::from([0, 2]));
        let low = scores(&[0.00001, 0.0]);
        assert!(top_k_features(&low, 3, 0.0001).unwrap().is_empty());
        assert_eq!(
            top_k_features(&scores(&[0.1, 0.3]), 1, 0.0001).unwrap(),
            BTreeSet::from([1])
        );
        assert_eq!(
            top_k_features(&scores(&[0.2, 0.2, 0.2]), 2, 0.0001).unwrap(),
            BTreeSet::from([0, 1])
        );
        assert!(top_k_features(&s, 0, 0.0001).is_err());
    }

    fn toy_period() -> Period {
        // feature 0 separates perfectly, feature 1 is constant
        let rows: Vec<[f64; 2]> = (0..8).map(|i| [i as f64, 3.0]).collect();
        let labels = vec![0, 0, 0, 0, 1, 1, 1, 1];
        Period::new(0, Matrix::from_rows(&rows).unwrap(), labels).unwrap()
    }

    #[test]
    fn constant_feature_has_zero_importance() {
        let p = toy_period();
        let predict = |m: &Matrix| Ok((0..m.rows()).map(|i| m.get(i, 0) / 10.0 + m.get(i, 1)).collect());
        let s = permutation_importance(predict, &p, 4, 11).unwrap();
        assert_eq!(s.values[1], 0.0);
        assert!(s.values[0] > 0.0);
        assert_eq!(s.baseline_auc, 1.0);
        assert_eq!(s, permutation_importance(predict, &p, 4, 11).unwrap());
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = toy_period();
        let predict = |m: &Matrix| Ok(vec![0.5; m.rows()]);
        assert!(permutation_importance(predict, &p, 0, 1).is_err());
        let single = Period::new(0, Matrix::zeros(2, 1), vec![1, 1]).unwrap();
        assert!(permutation_importance(predict, &single, 1, 1).is_err());
    }
}
