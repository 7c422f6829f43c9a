use serde::{Deserialize, Serialize};

use crate::learners::logistic::sigmoid;
use crate::learners::tree::{build_tree, Criterion, Presorted, SampleStats, Tree, TreeParams};
use crate::matrix::Matrix;

/// L2 penalty on leaf values.
const LEAF_L2: f64 = 1.0;
/// Minimum hessian mass per child.
const MIN_CHILD_HESSIAN: f64 = 1.0;
const MIN_HESSIAN: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedState {
    pub base_margin: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl BoostedState {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let margin = self.base_margin + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>();
        sigmoid(margin)
    }

    pub(crate) fn predict(&self, x: &Matrix) -> Vec<f64> {
        let mut sum = vec![0.0; x.rows()];
        for t in &self.trees {
            for (i, s) in sum.iter_mut().enumerate() {
                *s += t.predict_row(x.row(i));
            }
        }
        sum.into_iter()
            .map(|s| sigmoid(self.base_margin + self.learning_rate * s))
            .collect()
    }
}

/// Gradient-boosted trees on the logistic loss with Newton leaf values.
/// Uses every row and feature in every round and keeps the first of any
/// equal-gain splits, so the result depends on the data and settings only.
pub(crate) fn fit_gbdt(x: &Matrix, y: &[u8], rounds: usize, learning_rate: f64, max_depth: usize) -> BoostedState {
    let n = y.len();
    let positives = y.iter().filter(|&&v| v == 1).count() as f64;
    let prior = (positives / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let base_margin = (prior / (1.0 - prior)).ln();
    let presorted = Presorted::new(x);
    let ones = vec![1.0; n];
    let mut margin = vec![base_margin; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        for i in 0..n {
            let p = sigmoid(margin[i]);
            grad[i] = p - f64::from(y[i]);
            hess[i] = (p * (1.0 - p)).max(MIN_HESSIAN);
        }
        let tree = build_tree(
            x,
            &presorted,
            SampleStats {
                count: &ones,
                a: &hess,
                b: &grad,
            },
            Criterion::Newton {
                lambda: LEAF_L2,
                min_child_hessian: MIN_CHILD_HESSIAN,
            },
            TreeParams {
                max_depth: Some(max_depth),
                min_leaf: 1,
                max_features: x.cols(),
                random_ties: false,
            },
            None,
        );
        for (i, m) in margin.iter_mut().enumerate() {
            *m += learning_rate * tree.predict_row(x.row(i));
        }
        trees.push(tree);
    }
    BoostedState {
        base_margin,
        learning_rate,
        trees,
    }
}
