use rand::Rng;
use rayon::prelude::*;

use crate::learners::tree::{build_tree, Criterion, Presorted, SampleStats, Tree, TreeParams};
use crate::matrix::Matrix;
use crate::seed::rng;

fn label_stats(y: &[u8]) -> Vec<f64> {
    y.iter().map(|&v| f64::from(v)).collect()
}

/// Single CART classification tree on all rows and all features. Exact gain
/// ties are broken by the learner seed.
pub(crate) fn fit_cart(x: &Matrix, y: &[u8], max_depth: Option<usize>, min_leaf: usize, learner_seed: u64) -> Tree {
    let presorted = Presorted::new(x);
    let w = vec![1.0; y.len()];
    let b = label_stats(y);
    let mut r = rng(crate::seed!(learner_seed, "cart"));
    build_tree(
        x,
        &presorted,
        SampleStats {
            count: &w,
            a: &w,
            b: &b,
        },
        Criterion::Gini,
        TreeParams {
            max_depth,
            min_leaf,
            max_features: x.cols(),
            random_ties: true,
        },
        Some(&mut r),
    )
}

/// Bagged CART trees with per-split feature subsampling. Tree `t` draws its
/// bootstrap and split choices from `seed!(learner_seed, "tree", t)`.
pub(crate) fn fit_forest(
    x: &Matrix,
    y: &[u8],
    trees: usize,
    max_depth: Option<usize>,
    max_features: usize,
    min_leaf: usize,
    learner_seed: u64,
) -> Vec<Tree> {
    let presorted = Presorted::new(x);
    let labels = label_stats(y);
    let n = y.len();
    (0..trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng(crate::seed!(learner_seed, "tree", t));
            let mut counts = vec![0.0; n];
            for _ in 0..n {
                counts[r.random_range(0..n)] += 1.0;
            }
            let b: Vec<f64> = counts.iter().zip(&labels).map(|(c, l)| c * l).collect();
            build_tree(
                x,
                &presorted,
                SampleStats {
                    count: &counts,
                    a: &counts,
                    b: &b,
                },
                Criterion::Gini,
                TreeParams {
                    max_depth,
                    min_leaf,
                    max_features,
                    random_ties: true,
                },
                Some(&mut r),
            )
        })
        .collect()
}

/// Mean leaf value over trees, accumulated one tree at a time.
pub(crate) fn predict_forest(trees: &[Tree], x: &Matrix) -> Vec<f64> {
    if trees.is_empty() {
        return vec![0.5; x.rows()];
    }
    let mut sum = vec![0.0; x.rows()];
    for t in trees {
        for (i, s) in sum.iter_mut().enumerate() {
            *s += t.predict_row(x.row(i));
        }
    }
    let n = trees.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    sum
}
