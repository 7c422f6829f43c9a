//! Binary decision trees grown on presorted feature columns.
//!
//! One builder serves both classification trees (weighted Gini) and the
//! second-order regression trees used by gradient boosting. Each sample
//! carries three additive statistics: a count used for `min_leaf`, and a pair
//! `(a, b)` from which the split score and leaf value are computed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::seed::SeededRng;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Criterion {
    /// `a` = sample weight, `b` = weight * label. Leaf value is `b / a`.
    Gini,
    /// `a` = hessian, `b` = gradient. Leaf value is `-b / (a + lambda)`.
    Newton { lambda: f64, min_child_hessian: f64 },
}

impl Criterion {
    #[inline]
    fn score(self, a: f64, b: f64) -> f64 {
        match self {
            Criterion::Gini => {
                if a <= 0.0 {
                    0.0
                } else {
                    (b * b + (a - b) * (a - b)) / a
                }
            }
            Criterion::Newton { lambda, .. } => b * b / (a + lambda),
        }
    }

    fn leaf_value(self, a: f64, b: f64) -> f64 {
        match self {
            Criterion::Gini => {
                if a <= 0.0 {
                    0.0
                } else {
                    (b / a).clamp(0.0, 1.0)
                }
            }
            Criterion::Newton { lambda, .. } => -b / (a + lambda),
        }
    }

    fn is_pure(self, a: f64, b: f64) -> bool {
        match self {
            Criterion::Gini => b <= 0.0 || b >= a,
            Criterion::Newton { .. } => false,
        }
    }

    #[inline]
    fn child_ok(self, a: f64) -> bool {
        match self {
            Criterion::Gini => true,
            Criterion::Newton { min_child_hessian, .. } => a >= min_child_hessian,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split (sampled without replacement when below
    /// the feature count).
    pub max_features: usize,
    /// Break exact gain ties uniformly at random instead of keeping the first.
    pub random_ties: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left as usize).max(walk(nodes, right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Row indices of a matrix sorted by each column (ties by row index).
#[derive(Debug, Clone)]
pub(crate) struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &Matrix) -> Self {
        let order = (0..x.cols())
            .map(|j| {
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| x.get(a as usize, j).total_cmp(&x.get(b as usize, j)).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { order }
    }
}

/// Per-sample statistics. Samples with `count == 0` are excluded.
pub(crate) struct SampleStats<'a> {
    pub count: &'a [f64],
    pub a: &'a [f64],
    pub b: &'a [f64],
}

struct Candidate {
    feature: usize,
    /// Number of samples (positions) going left in the feature's segment.
    left_len: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    stats: SampleStats<'a>,
    criterion: Criterion,
    params: TreeParams,
    /// Per-feature row indices, partitioned node by node.
    idx: Vec<Vec<u32>>,
    /// Feature values aligned with `idx`.
    vals: Vec<Vec<f64>>,
    goes_left: Vec<bool>,
    buf_idx: Vec<u32>,
    buf_val: Vec<f64>,
    features: Vec<usize>,
    nodes: Vec<Node>,
}

pub(crate) fn build_tree(
    x: &Matrix,
    presorted: &Presorted,
    stats: SampleStats<'_>,
    criterion: Criterion,
    params: TreeParams,
    rng: Option<&mut SeededRng>,
) -> Tree {
    let f = x.cols();
    let mut idx = Vec::with_capacity(f);
    let mut vals = Vec::with_capacity(f);
    for j in 0..f {
        let col: Vec<u32> = presorted.order[j]
            .iter()
            .copied()
            .filter(|&i| stats.count[i as usize] > 0.0)
            .collect();
        vals.push(col.iter().map(|&i| x.get(i as usize, j)).collect::<Vec<f64>>());
        idx.push(col);
    }
    let n = idx.first().map_or(0, |c| c.len());
    let mut b = Builder {
        stats,
        criterion,
        params,
        idx,
        vals,
        goes_left: vec![false; x.rows()],
        buf_idx: Vec::with_capacity(n),
        buf_val: Vec::with_capacity(n),
        features: (0..f).collect(),
        nodes: Vec::new(),
    };
    b.grow(n, rng);
    Tree { nodes: b.nodes }
}

impl Builder<'_> {
    fn totals(&self, lo: usize, hi: usize) -> (f64, f64, f64) {
        let mut t = (0.0, 0.0, 0.0);
        for &i in &self.idx[0][lo..hi] {
            let i = i as usize;
            t.0 += self.stats.count[i];
            t.1 += self.stats.a[i];
            t.2 += self.stats.b[i];
        }
        t
    }

    fn grow(&mut self, n: usize, mut rng: Option<&mut SeededRng>) {
        // (node id, lo, hi, depth)
        let mut stack = vec![(0usize, 0usize, n, 0usize)];
        self.nodes.push(Node::Leaf { value: 0.0 });
        while let Some((id, lo, hi, depth)) = stack.pop() {
            let (count, a, b) = self.totals(lo, hi);
            let leaf = Node::Leaf {
                value: self.criterion.leaf_value(a, b),
            };
            let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
            let min_leaf = self.params.min_leaf.max(1) as f64;
            if !depth_ok || count < 2.0 * min_leaf || self.criterion.is_pure(a, b) || hi - lo < 2 {
                self.nodes[id] = leaf;
                continue;
            }
            let Some(best) = self.best_split(lo, hi, (count, a, b), rng.as_deref_mut()) else {
                self.nodes[id] = leaf;
                continue;
            };
            let mid = lo + best.left_len;
            self.partition(best.feature, lo, mid, hi);
            let left = self.nodes.len();
            self.nodes.push(Node::Leaf { value: 0.0 });
            let right = self.nodes.len();
            self.nodes.push(Node::Leaf { value: 0.0 });
            self.nodes[id] = Node::Split {
                feature: best.feature as u32,
                threshold: best.threshold,
                left: left as u32,
                right: right as u32,
            };
            stack.push((right, mid, hi, depth + 1));
            stack.push((left, lo, mid, depth + 1));
        }
    }

    fn best_split(
        &mut self,
        lo: usize,
        hi: usize,
        totals: (f64, f64, f64),
        mut rng: Option<&mut SeededRng>,
    ) -> Option<Candidate> {
        let f = self.features.len();
        let k = self.params.max_features.clamp(1, f);
        if k < f {
            let r = rng.as_deref_mut().expect("feature subsampling needs an rng");
            // partial Fisher-Yates: the first k entries become the sample
            for i in 0..k {
                let j = r.random_range(i..f);
                self.features.swap(i, j);
            }
        } else {
            self.features.sort_unstable();
        }
        let (count, a_tot, b_tot) = totals;
        let parent = self.criterion.score(a_tot, b_tot);
        let tol = 1e-10 * parent.abs().max(1.0);
        let min_leaf = self.params.min_leaf.max(1) as f64;
        let mut best: Option<Candidate> = None;
        let mut ties = 0u64;
        for fi in 0..k {
            let feat = self.features[fi];
            let vals = &self.vals[feat][lo..hi];
            if vals[0] == vals[vals.len() - 1] {
                continue;
            }
            let idx = &self.idx[feat][lo..hi];
            let (mut cl, mut al, mut bl) = (0.0, 0.0, 0.0);
            for p in 0..vals.len() - 1 {
                let i = idx[p] as usize;
                cl += self.stats.count[i];
                al += self.stats.a[i];
                bl += self.stats.b[i];
                if vals[p] == vals[p + 1] {
                    continue;
                }
                let cr = count - cl;
                if cl < min_leaf || cr < min_leaf {
                    continue;
                }
                let ar = a_tot - al;
                if !self.criterion.child_ok(al) || !self.criterion.child_ok(ar) {
                    continue;
                }
                let br = b_tot - bl;
                let gain = self.criterion.score(al, bl) + self.criterion.score(ar, br) - parent;
                if gain <= tol {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(c) => gain > c.gain + tol,
                };
                let tie = !better && best.as_ref().is_some_and(|c| (gain - c.gain).abs() <= tol);
                let take = if better {
                    ties = 1;
                    true
                } else if tie && self.params.random_ties {
                    ties += 1;
                    match rng.as_deref_mut() {
                        Some(r) => r.random_range(0..ties) == 0,
                        None => false,
                    }
                } else {
                    false
                };
                if take {
                    let mut threshold = 0.5 * (vals[p] + vals[p + 1]);
                    if threshold >= vals[p + 1] {
                        threshold = vals[p];
                    }
                    let keep_gain = if better {
                        gain
                    } else {
                        best.as_ref().map_or(gain, |c| c.gain)
                    };
                    best = Some(Candidate {
                        feature: feat,
                        left_len: p + 1,
                        threshold,
                        gain: keep_gain,
                    });
                }
            }
        }
        best
    }

    /// Stable partition of every feature segment `[lo, hi)` so the samples
    /// that went left under `split_feature` occupy `[lo, mid)`.
    fn partition(&mut self, split_feature: usize, lo: usize, mid: usize, hi: usize) {
        for &i in &self.idx[split_feature][lo..mid] {
            self.goes_left[i as usize] = true;
        }
        for &i in &self.idx[split_feature][mid..hi] {
            self.goes_left[i as usize] = false;
        }
        for feat in 0..self.idx.len() {
            if feat == split_feature {
                continue;
            }
            self.buf_idx.clear();
            self.buf_val.clear();
            let idx = &mut self.idx[feat];
            let vals = &mut self.vals[feat];
            let mut w = lo;
            for p in lo..hi {
                let i = idx[p];
                if self.goes_left[i as usize] {
                    idx[w] = i;
                    vals[w] = vals[p];
                    w += 1;
                } else {
                    self.buf_idx.push(i);
                    self.buf_val.push(vals[p]);
                }
            }
            idx[w..hi].copy_from_slice(&self.buf_idx);
            vals[w..hi].copy_from_slice(&self.buf_val);
            debug_assert_eq!(w, mid);
        }
    }
}
