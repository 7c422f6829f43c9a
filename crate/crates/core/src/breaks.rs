//! Jenks natural breaks: optimal contiguous partitioning of one-dimensional
//! values by within-cluster sum of squares, solved exactly by dynamic
//! programming.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreaksResult {
    pub k: usize,
    /// Upper (inclusive) value of each cluster except the last, ascending.
    pub boundaries: Vec<f64>,
    /// Cluster index per input value, in input order. Cluster 0 holds the
    /// smallest values.
    pub assignment: Vec<usize>,
    pub wss: f64,
}

impl BreaksResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == cluster)
            .collect()
    }
}

/// Stable ascending order by value, then by input position.
fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// `cost[i][j]` = sum of squared deviations of `sorted[i..j]`, via Welford
/// updates for each start `i`.
fn segment_costs(sorted: &[f64]) -> Vec<Vec<f64>> {
    let n = sorted.len();
    let mut cost = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        let (mut mean, mut m2) = (0.0, 0.0);
        for j in i..n {
            let count = (j - i + 1) as f64;
            let delta = sorted[j] - mean;
            mean += delta / count;
            m2 += delta * (sorted[j] - mean);
            cost[i][j + 1] = m2;
        }
    }
    cost
}

struct Table {
    /// best[c][j]: optimal cost of the first j sorted values in c clusters.
    best: Vec<Vec<f64>>,
    /// start[c][j]: start position of the last cluster in that optimum.
    start: Vec<Vec<usize>>,
}

fn solve(sorted: &[f64], k_max: usize) -> Table {
    let n = sorted.len();
    let cost = segment_costs(sorted);
    let mut best = vec![vec![f64::INFINITY; n + 1]; k_max + 1];
    let mut start = vec![vec![0usize; n + 1]; k_max + 1];
    best[0][0] = 0.0;
    for c in 1..=k_max {
        for j in c..=n {
            let mut b = f64::INFINITY;
            let mut arg = c - 1;
            // later starts win ties, keeping equal values in the lower cluster
            for i in (c - 1)..j {
                let v = best[c - 1][i] + cost[i][j];
                if v <= b {
                    b = v;
                    arg = i;
                }
            }
            best[c][j] = b;
            start[c][j] = arg;
        }
    }
    Table { best, start }
}

fn check(values: &[f64], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if k > values.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the number of values ({})",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Optimal contiguous partition of the sorted values into `k` clusters.
pub fn jenks_breaks(values: &[f64], k: usize) -> Result<BreaksResult> {
    check(values, k)?;
    let order = sorted_order(values);
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let table = solve(&sorted, k);
    let n = sorted.len();
    let mut cuts = vec![n];
    let mut end = n;
    for c in (1..=k).rev() {
        end = table.start[c][end];
        cuts.push(end);
    }
    cuts.reverse();
    let mut assignment = vec![0; n];
    let mut boundaries = Vec::with_capacity(k - 1);
    for c in 0..k {
        for &i in &order[cuts[c]..cuts[c + 1]] {
            assignment[i] = c;
        }
        if c + 1 < k {
            boundaries.push(sorted[cuts[c + 1] - 1]);
        }
    }
    let wss = wss(values, &assignment, k)?;
    Ok(BreaksResult {
        k,
        boundaries,
        assignment,
        wss,
    })
}

/// Sum over clusters of squared deviations from the cluster mean.
pub fn wss(values: &[f64], assignment: &[usize], k: usize) -> Result<f64> {
    if values.len() != assignment.len() {
        return Err(Error::ShapeMismatch {
            expected: values.len(),
            actual: assignment.len(),
        });
    }
    if let Some(&c) = assignment.iter().find(|&&c| c >= k) {
        return Err(Error::InvalidArgument(format!(
            "cluster index {c} out of range for k = {k}"
        )));
    }
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&v, &c) in values.iter().zip(assignment) {
        sums[c] += v;
        counts[c] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect();
    Ok(values
        .iter()
        .zip(assignment)
        .map(|(v, &c)| (v - means[c]) * (v - means[c]))
        .sum())
}

/// Optimal WSS for every `k` in `1..=k_max`.
pub fn elbow_scan(values: &[f64], k_max: usize) -> Result<Vec<(usize, f64)>> {
    check(values, k_max)?;
    let order = sorted_order(values);
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let table = solve(&sorted, k_max);
    let n = sorted.len();
    Ok((1..=k_max).map(|k| (k, table.best[k][n])).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterStatistic {
    #[default]
    Median,
    Mean,
}

impl ClusterStatistic {
    pub fn of(self, values: &[f64]) -> f64 {
        match self {
            ClusterStatistic::Median => median(values),
            ClusterStatistic::Mean => values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Performance rank of each cluster (1 = highest statistic). Element `c` is
/// the rank of cluster `c`.
pub fn rank_clusters_by_performance(breaks: &BreaksResult, values: &[f64], statistic: ClusterStatistic) -> Vec<usize> {
    let stats: Vec<f64> = (0..breaks.k)
        .map(|c| {
            let members: Vec<f64> = breaks.members(c).into_iter().map(|i| values[i]).collect();
            statistic.of(&members)
        })
        .collect();
    let mut order: Vec<usize> = (0..breaks.k).collect();
    order.sort_by(|&a, &b| stats[b].total_cmp(&stats[a]).then(b.cmp(&a)));
    let mut rank = vec![0; breaks.k];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r + 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_obvious_groups() {
        let v = [1.0, 2.0, 3.0, 10.0, 11.0, 12.0];
        let b = jenks_breaks(&v, 2).unwrap();
        assert_eq!(b.assignment, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(b.boundaries, vec![3.0]);
        assert!((b.wss - 4.0).abs() < 1e-12);
    }

    #[test]
    fn k_extremes() {
        let v = [0.3, 0.9, 0.1, 0.5];
        let b = jenks_breaks(&v, 4).unwrap();
        assert_eq!(b.wss, 0.0);
        assert_eq!(b.assignment, vec![1, 3, 0, 2]);
        let one = jenks_breaks(&v, 1).unwrap();
        let mean = v.iter().sum::<f64>() / 4.0;
        let total: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
        assert!((one.wss - total).abs() < 1e-12);
        assert!(jenks_breaks(&v, 5).is_err());
        assert!(jenks_breaks(&v, 0).is_err());
    }

    #[test]
    fn wss_examples() {
        assert_eq!(wss(&[1.0, 5.0], &[0, 1], 2).unwrap(), 0.0);
        assert_eq!(wss(&[0.0, 2.0], &[0, 0], 1).unwrap(), 2.0);
        assert!(wss(&[0.0, 2.0], &[0, 2], 2).is_err());
        assert!(wss(&[0.0], &[0, 0], 1).is_err());
    }

    #[test]
    fn elbow_is_nonincreasing_and_ends_at_zero() {
        let v = [0.61, 0.72, 0.55, 0.81, 0.8, 0.79, 0.6, 0.7];
        let scan = elbow_scan(&v, v.len()).unwrap();
        assert!(scan.windows(2).all(|w| w[1].1 <= w[0].1));
        assert_eq!(scan.last().unwrap().1, 0.0);
    }

    #[test]
    fn cluster_ranking() {
        let v = [0.6, 0.9, 0.61, 0.91];
        let b = jenks_breaks(&v, 2).unwrap();
        assert_eq!(
            rank_clusters_by_performance(&b, &v, ClusterStatistic::Median),
            vec![2, 1]
        );
        let one = jenks_breaks(&v, 1).unwrap();
        assert_eq!(rank_clusters_by_performance(&one, &v, ClusterStatistic::Mean), vec![1]);
    }

    #[test]
    fn ties_stay_in_lower_cluster() {
        let v = [1.0, 1.0, 1.0, 5.0];
        let b = jenks_breaks(&v, 2).unwrap();
        assert_eq!(b.assignment, vec![0, 0, 0, 1]);
    }
}
