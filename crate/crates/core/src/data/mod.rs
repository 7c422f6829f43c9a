//! Periodized datasets and the preprocessing applied before training:
//! standardization, majority-class downsampling, bootstrap resampling and a
//! pairwise Spearman redundancy filter.

mod io;
mod synthetic;

pub use io::{load_periodized_csv, write_periodized_csv};
pub use synthetic::{generate_synthetic, generate_synthetic_detailed, SyntheticConfig};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng;
use crate::stats::average_ranks;

/// One time period: a feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub period_index: usize,
    pub features: Matrix,
    pub labels: Vec<u8>,
}

impl Period {
    pub fn new(period_index: usize, features: Matrix, labels: Vec<u8>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::ShapeMismatch {
                expected: features.rows(),
                actual: labels.len(),
            });
        }
        if let Some(row) = labels.iter().position(|&y| y > 1) {
            return Err(Error::NonBinaryLabel {
                row,
                value: labels[row].to_string(),
            });
        }
        Ok(Self {
            period_index,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.len()
    }

    pub(crate) fn require_both_classes(&self, what: &str) -> Result<()> {
        if self.has_both_classes() {
            Ok(())
        } else {
            Err(Error::SingleClass(format!(
                "{what} (period {}, {} rows, {} positive)",
                self.period_index,
                self.len(),
                self.positives()
            )))
        }
    }

    pub fn select_rows(&self, indices: &[usize]) -> Period {
        Period {
            period_index: self.period_index,
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Concatenates periods in the given order, tagging the result with `period_index`.
    pub fn concat(parts: &[&Period], period_index: usize) -> Result<Period> {
        let matrices: Vec<&Matrix> = parts.iter().map(|p| &p.features).collect();
        let features = Matrix::vstack(&matrices)?;
        let labels = parts.iter().flat_map(|p| p.labels.iter().copied()).collect();
        Ok(Period {
            period_index,
            features,
            labels,
        })
    }
}

/// An ordered, gapless sequence of periods sharing one feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodizedDataset {
    pub feature_names: Vec<String>,
    pub periods: Vec<Period>,
}

impl PeriodizedDataset {
    pub fn new(feature_names: Vec<String>, periods: Vec<Period>) -> Result<Self> {
        let ds = Self { feature_names, periods };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.feature_names.len();
        for (i, p) in self.periods.iter().enumerate() {
            if p.period_index != i {
                return Err(Error::InvalidArgument(format!(
                    "period at position {i} has index {}",
                    p.period_index
                )));
            }
            if p.feature_count() != f {
                return Err(Error::ShapeMismatch {
                    expected: f,
                    actual: p.feature_count(),
                });
            }
            if p.is_empty() {
                return Err(Error::EmptyPeriod(i));
            }
        }
        Ok(())
    }

    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn period(&self, index: usize) -> Result<&Period> {
        self.periods.get(index).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "period {index} out of range (dataset has {})",
                self.periods.len()
            ))
        })
    }

    /// Restricts every period to the given feature columns, in that order.
    pub fn select_features(&self, columns: &[usize]) -> PeriodizedDataset {
        PeriodizedDataset {
            feature_names: columns.iter().map(|&j| self.feature_names[j].clone()).collect(),
            periods: self
                .periods
                .iter()
                .map(|p| Period {
                    period_index: p.period_index,
                    features: p.features.select_columns(columns),
                    labels: p.labels.clone(),
                })
                .collect(),
        }
    }
}

/// Per-feature standardization fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Population mean and standard deviation per column. Constant columns get
    /// `std = 0` and are mapped to 0 by [`Scaler::transform`].
    pub fn fit(train: &Matrix) -> Self {
        let n = train.rows();
        let mut mean = vec![0.0; train.cols()];
        let mut std = vec![0.0; train.cols()];
        if n == 0 {
            return Self { mean, std };
        }
        for j in 0..train.cols() {
            let col = train.column(j);
            let first = col[0];
            let m = col.iter().sum::<f64>() / n as f64;
            mean[j] = m;
            if col.iter().all(|&v| v == first) {
                mean[j] = first;
                continue;
            }
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            std[j] = var.sqrt();
        }
        Self { mean, std }
    }

    pub fn transform(&self, data: &Matrix) -> Matrix {
        let mut out = data.clone();
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                let s = self.std[j];
                let v = if s > 0.0 {
                    (out.get(i, j) - self.mean[j]) / s
                } else {
                    0.0
                };
                out.set(i, j, v);
            }
        }
        out
    }
}

pub fn fit_scaler(train: &Period) -> Result<Scaler> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("cannot fit a scaler on an empty period".into()));
    }
    Ok(Scaler::fit(&train.features))
}

pub fn apply_scaler(scaler: &Scaler, data: &Period) -> Result<Period> {
    if scaler.mean.len() != data.feature_count() {
        return Err(Error::ShapeMismatch {
            expected: scaler.mean.len(),
            actual: data.feature_count(),
        });
    }
    Ok(Period {
        period_index: data.period_index,
        features: scaler.transform(&data.features),
        labels: data.labels.clone(),
    })
}

/// How training rows are drawn from a period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SamplingMode {
    Full,
    Downsample { ratio_majority_to_minority: f64 },
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub mode: SamplingMode,
    pub seed: u64,
}

impl SamplingSpec {
    pub fn apply(&self, data: &Period) -> Result<Period> {
        match self.mode {
            SamplingMode::Full => Ok(data.clone()),
            SamplingMode::Downsample {
                ratio_majority_to_minority,
            } => downsample_majority(data, ratio_majority_to_minority, self.seed),
            SamplingMode::Bootstrap => bootstrap_sample(data, self.seed),
        }
    }
}

/// Randomly drops majority-class rows (without replacement) until the
/// majority:minority ratio is at most `ratio`. Row order is preserved.
pub fn downsample_majority(data: &Period, ratio: f64, seed: u64) -> Result<Period> {
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "downsample ratio must be positive, got {ratio}"
        )));
    }
    data.require_both_classes("downsampling needs both classes")?;
    let pos = data.positives();
    let neg = data.len() - pos;
    let (majority, minority) = if neg >= pos { (0u8, pos) } else { (1u8, neg) };
    let majority_count = data.len() - minority;
    let target = ((ratio * minority as f64).floor() as usize).max(1);
    if majority_count <= target {
        return Ok(data.clone());
    }
    let mut majority_rows: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == majority).collect();
    majority_rows.shuffle(&mut rng(seed));
    let mut keep = vec![false; data.len()];
    for &i in &majority_rows[..target] {
        keep[i] = true;
    }
    let rows: Vec<usize> = (0..data.len())
        .filter(|&i| data.labels[i] != majority || keep[i])
        .collect();
    Ok(data.select_rows(&rows))
}

/// Draws `|data|` rows uniformly with replacement. The drawn row indices are
/// returned in ascending order.
pub fn bootstrap_sample(data: &Period, seed: u64) -> Result<Period> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot bootstrap an empty period".into()));
    }
    let n = data.len();
    let mut r = rng(seed);
    let mut rows: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
    rows.sort_unstable();
    Ok(data.select_rows(&rows))
}

/// Greedy pairwise Spearman filter over the concatenation of all periods.
/// Features are visited in index order; a feature is dropped when its
/// |rho| with any already-retained feature reaches `threshold`.
/// Returns the retained feature indices.
pub fn spearman_filter(dataset: &PeriodizedDataset, threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "spearman threshold must be in (0, 1], got {threshold}"
        )));
    }
    let parts: Vec<&Matrix> = dataset.periods.iter().map(|p| &p.features).collect();
    let all = Matrix::vstack(&parts)?;
    let ranked: Vec<Vec<f64>> = (0..all.cols()).map(|j| average_ranks(&all.column(j))).collect();
    let mut retained: Vec<usize> = Vec::new();
    for j in 0..all.cols() {
        let redundant = retained
            .iter()
            .any(|&r| pearson(&ranked[j], &ranked[r]).abs() >= threshold);
        if !redundant {
            retained.push(j);
        }
    }
    Ok(retained)
}

/// Pearson correlation; 0 when either side has zero variance.
pub(crate) fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn period(rows: &[[f64; 2]], labels: &[u8]) -> Period {
        Period::new(0, Matrix::from_rows(rows).unwrap(), labels.to_vec()).unwrap()
    }

    fn imbalanced(neg: usize, pos: usize) -> Period {
        let rows: Vec<[f64; 2]> = (0..neg + pos).map(|i| [i as f64, 0.0]).collect();
        let labels: Vec<u8> = (0..neg + pos).map(|i| u8::from(i >= neg)).collect();
        period(&rows, &labels)
    }

    #[test]
    fn standardizes_column() {
        let p = period(&[[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]], &[0, 1, 0]);
        let s = fit_scaler(&p).unwrap();
        let out = apply_scaler(&s, &p).unwrap();
        // mean 4, population std sqrt(8/3)
        let expected = 2.0 / (8.0f64 / 3.0).sqrt();
        let col = out.features.column(0);
        assert!((col[0] + expected).abs() < 1e-12);
        assert!(col[1].abs() < 1e-12);
        assert!((col[2] - expected).abs() < 1e-12);
        assert!((expected - 1.2247).abs() < 1e-4);
        assert_eq!(out.features.column(1), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn scaler_uses_training_statistics() {
        let train = period(&[[0.0, 1.0], [2.0, 3.0]], &[0, 1]);
        let test = period(&[[100.0, 1.0], [102.0, 3.0]], &[0, 1]);
        let s = fit_scaler(&train).unwrap();
        let out = apply_scaler(&s, &test).unwrap();
        assert_eq!(out.features.column(0), vec![99.0, 101.0]);
    }

    #[test]
    fn downsample_to_ratio() {
        let p = imbalanced(1000, 10);
        let d = downsample_majority(&p, 10.0, 3).unwrap();
        assert_eq!(d.negatives(), 100);
        assert_eq!(d.positives(), 10);
        // minority rows untouched
        let pos: Vec<f64> = d
            .labels
            .iter()
            .zip(d.features.column(0))
            .filter(|(y, _)| **y == 1)
            .map(|(_, x)| x)
            .collect();
        assert_eq!(pos, (1000..1010).map(|i| i as f64).collect::<Vec<_>>());
        // no duplicated majority rows
        let mut neg: Vec<i64> = d.features.column(0).iter().map(|&x| x as i64).collect();
        neg.dedup();
        assert_eq!(neg.len(), d.len());
        assert_eq!(d, downsample_majority(&p, 10.0, 3).unwrap());
    }

    #[test]
    fn downsample_noop_when_below_ratio() {
        let p = imbalanced(50, 10);
        assert_eq!(downsample_majority(&p, 10.0, 1).unwrap(), p);
    }

    #[test]
    fn downsample_rejects_bad_ratio() {
        let p = imbalanced(50, 10);
        assert!(downsample_majority(&p, 0.0, 1).is_err());
        assert!(downsample_majority(&p, -1.0, 1).is_err());
    }

    #[test]
    fn bootstrap_basics() {
        let one = period(&[[1.0, 2.0]], &[1]);
        assert_eq!(bootstrap_sample(&one, 9).unwrap(), one);
        let p = imbalanced(40, 10);
        let a = bootstrap_sample(&p, 5).unwrap();
        assert_eq!(a.len(), p.len());
        assert_eq!(a, bootstrap_sample(&p, 5).unwrap());
        let empty = Period::new(0, Matrix::zeros(0, 2), vec![]).unwrap();
        assert!(bootstrap_sample(&empty, 1).is_err());
    }

    #[test]
    fn bootstrap_distinct_fraction_near_one_minus_inv_e() {
        // Monte-Carlo: average distinct-row fraction over 1000 seeds.
        let p = imbalanced(180, 20);
        let total: f64 = (0..1000u64)
            .map(|s| {
                let b = bootstrap_sample(&p, s).unwrap();
                let mut ids: Vec<i64> = b.features.column(0).iter().map(|&x| x as i64).collect();
                ids.dedup();
                ids.len() as f64 / p.len() as f64
            })
            .sum();
        let mean = total / 1000.0;
        let n = p.len() as f64;
        let expected = 1.0 - (1.0 - 1.0 / n).powf(n);
        assert!((mean - expected).abs() < 0.02, "{mean} vs {expected}");
        assert!((mean - (1.0 - (-1.0f64).exp())).abs() < 0.02);
    }

    #[test]
    fn spearman_drops_duplicates() {
        let f = vec!["a".to_string(), "b".into(), "c".into()];
        let rows: Vec<[f64; 3]> = (0..30)
            .map(|i| {
                let x = i as f64;
                [x, 2.0 * x + 1.0, ((i * 7919) % 31) as f64]
            })
            .collect();
        let labels: Vec<u8> = (0..30).map(|i| (i % 2) as u8).collect();
        let p = Period::new(0, Matrix::from_rows(&rows).unwrap(), labels).unwrap();
        let ds = PeriodizedDataset::new(f, vec![p]).unwrap();
        assert_eq!(spearman_filter(&ds, 0.7).unwrap(), vec![0, 2]);
        assert!(spearman_filter(&ds, 0.0).is_err());
    }
}
