use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Period, PeriodizedDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng;

/// Parameters of a synthetic drifting binary-classification dataset.
///
/// Features are i.i.d. standard normal. Labels are Bernoulli draws from a
/// logistic model `sigmoid(b_t + coef_t . x + s * (x0 * x1 + x2^2 - 1))`, where
/// `b_t` is calibrated per period so the expected positive fraction equals
/// `positive_rate`, and `s` is `nonlinearity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub periods: usize,
    pub rows: usize,
    pub features: usize,
    /// Number of leading features with nonzero coefficients.
    pub informative: usize,
    pub positive_rate: f64,
    /// Std of the per-period Gaussian random walk on nonzero coefficients.
    pub drift: f64,
    pub nonlinearity: f64,
    /// Explicit coefficient vector; overrides `informative` when present.
    pub coefficients: Option<Vec<f64>>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            periods: 6,
            rows: 2000,
            features: 10,
            informative: 4,
            positive_rate: 0.09,
            drift: 0.0,
            nonlinearity: 0.0,
            coefficients: None,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.periods < 2 {
            return bad(format!("synthetic periods must be >= 2, got {}", self.periods));
        }
        if self.rows < 20 {
            return bad(format!("synthetic rows must be >= 20, got {}", self.rows));
        }
        if self.features < 2 {
            return bad(format!("synthetic features must be >= 2, got {}", self.features));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return bad(format!("positive_rate must be in (0, 1), got {}", self.positive_rate));
        }
        if !(self.drift >= 0.0) || !self.drift.is_finite() {
            return bad(format!("drift must be >= 0, got {}", self.drift));
        }
        if !self.nonlinearity.is_finite() {
            return bad("nonlinearity must be finite".into());
        }
        if self.nonlinearity != 0.0 && self.features < 3 {
            return bad("nonlinear label rule needs at least 3 features".into());
        }
        match &self.coefficients {
            Some(c) if c.len() != self.features => bad(format!(
                "coefficients has {} entries for {} features",
                c.len(),
                self.features
            )),
            Some(c) if c.iter().any(|v| !v.is_finite()) => bad("coefficients must be finite".into()),
            None if self.informative > self.features => bad(format!(
                "informative ({}) exceeds features ({})",
                self.informative, self.features
            )),
            _ => Ok(()),
        }
    }
}

pub fn generate_synthetic(config: &SyntheticConfig, seed: u64) -> Result<PeriodizedDataset> {
    generate_synthetic_detailed(config, seed).map(|(ds, _)| ds)
}

/// Like [`generate_synthetic`], also returning each period's coefficient vector.
pub fn generate_synthetic_detailed(config: &SyntheticConfig, seed: u64) -> Result<(PeriodizedDataset, Vec<Vec<f64>>)> {
    config.validate()?;
    let mut r = rng(seed);
    let f = config.features;
    let mut coef = match &config.coefficients {
        Some(c) => c.clone(),
        None => (0..f)
            .map(|j| {
                if j < config.informative {
                    let mag = r.random_range(0.5..2.0);
                    if r.random_bool(0.5) {
                        mag
                    } else {
                        -mag
                    }
                } else {
                    0.0
                }
            })
            .collect(),
    };

    let mut periods = Vec::with_capacity(config.periods);
    let mut coefficients = Vec::with_capacity(config.periods);
    for t in 0..config.periods {
        if t > 0 && config.drift > 0.0 {
            for c in coef.iter_mut().filter(|c| **c != 0.0) {
                let step: f64 = StandardNormal.sample(&mut r);
                *c += config.drift * step;
            }
        }
        let mut data = Vec::with_capacity(config.rows * f);
        for _ in 0..config.rows * f {
            data.push(StandardNormal.sample(&mut r));
        }
        let x = Matrix::new(config.rows, f, data)?;
        let raw: Vec<f64> = (0..config.rows)
            .map(|i| {
                let row = x.row(i);
                let linear: f64 = row.iter().zip(&coef).map(|(a, b)| a * b).sum();
                let nonlinear = if config.nonlinearity != 0.0 {
                    config.nonlinearity * (row[0] * row[1] + row[2] * row[2] - 1.0)
                } else {
                    0.0
                };
                linear + nonlinear
            })
            .collect();
        let intercept = calibrate_intercept(&raw, config.positive_rate);
        let probs: Vec<f64> = raw.iter().map(|z| sigmoid(z + intercept)).collect();
        let mut labels: Vec<u8> = probs.iter().map(|&p| u8::from(r.random_bool(p))).collect();
        ensure_both_classes(&mut labels, &probs);
        periods.push(Period::new(t, x, labels)?);
        coefficients.push(coef.clone());
    }
    let names = (0..f).map(|j| format!("x{j}")).collect();
    Ok((PeriodizedDataset::new(names, periods)?, coefficients))
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Bisection on `b` so that `mean(sigmoid(raw + b)) = target`.
fn calibrate_intercept(raw: &[f64], target: f64) -> f64 {
    let mean_at = |b: f64| raw.iter().map(|z| sigmoid(z + b)).sum::<f64>() / raw.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// Periods must be usable for training; flip the most likely row of the
// missing class when a draw comes out single-class.
fn ensure_both_classes(labels: &mut [u8], probs: &[f64]) {
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 {
        let i = argmax(probs.iter().copied());
        labels[i] = 1;
    } else if positives == labels.len() {
        let i = argmax(probs.iter().map(|p| -p));
        labels[i] = 0;
    }
}

fn argmax(it: impl Iterator<Item = f64>) -> usize {
    it.enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (i, v)| if v > best.1 { (i, v) } else { best },
        )
        .0
}
