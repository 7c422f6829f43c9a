//! Model scoring (AUC, MSE) and interpretation agreement measures
//! (Kendall's tau-b, Kendall's W, top-K overlap).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpret::{top_k_features, ImportanceScores};
use crate::stats::{average_ranks, tie_group_sizes};

/// Area under the ROC curve: the probability that a random positive scores
/// above a random negative, counting ties as one half.
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::ShapeMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite);
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass(format!(
            "auc needs both classes ({pos} positive, {neg} negative)"
        )));
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(y, _)| **y == 1)
        .map(|(_, r)| r)
        .sum();
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Mean squared difference between predicted probabilities and 0/1 outcomes.
pub fn mse(probabilities: &[f64], labels: &[u8]) -> Result<f64> {
    if probabilities.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: labels.len(),
            actual: probabilities.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("mse of an empty sample".into()));
    }
    let sum: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(p, &y)| {
            let d = p - f64::from(y);
            d * d
        })
        .sum();
    Ok(sum / labels.len() as f64)
}

/// Agreement strength for Kendall's tau / W values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgreementLabel {
    Weak,
    Moderate,
    Strong,
}

impl std::fmt::Display for AgreementLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AgreementLabel::Weak => "weak",
            AgreementLabel::Moderate => "moderate",
            AgreementLabel::Strong => "strong",
        })
    }
}

/// `<= 0.3` Weak, `(0.3, 0.6]` Moderate, `> 0.6` Strong. Negative values are Weak.
pub fn agreement_label(value: f64) -> AgreementLabel {
    if value <= 0.3 {
        AgreementLabel::Weak
    } else if value <= 0.6 {
        AgreementLabel::Moderate
    } else {
        AgreementLabel::Strong
    }
}

/// Kendall's tau-b between two rank vectors.
///
/// When both vectors are entirely tied the value is 1; when only one is,
/// the value is 0.
pub fn kendalls_tau(rank_a: impl AsRef<[f64]>, rank_b: impl AsRef<[f64]>) -> Result<(f64, AgreementLabel)> {
    let (a, b) = (rank_a.as_ref(), rank_b.as_ref());
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "kendalls_tau needs at least 2 items, got {}",
            a.len()
        )));
    }
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut tied_a, mut tied_b) = (0i64, 0i64);
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let da = a[i].total_cmp(&a[j]) as i64;
            let db = b[i].total_cmp(&b[j]) as i64;
            if da == 0 {
                tied_a += 1;
            }
            if db == 0 {
                tied_b += 1;
            }
            match da * db {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }
    let n = a.len() as i64;
    let n0 = n * (n - 1) / 2;
    let tau = match (tied_a == n0, tied_b == n0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => {
            let denom = (((n0 - tied_a) * (n0 - tied_b)) as f64).sqrt();
            (concordant - discordant) as f64 / denom
        }
    };
    Ok((tau, agreement_label(tau)))
}

/// Kendall's coefficient of concordance with the tied-rank correction:
/// `W = 12 S / (m^2 (n^3 - n) - m * sum T)`.
///
/// Returns 1 when the denominator vanishes, which only happens when every
/// ranking is fully tied (and therefore all rankings are identical).
pub fn kendalls_w<R: AsRef<[f64]>>(rankings: &[R]) -> Result<f64> {
    let m = rankings.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "kendalls_w needs at least 2 rankings, got {m}"
        )));
    }
    let n = rankings[0].as_ref().len();
    if let Some(r) = rankings.iter().find(|r| r.as_ref().len() != n) {
        return Err(Error::ShapeMismatch {
            expected: n,
            actual: r.as_ref().len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "kendalls_w needs at least 2 items, got {n}"
        )));
    }
    let mut rank_sums = vec![0.0; n];
    let mut tie_total = 0.0;
    for r in rankings {
        for (acc, v) in rank_sums.iter_mut().zip(r.as_ref()) {
            *acc += v;
        }
        tie_total += tie_group_sizes(r.as_ref())
            .into_iter()
            .map(|t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum::<f64>();
    }
    let (mf, nf) = (m as f64, n as f64);
    let mean = rank_sums.iter().sum::<f64>() / nf;
    let s: f64 = rank_sums.iter().map(|r| (r - mean) * (r - mean)).sum();
    let denom = mf * mf * (nf * nf * nf - nf) - mf * tie_total;
    if denom <= 0.0 {
        return Ok(1.0);
    }
    Ok((12.0 * s / denom).clamp(0.0, 1.0))
}

/// Intersection-over-union of the models' top-`k` non-negligible feature
/// sets; 1 when every set is empty.
pub fn top_k_overlap(score_sets: &[ImportanceScores], k: usize, negligible: f64) -> Result<f64> {
    if score_sets.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "top_k_overlap needs at least 2 score sets, got {}",
            score_sets.len()
        )));
    }
    let f = score_sets[0].values.len();
    if let Some(s) = score_sets.iter().find(|s| s.values.len() != f) {
        return Err(Error::ShapeMismatch {
            expected: f,
            actual: s.values.len(),
        });
    }
    let sets: Vec<BTreeSet<usize>> = score_sets
        .iter()
        .map(|s| top_k_features(s, k, negligible))
        .collect::<Result<_>>()?;
    let union: BTreeSet<usize> = sets.iter().flatten().copied().collect();
    if union.is_empty() {
        return Ok(1.0);
    }
    let inter = union.iter().filter(|j| sets.iter().all(|s| s.contains(j))).count();
    Ok(inter as f64 / union.len() as f64)
}
