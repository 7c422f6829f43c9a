//! Nonparametric tests and effect sizes for comparing consistency
//! distributions: Wilcoxon rank-sum, Kruskal-Wallis, Bonferroni correction
//! and Cliff's delta.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Ascending fractional ranks (1-based); tied values share the mean of their
/// positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Sizes of groups of exactly equal values.
pub(crate) fn tie_group_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        sizes.push(j - i);
        i = j;
    }
    sizes
}

fn tie_term(values: &[f64]) -> f64 {
    tie_group_sizes(values)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// X is shifted to the right of Y.
    Greater,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub corrected_p: Option<f64>,
    pub alternative: Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub fn abbreviation(self) -> &'static str {
        match self {
            Magnitude::Negligible => "N",
            Magnitude::Small => "S",
            Magnitude::Medium => "M",
            Magnitude::Large => "L",
        }
    }
}

/// Cliff's delta magnitude on `|d|`, upper bounds inclusive.
pub fn magnitude_label(d: f64) -> Magnitude {
    let a = d.abs();
    if a <= 0.147 {
        Magnitude::Negligible
    } else if a <= 0.33 {
        Magnitude::Small
    } else if a <= 0.474 {
        Magnitude::Medium
    } else {
        Magnitude::Large
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub d: f64,
    pub magnitude: Magnitude,
}

/// `d = (#{x > y} - #{x < y}) / (|x| |y|)` over all pairs.
pub fn cliffs_delta(x: &[f64], y: &[f64]) -> Result<EffectSize> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument("cliffs_delta needs non-empty samples".into()));
    }
    let mut dominance: i64 = 0;
    for a in x {
        for b in y {
            if a > b {
                dominance += 1;
            } else if a < b {
                dominance -= 1;
            }
        }
    }
    let d = dominance as f64 / (x.len() * y.len()) as f64;
    Ok(EffectSize {
        d,
        magnitude: magnitude_label(d),
    })
}

/// `p' = min(1, p * m)` with `m` the number of p-values.
pub fn bonferroni(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len() as f64;
    p_values.iter().map(|p| (p * m).min(1.0)).collect()
}

/// Fills `corrected_p` on each result with its Bonferroni-corrected value.
pub fn apply_bonferroni(results: &mut [TestResult]) {
    let ps: Vec<f64> = results.iter().map(|r| r.p_value).collect();
    for (r, c) in results.iter_mut().zip(bonferroni(&ps)) {
        r.corrected_p = Some(c);
    }
}

/// Combined sample size at or below which tie-free samples use the exact
/// null distribution.
pub const EXACT_WRS_MAX_N: usize = 20;

/// Wilcoxon rank-sum (Mann-Whitney) test. The statistic is `U` for `x`.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64], alternative: Alternative) -> Result<TestResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "wilcoxon_rank_sum needs at least 2 observations per sample, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n1 = x.len();
    let n2 = y.len();
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = average_ranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let ties = tie_term(&pooled);
    let p_value = if n1 + n2 <= EXACT_WRS_MAX_N && ties == 0.0 {
        exact_rank_sum_p(n1, n2, u, alternative)
    } else {
        normal_rank_sum_p(n1, n2, u, ties, alternative)
    };
    Ok(TestResult {
        statistic: u,
        p_value,
        corrected_p: None,
        alternative,
    })
}

/// Null distribution of `U` by counting size-`n1` subsets of ranks `1..=N`
/// per rank sum.
fn exact_rank_sum_p(n1: usize, n2: usize, u: f64, alternative: Alternative) -> f64 {
    let n = n1 + n2;
    let max_sum = n * (n + 1) / 2;
    // counts[k][s] = number of k-subsets of processed ranks summing to s
    let mut counts = vec![vec![0u64; max_sum + 1]; n1 + 1];
    counts[0][0] = 1;
    for rank in 1..=n {
        for k in (1..=n1.min(rank)).rev() {
            for s in (rank..=max_sum).rev() {
                counts[k][s] += counts[k - 1][s - rank];
            }
        }
    }
    let offset = n1 * (n1 + 1) / 2;
    let total: u64 = counts[n1].iter().sum();
    let u_obs = u.round() as usize;
    let (mut ge, mut le) = (0u64, 0u64);
    for (s, &c) in counts[n1].iter().enumerate() {
        if c == 0 {
            continue;
        }
        let us = s - offset;
        if us >= u_obs {
            ge += c;
        }
        if us <= u_obs {
            le += c;
        }
    }
    let p_ge = ge as f64 / total as f64;
    let p_le = le as f64 / total as f64;
    match alternative {
        Alternative::Greater => p_ge,
        Alternative::TwoSided => (2.0 * p_ge.min(p_le)).min(1.0),
    }
}

fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn normal_rank_sum_p(n1: usize, n2: usize, u: f64, ties: f64, alternative: Alternative) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    let n = a + b;
    let mean = a * b / 2.0;
    let var = a * b / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    match alternative {
        Alternative::Greater => normal_sf((u - mean - 0.5) / sd),
        Alternative::TwoSided => {
            let z = ((u - mean).abs() - 0.5).max(0.0) / sd;
            (2.0 * normal_sf(z)).min(1.0)
        }
    }
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(df / 2.0, x / 2.0)
}

/// Kruskal-Wallis H test with tie correction; p from chi-square with
/// `groups - 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "kruskal_wallis needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::InvalidArgument(format!(
            "kruskal_wallis needs at least 2 observations per group, got {}",
            g.len()
        )));
    }
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let n = pooled.len() as f64;
    let ranks = average_ranks(&pooled);
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h_raw = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
    let correction = 1.0 - tie_term(&pooled) / (n * n * n - n);
    let h = if correction <= 0.0 {
        0.0
    } else {
        (h_raw / correction).max(0.0)
    };
    Ok(TestResult {
        statistic: h,
        p_value: chi_square_sf(h, (groups.len() - 1) as f64),
        corrected_p: None,
        alternative: Alternative::TwoSided,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
        assert!(average_ranks(&[]).is_empty());
    }

    #[test]
    fn wrs_exact_small_example() {
        let r = wilcoxon_rank_sum(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0], Alternative::Greater).unwrap();
        assert!((r.p_value - 0.05).abs() < 1e-15);
        assert_eq!(r.statistic, 9.0);
        let flipped = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::Greater).unwrap();
        assert!((flipped.p_value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wrs_identical_samples_not_significant() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let r = wilcoxon_rank_sum(&x, &x, Alternative::Greater).unwrap();
        assert!(r.p_value >= 0.5);
        let c = [0.5, 0.5, 0.5];
        let r = wilcoxon_rank_sum(&c, &c, Alternative::Greater).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn wrs_rejects_tiny_samples() {
        assert!(wilcoxon_rank_sum(&[1.0], &[1.0, 2.0], Alternative::Greater).is_err());
    }

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni(&[0.01]), vec![0.01]);
        let b = bonferroni(&[0.01, 0.02, 0.03]);
        for (got, want) in b.iter().zip([0.03, 0.06, 0.09]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(bonferroni(&[0.5, 0.9]), vec![1.0, 1.0]);
    }

    #[test]
    fn cliffs_examples() {
        let e = cliffs_delta(&[1.0], &[1.0]).unwrap();
        assert_eq!((e.d, e.magnitude), (0.0, Magnitude::Negligible));
        let e = cliffs_delta(&[5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((e.d, e.magnitude), (1.0, Magnitude::Large));
        let e = cliffs_delta(&[1.0, 3.0], &[2.0]).unwrap();
        assert_eq!(e.d, 0.0);
        assert!(cliffs_delta(&[], &[1.0]).is_err());
    }

    #[test]
    fn magnitude_boundaries() {
        assert_eq!(magnitude_label(0.147), Magnitude::Negligible);
        assert_eq!(magnitude_label(0.1471), Magnitude::Small);
        assert_eq!(magnitude_label(0.33), Magnitude::Small);
        assert_eq!(magnitude_label(0.4), Magnitude::Medium);
        assert_eq!(magnitude_label(0.474), Magnitude::Medium);
        assert_eq!(magnitude_label(-0.6), Magnitude::Large);
    }

    #[test]
    fn kw_constant_groups() {
        let g = [2.0, 2.0, 2.0];
        let r = kruskal_wallis(&[&g, &g, &g]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(kruskal_wallis(&[&g]).is_err());
    }

    #[test]
    fn kw_hand_example() {
        // rank sums 3, 7, 11 over N = 6
        let r = kruskal_wallis(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]).unwrap();
        let h = 12.0 / 42.0 * (9.0 / 2.0 + 49.0 / 2.0 + 121.0 / 2.0) - 21.0;
        assert!((r.statistic - h).abs() < 1e-12);
        // df = 2 has a closed-form tail
        assert!((r.p_value - (-h / 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn chi_square_reference_values() {
        assert!((chi_square_sf(3.841_458_820_694_124, 1.0) - 0.05).abs() < 1e-10);
        assert!((chi_square_sf(5.991_464_547_107_979, 2.0) - 0.05).abs() < 1e-10);
        assert!((chi_square_sf(7.814_727_903_251_178, 3.0) - 0.05).abs() < 1e-10);
    }
}
