//! Brute-force reference implementations shared by the test targets.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use interp_consistency::breaks::jenks_breaks;
use interp_consistency::interpret::ImportanceScores;
use interp_consistency::metrics::{agreement_label, auc, kendalls_tau, kendalls_w, mse, top_k_overlap, AgreementLabel};
use interp_consistency::stats::{
    cliffs_delta, kruskal_wallis, magnitude_label, wilcoxon_rank_sum, Alternative, Magnitude,
};
use rand::{Rng, SeedableRng};

pub type Check = Result<String, String>;

fn within(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, want {want}"))
    }
}

pub fn frac_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let below = v.iter().filter(|&&b| b < a).count() as f64;
            let same = v.iter().filter(|&&b| b == a).count() as f64;
            below + (same + 1.0) / 2.0
        })
        .collect()
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn tau_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let (mut c, mut d, mut ta, mut tb) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let s = sign(a[i] - a[j]) * sign(b[i] - b[j]);
            if a[i] == a[j] {
                ta += 1.0;
            }
            if b[i] == b[j] {
                tb += 1.0;
            }
            if s > 0.0 {
                c += 1.0;
            } else if s < 0.0 {
                d += 1.0;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = ((n0 - ta) * (n0 - tb)).sqrt();
    if n0 == ta && n0 == tb {
        1.0
    } else if denom == 0.0 {
        0.0
    } else {
        (c - d) / denom
    }
}

/// All vectors of length `n` over `1..=levels`.
pub fn grid(n: usize, levels: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (1..=levels).map(move |x| {
                    let mut w = v.clone();
                    w.push(x as f64);
                    w
                })
            })
            .collect();
    }
    out
}

pub fn permutations(n: usize) -> Vec<Vec<f64>> {
    fn go(rest: Vec<f64>, acc: Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if rest.is_empty() {
            out.push(acc);
            return;
        }
        for i in 0..rest.len() {
            let mut r = rest.clone();
            let x = r.remove(i);
            let mut a = acc.clone();
            a.push(x);
            go(r, a, out);
        }
    }
    let mut out = Vec::new();
    go((1..=n).map(|x| x as f64).collect(), Vec::new(), &mut out);
    out
}

pub fn w_oracle(rankings: &[Vec<f64>]) -> f64 {
    let m = rankings.len() as f64;
    let n = rankings[0].len();
    let totals: Vec<f64> = (0..n).map(|j| rankings.iter().map(|r| r[j]).sum()).collect();
    let mean = m * (n as f64 + 1.0) / 2.0;
    let s: f64 = totals.iter().map(|t| (t - mean).powi(2)).sum();
    let mut ties = 0.0;
    for r in rankings {
        let mut counts = HashMap::new();
        for v in r {
            *counts.entry(v.to_bits()).or_insert(0.0) += 1.0;
        }
        ties += counts.values().map(|t: &f64| t.powi(3) - t).sum::<f64>();
    }
    let nf = n as f64;
    let denom = m * m * (nf.powi(3) - nf) - m * ties;
    if denom == 0.0 {
        1.0
    } else {
        12.0 * s / denom
    }
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

pub fn scores(values: &[f64]) -> ImportanceScores {
    ImportanceScores {
        values: values.to_vec(),
        baseline_auc: 0.5,
        n_repeats: 1,
        seed: 0,
    }
}

/// A feature is in the top `k` when fewer than `k` eligible features beat it.
pub fn top_k_oracle(v: &[f64], k: usize, negligible: f64) -> Vec<usize> {
    let eligible: Vec<usize> = (0..v.len()).filter(|&j| v[j] >= negligible).collect();
    eligible
        .iter()
        .copied()
        .filter(|&j| {
            eligible
                .iter()
                .filter(|&&i| v[i] > v[j] || (v[i] == v[j] && i < j))
                .count()
                < k
        })
        .collect()
}

pub fn u_statistic(x: &[f64], y: &[f64]) -> f64 {
    let mut u = 0.0;
    for a in x {
        for b in y {
            if a > b {
                u += 1.0;
            } else if a == b {
                u += 0.5;
            }
        }
    }
    u
}

/// p-value from enumerating every assignment of `|x|` pooled positions to `x`.
pub fn exact_p_oracle(x: &[f64], y: &[f64], alternative: Alternative) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let n = pooled.len();
    let u_obs = u_statistic(x, y);
    let (mut ge, mut le, mut total) = (0.0, 0.0, 0.0);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != x.len() {
            continue;
        }
        let xs: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| pooled[i]).collect();
        let ys: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 0).map(|i| pooled[i]).collect();
        let u = u_statistic(&xs, &ys);
        total += 1.0;
        if u >= u_obs {
            ge += 1.0;
        }
        if u <= u_obs {
            le += 1.0;
        }
    }
    match alternative {
        Alternative::Greater => ge / total,
        Alternative::TwoSided => (2.0 * f64::min(ge, le) / total).min(1.0),
    }
}

/// H as the ratio of between-group to total rank variance, which carries
/// the tie correction implicitly.
pub fn kw_oracle(groups: &[&[f64]]) -> f64 {
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let ranks = frac_ranks(&pooled);
    let n = pooled.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let total: f64 = ranks.iter().map(|r| (r - mean).powi(2)).sum();
    let mut between = 0.0;
    let mut off = 0;
    for g in groups {
        let r = &ranks[off..off + g.len()];
        let m = r.iter().sum::<f64>() / g.len() as f64;
        between += g.len() as f64 * (m - mean).powi(2);
        off += g.len();
    }
    if total == 0.0 {
        0.0
    } else {
        (n - 1.0) * between / total
    }
}

pub fn sse(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum()
}

/// Minimum WSS over every split of sorted values into `k` contiguous runs.
pub fn jenks_oracle(sorted: &[f64], k: usize) -> f64 {
    if k == 1 {
        return sse(sorted);
    }
    (1..=sorted.len() - (k - 1))
        .map(|cut| sse(&sorted[..cut]) + jenks_oracle(&sorted[cut..], k - 1))
        .fold(f64::INFINITY, f64::min)
}

pub fn check_tau(tol: f64) -> Check {
    let mut cases = 0;
    for n in 2..=5 {
        let perms = permutations(n);
        for a in &perms {
            for b in &perms {
                let (t, _) = kendalls_tau(a, b).map_err(|e| e.to_string())?;
                within(&format!("tau {a:?} {b:?}"), t, tau_oracle(a, b), tol)?;
                cases += 1;
            }
        }
    }
    let tied = grid(5, 3);
    for a in &tied {
        for b in tied.iter().step_by(5) {
            let (t, _) = kendalls_tau(frac_ranks(a), frac_ranks(b)).map_err(|e| e.to_string())?;
            within(&format!("tau {a:?} {b:?}"), t, tau_oracle(a, b), tol)?;
            cases += 1;
        }
    }
    Ok(format!("tau {cases} cases"))
}

pub fn check_w(tol: f64) -> Check {
    let mut cases = 0;
    for n in 2..=4 {
        let perms = permutations(n);
        for a in &perms {
            for b in &perms {
                for c in &perms {
                    let rs = vec![a.clone(), b.clone(), c.clone()];
                    let w = kendalls_w(&rs).map_err(|e| e.to_string())?;
                    within(&format!("W {rs:?}"), w, w_oracle(&rs), tol)?;
                    let rho = (spearman(a, b) + spearman(a, c) + spearman(b, c)) / 3.0;
                    within(&format!("W via mean rho {rs:?}"), w, (2.0 * rho + 1.0) / 3.0, tol)?;
                    cases += 1;
                }
            }
        }
    }
    let tied = grid(4, 3);
    for a in &tied {
        for b in tied.iter().step_by(7) {
            let rs = vec![frac_ranks(a), frac_ranks(b)];
            let w = kendalls_w(&rs).map_err(|e| e.to_string())?;
            within(&format!("W {rs:?}"), w, w_oracle(&rs), tol)?;
            cases += 1;
        }
    }
    Ok(format!("W {cases} cases"))
}

pub fn check_top_k(tol: f64) -> Check {
    let levels = [0.0, 0.00005, 0.0001, 0.02, 0.05];
    let vectors: Vec<Vec<f64>> = grid(4, levels.len())
        .into_iter()
        .map(|g| g.iter().map(|&i| levels[i as usize - 1]).collect())
        .collect();
    let mut cases = 0;
    for a in vectors.iter().step_by(3) {
        for b in vectors.iter().step_by(5) {
            for k in 1..=4 {
                let sa = top_k_oracle(a, k, 0.0001);
                let sb = top_k_oracle(b, k, 0.0001);
                let union: BTreeSet<_> = sa.iter().chain(&sb).collect();
                let inter = sa.iter().filter(|j| sb.contains(j)).count();
                let want = if union.is_empty() {
                    1.0
                } else {
                    inter as f64 / union.len() as f64
                };
                let got = top_k_overlap(&[scores(a), scores(b)], k, 0.0001).map_err(|e| e.to_string())?;
                within(&format!("top-{k} {a:?} {b:?}"), got, want, tol)?;
                cases += 1;
            }
        }
    }
    Ok(format!("top-k {cases} cases"))
}

pub fn check_auc(tol: f64) -> Check {
    let mut cases = 0;
    for n in 2..=8 {
        for bits in 1u32..(1 << n) - 1 {
            let labels: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
            for s in grid(n, 3).iter().step_by(1 + n * n) {
                let (mut wins, mut pairs) = (0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        if labels[i] == 1 && labels[j] == 0 {
                            pairs += 1.0;
                            wins += match s[i].partial_cmp(&s[j]) {
                                Some(std::cmp::Ordering::Greater) => 1.0,
                                Some(std::cmp::Ordering::Equal) => 0.5,
                                _ => 0.0,
                            };
                        }
                    }
                }
                let got = auc(&labels, s).map_err(|e| e.to_string())?;
                within(&format!("auc {labels:?} {s:?}"), got, wins / pairs, tol)?;
                cases += 1;
            }
        }
    }
    Ok(format!("auc {cases} cases"))
}

pub fn check_mse(tol: f64) -> Check {
    let probs = [0.0, 0.125, 0.25, 0.5, 0.75, 0.875, 1.0, 0.3];
    let mut cases = 0;
    for labels in grid(8, 2) {
        let y: Vec<u8> = labels.iter().map(|&v| (v - 1.0) as u8).collect();
        let want = probs
            .iter()
            .zip(&y)
            .map(|(p, &t)| (p - f64::from(t)).powi(2))
            .sum::<f64>()
            / probs.len() as f64;
        within("mse", mse(&probs, &y).map_err(|e| e.to_string())?, want, tol)?;
        cases += 1;
    }
    Ok(format!("mse {cases} cases"))
}

pub fn check_cliffs(tol: f64) -> Check {
    let mut cases = 0;
    for v in grid(7, 3) {
        for split in 1..7 {
            let (x, y) = v.split_at(split);
            let want = 2.0 * u_statistic(x, y) / (x.len() * y.len()) as f64 - 1.0;
            let got = cliffs_delta(x, y).map_err(|e| e.to_string())?.d;
            within(&format!("cliffs {x:?} {y:?}"), got, want, tol)?;
            cases += 1;
        }
    }
    Ok(format!("cliffs {cases} cases"))
}

pub fn check_wilcoxon(tol: f64) -> Check {
    let mut cases = 0;
    for n in 4..=8 {
        for perm in permutations(n).iter().step_by(if n > 6 { 37 } else { 1 }) {
            for split in 2..=n - 2 {
                let (x, y) = perm.split_at(split);
                for alt in [Alternative::Greater, Alternative::TwoSided] {
                    let r = wilcoxon_rank_sum(x, y, alt).map_err(|e| e.to_string())?;
                    within("wrs U", r.statistic, u_statistic(x, y), tol)?;
                    within(
                        &format!("wrs p {x:?} {y:?} {alt:?}"),
                        r.p_value,
                        exact_p_oracle(x, y, alt),
                        tol,
                    )?;
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("wilcoxon {cases} cases"))
}

/// Maclaurin series of erf; accurate to rounding for |x| < 2.
pub fn erf_series(x: f64) -> f64 {
    let (mut term, mut sum) = (x, x);
    for n in 1..200 {
        term *= -x * x / n as f64;
        let next = term / (2 * n + 1) as f64;
        sum += next;
        if next.abs() < 1e-18 {
            break;
        }
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

/// Chi-square upper tails for 1 and 2 degrees of freedom have closed forms.
pub fn check_kruskal(tol: f64) -> Check {
    let mut cases = 0;
    for v in grid(6, 3) {
        if v.iter().all(|&a| a == v[0]) {
            continue;
        }
        let two: [&[f64]; 2] = [&v[..3], &v[3..]];
        let r = kruskal_wallis(&two).map_err(|e| e.to_string())?;
        let h = kw_oracle(&two);
        within(&format!("kw H {v:?}"), r.statistic, h, tol)?;
        within("kw p df=1", r.p_value, 1.0 - erf_series((h / 2.0).sqrt()), tol)?;

        let three: [&[f64]; 3] = [&v[..2], &v[2..4], &v[4..]];
        let r = kruskal_wallis(&three).map_err(|e| e.to_string())?;
        let h = kw_oracle(&three);
        within(&format!("kw H {v:?}"), r.statistic, h, tol)?;
        within("kw p df=2", r.p_value, (-h / 2.0).exp(), tol)?;
        cases += 2;
    }
    Ok(format!("kruskal-wallis {cases} cases"))
}

pub fn check_labels() -> Check {
    let agreement = [
        (0.3, AgreementLabel::Weak),
        (0.3 + 1e-9, AgreementLabel::Moderate),
        (0.6, AgreementLabel::Moderate),
        (0.6 + 1e-9, AgreementLabel::Strong),
        (-0.5, AgreementLabel::Weak),
        (1.0, AgreementLabel::Strong),
    ];
    for (v, want) in agreement {
        if agreement_label(v) != want {
            return Err(format!("agreement label of {v}"));
        }
    }
    let magnitude = [
        (0.147, Magnitude::Negligible),
        (0.1471, Magnitude::Small),
        (0.33, Magnitude::Small),
        (-0.33, Magnitude::Small),
        (0.3301, Magnitude::Medium),
        (0.474, Magnitude::Medium),
        (0.4741, Magnitude::Large),
        (-1.0, Magnitude::Large),
    ];
    for (v, want) in magnitude {
        if magnitude_label(v) != want {
            return Err(format!("magnitude label of {v}"));
        }
    }
    Ok("label boundaries".into())
}

/// Random inputs with many ties, every `k` up to 4.
pub fn check_jenks(cases: usize, seed: u64) -> Check {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let n = r.random_range(1..=12);
        let levels = r.random_range(2..=40u32);
        let values: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..levels)) / 7.0).collect();
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let mut prev = f64::INFINITY;
        for k in 1..=4.min(n) {
            let res = jenks_breaks(&values, k).map_err(|e| e.to_string())?;
            within(
                &format!("jenks k={k} {values:?}"),
                res.wss,
                jenks_oracle(&sorted, k),
                1e-9,
            )?;
            if res.wss > prev + 1e-12 {
                return Err(format!("wss increased at k={k} for {values:?}"));
            }
            prev = res.wss;
            for (i, &a) in res.assignment.iter().enumerate() {
                for (j, &b) in res.assignment.iter().enumerate() {
                    if values[i] < values[j] && a > b {
                        return Err(format!("non-contiguous clusters for {values:?}"));
                    }
                }
            }
        }
    }
    Ok(format!("jenks {cases} inputs"))
}
