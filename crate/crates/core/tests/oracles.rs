//! Library metrics against brute-force reference implementations.

mod support;

use interp_consistency::metrics::{kendalls_tau, kendalls_w};
use proptest::prelude::*;
use support::*;

const TOL: f64 = 1e-12;

#[test]
fn tau_matches_pair_counting() {
    check_tau(TOL).unwrap();
}

#[test]
fn w_matches_definition_and_mean_spearman() {
    check_w(TOL).unwrap();
}

#[test]
fn top_k_overlap_matches_set_oracle() {
    check_top_k(TOL).unwrap();
}

#[test]
fn auc_matches_pair_counting() {
    check_auc(TOL).unwrap();
}

#[test]
fn mse_matches_definition() {
    check_mse(TOL).unwrap();
}

#[test]
fn cliffs_delta_matches_rank_identity() {
    check_cliffs(TOL).unwrap();
}

#[test]
fn exact_wilcoxon_matches_enumeration() {
    check_wilcoxon(TOL).unwrap();
}

#[test]
fn kruskal_wallis_matches_variance_ratio() {
    check_kruskal(TOL).unwrap();
}

#[test]
fn label_boundaries() {
    check_labels().unwrap();
}

#[test]
fn jenks_matches_exhaustive_search() {
    check_jenks(500, 1).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tau_is_symmetric_and_bounded(a in prop::collection::vec(0u8..5, 2..8), seed in any::<u64>()) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v + ((seed >> i) & 3) as f64).collect();
        let (ab, _) = kendalls_tau(frac_ranks(&a), frac_ranks(&b)).unwrap();
        let (ba, _) = kendalls_tau(frac_ranks(&b), frac_ranks(&a)).unwrap();
        prop_assert!((ab - ba).abs() < TOL);
        prop_assert!((-1.0 - TOL..=1.0 + TOL).contains(&ab));
        prop_assert!((ab - tau_oracle(&a, &b)).abs() < TOL);
    }

    #[test]
    fn w_is_in_unit_interval(rows in prop::collection::vec(prop::collection::vec(0u8..4, 5), 2..6)) {
        let rankings: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| frac_ranks(&r.iter().map(|&v| f64::from(v)).collect::<Vec<_>>()))
            .collect();
        let w = kendalls_w(&rankings).unwrap();
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!((w - w_oracle(&rankings).clamp(0.0, 1.0)).abs() < TOL);
    }
}
