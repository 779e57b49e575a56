use gppopf::gpr::{fit, FitOptions};
use gppopf::sensitivity::*;
use proptest::prelude::*;

fn rec(name: &str, gamma: f64, delta: f64) -> SensitivityRecord {
    SensitivityRecord {
        output_name: name.into(),
        l: gamma,
        sigma_f: 1.0,
        gamma,
        gamma_output_units: gamma,
        delta,
        flagged: delta == 0.0,
    }
}

#[test]
fn strictly_inverse_ranks_give_minus_one() {
    let r: Vec<_> = (0..6)
        .map(|k| rec(&format!("g{k}"), k as f64 + 1.0, 10.0 - k as f64))
        .collect();
    assert_eq!(inverse_relation_report(&r).unwrap().spearman, -1.0);
}

#[test]
fn identical_deltas_give_zero() {
    let r: Vec<_> = (0..4).map(|k| rec(&format!("g{k}"), k as f64, 3.0)).collect();
    assert_eq!(inverse_relation_report(&r).unwrap().spearman, 0.0);
}

#[test]
fn too_few_records_rejected() {
    let r = vec![rec("a", 1.0, 1.0), rec("b", 2.0, 0.5)];
    assert_eq!(
        inverse_relation_report(&r).unwrap_err(),
        SensitivityError::TooFewRecords(2)
    );
}

#[test]
fn flat_output_has_large_gamma() {
    let x: Vec<Vec<f64>> = (0..25).map(|i| vec![(i % 5) as f64, (i / 5) as f64]).collect();
    let wiggly: Vec<f64> = x.iter().map(|p| (2.0 * p[0]).sin() * (1.5 * p[1]).cos()).collect();
    // A tiny linear trend: almost no variation over the subspace.
    let flat: Vec<f64> = x.iter().map(|p| 5.0 + 1e-3 * p[0]).collect();
    let o = FitOptions::default();
    let (gw, gf) = (
        gamma(&fit(&x, &wiggly, &o).unwrap()),
        gamma(&fit(&x, &flat, &o).unwrap()),
    );
    assert!(gw > 0.0 && gf > 0.0);
    assert!(gf > 10.0 * gw, "flat {gf} vs wiggly {gw}");
}

#[test]
fn gamma_ignores_output_labels() {
    let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 * 0.3]).collect();
    let y: Vec<f64> = x.iter().map(|p| p[0].sin()).collect();
    let m = fit(&x, &y, &FitOptions::default()).unwrap();
    let a = record("pg_g1_b1", &m, &y).unwrap();
    let b = record("something_else", &m, &y).unwrap();
    assert_eq!((a.gamma, a.delta), (b.gamma, b.delta));
}

proptest! {
    #[test]
    fn output_range_matches_sorting(v in prop::collection::vec(-1e6..1e6f64, 1..200)) {
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        prop_assert_eq!(output_range(&v).unwrap(), s[s.len() - 1] - s[0]);
    }

    #[test]
    fn spearman_is_bounded_and_symmetric(
        pairs in prop::collection::vec((0u8..6, 0u8..6), 3..30)
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let r = spearman(&a, &b);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
        prop_assert!((r - spearman(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn spearman_flips_sign_under_reversal(v in prop::collection::vec(-10.0..10.0f64, 3..40)) {
        let idx: Vec<f64> = (0..v.len()).map(|i| i as f64).collect();
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        prop_assert!((spearman(&idx, &v) + spearman(&idx, &neg)).abs() < 1e-12);
    }
}
