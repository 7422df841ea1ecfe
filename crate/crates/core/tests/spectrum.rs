mod common;

use common::{corpus, domain};
use proptest::prelude::*;
use superpsc::geometry::sample_interior;
use superpsc::spectrum::{einstein_defect, metric_at, rayleigh_quotient_ball, rayleigh_scan, s_grid};

#[test]
fn metric_determinant_identity() {
    for d in corpus() {
        for p in sample_interior(&d, 30, 21) {
            let m = metric_at(&d, &p).unwrap();
            assert!(m.det_identity_residual() <= 1e-8, "{}", d.name);
        }
    }
}

#[test]
fn ball_metric_is_einstein() {
    let d = domain("ball", &[]);
    for p in sample_interior(&d, 50, 22) {
        assert!(einstein_defect(&d, &p).unwrap() <= 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn quotients_stay_above_the_bottom(s in 1.01f64..4.0, k in 3i32..10) {
        let q = rayleigh_quotient_ball(2, s, 10f64.powi(-k)).unwrap();
        prop_assert!(q.quotient.is_finite() && q.quotient >= 4.0 - 1e-3, "{q:?}");
    }
}

fn min_quotient(eps: f64) -> f64 {
    rayleigh_scan(2, &s_grid(1.02, 2.0, 0.02), eps)
        .unwrap()
        .iter()
        .map(|p| p.quotient)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn smaller_cutoffs_lower_the_minimum_towards_the_bottom() {
    let mins: Vec<f64> = [1e-3, 1e-5, 1e-8].iter().map(|&e| min_quotient(e)).collect();
    assert!(mins[0] > mins[1] && mins[1] > mins[2], "{mins:?}");
    assert!(mins[2] >= 4.0 - 1e-3);
}

#[test]
#[ignore = "the minimum moves by about 0.5 between these cutoffs; it drifts down like 1/|log ε|"]
fn cutoff_insensitivity_as_stated() {
    assert!((min_quotient(1e-3) - min_quotient(1e-5)).abs() <= 1e-2);
}
