mod common;

use common::{corpus, domain};
use proptest::prelude::*;
use superpsc::calculus::raise;
use superpsc::expr::parse;
use superpsc::fefferman::{
    domain_defect_scan, log_j_derivatives, log_level_identity_check, log_spaced, point_data,
    shift_identity_rhs, AffineMap, Approximation, B_trace, J_bordered, J_product,
};
use superpsc::geometry::{sample_boundary, sample_interior};
use superpsc::jets::wirtinger;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn determinant_forms_agree(k in 0usize..7, seed in 0u64..1000, a in 0.1f64..4.0) {
        let d = &corpus()[k];
        for p in sample_interior(d, 8, seed) {
            let w = wirtinger(&d.ast.jet(&p, 4).unwrap());
            let j = J_bordered(&w);
            if let Ok(rd) = raise(&w) {
                prop_assert!(rel(j, J_product(&rd)) <= 1e-10);
            }
            prop_assert!(log_level_identity_check(&w).unwrap() <= 1e-8);
            prop_assert!(rel(j, shift_identity_rhs(&w, a).unwrap()) <= 1e-8);
        }
    }
}

#[test]
fn b_matches_trace_form_near_the_boundary() {
    for d in corpus() {
        let set = sample_boundary(&d, 40, 8).unwrap();
        for s in &set.samples {
            for t in [1e-2, 1e-3] {
                let p: Vec<f64> = s.point.iter().zip(&s.inward_normal).map(|(x, v)| x + t * v).collect();
                let jet = d.ast.jet(&p, 4).unwrap();
                if jet.value().abs() >= 0.1 {
                    continue;
                }
                let Ok((w, _, data)) = point_data(&jet) else { continue };
                let trace = B_trace(&w, &log_j_derivatives(&jet).unwrap()).unwrap();
                assert!((data.b - trace).abs() <= 1e-9 * data.b.abs().max(1e-12), "{}: {} vs {trace}", d.name, data.b);
            }
        }
    }
}

#[test]
fn second_correction_gains_an_order() {
    let d = domain("ellipsoid", &[("a1", 2.0), ("b2", 1.5)]);
    let depths = log_spaced(1e-1, 1e-3, 5);
    let one = domain_defect_scan(&d, 10, 0, &depths, Approximation::Rho1).unwrap();
    let zero = domain_defect_scan(&d, 10, 0, &depths, Approximation::Rho0).unwrap();
    let (s1, s0) = (one.uniform_slope.unwrap(), zero.uniform_slope.unwrap());
    assert!(s0 >= 0.9 && s0 < 1.9, "{s0}");
    assert!(s1 - s0 >= 0.8, "{s1} vs {s0}");
    // closer to the boundary the fitted order approaches two
    let deep = domain_defect_scan(&d, 10, 0, &log_spaced(1e-2, 1e-4, 5), Approximation::Rho1).unwrap();
    let sd = deep.uniform_slope.unwrap();
    assert!(sd >= 1.9 && sd > s1, "{sd}");
}

#[test]
fn ball_defect_is_exact() {
    let scan = domain_defect_scan(&domain("ball", &[]), 6, 0, &log_spaced(1e-1, 1e-3, 4), Approximation::Rho1).unwrap();
    assert!(scan.exact && scan.uniform_slope.is_none());
}

#[test]
fn scaling_transport_against_direct_solution() {
    // ρ of the radius-1/2 ball is 4^{1/3}(|z|² − 1/4)
    let map = AffineMap::scaling(2, 2.0).unwrap();
    let c = 4f64.powf(1.0 / 3.0);
    let small = parse(&format!("{c:.17}*(abs2(z1)+abs2(z2)-0.25)"), 2).unwrap();
    let z = [0.1, -0.2, 0.05, 0.1];
    let image = map.apply(&z);
    let rho_ball = image.iter().map(|x| x * x).sum::<f64>() - 1.0;
    let direct = small.eval(&z).unwrap();
    assert!((map.transport_rho(rho_ball) - direct).abs() < 1e-14);
    assert!((map.transport_rho(1.0) - 4f64.powf(-2.0 / 3.0)).abs() < 1e-15);
    let jet = small.jet(&z, 2).unwrap();
    let det = wirtinger(&jet).levi().determinant().re;
    assert!((map.transport_det_h(1.0) - det).abs() < 1e-12);
}

#[test]
fn unitary_map_leaves_the_ball_alone() {
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64 as C;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let u = DMatrix::from_row_slice(2, 2, &[C::new(s, 0.0), C::new(0.0, s), C::new(0.0, s), C::new(s, 0.0)]);
    let map = AffineMap::new(u, DVector::zeros(2)).unwrap();
    assert!((map.det().norm() - 1.0).abs() < 1e-15);
    assert!((map.transport_rho(-0.3) + 0.3).abs() < 1e-15);
}
