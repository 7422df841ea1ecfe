mod common;

use common::{corpus, strictly_pseudoconvex};
use superpsc::calculus::{raise, tilde_grad_norm_sq, HermitianForm};
use superpsc::criteria::required_shift;
use superpsc::fefferman::psh_shift;
use superpsc::geometry::{sample_boundary, sample_interior};
use superpsc::jets::wirtinger;

#[test]
fn boundary_annihilation() {
    for d in corpus() {
        let set = sample_boundary(&d, 200, 1).unwrap();
        // domains whose Levi form degenerates somewhere are checked for the
        // shifted function r + (a/2) r², which has the same boundary
        let shift = set
            .samples
            .iter()
            .map(|s| required_shift(&d.ast, &s.point).unwrap())
            .fold(0.0, f64::max);
        for s in &set.samples {
            let w = psh_shift(&wirtinger(&d.ast.jet(&s.point, 4).unwrap()), shift);
            let rd = raise(&w).unwrap();
            let g = tilde_grad_norm_sq(&rd, w.gradient());
            assert!(g.abs() <= 1e-8, "{}: {g}", d.name);
            for c in rd.annihilation(&w) {
                assert!(c.norm() <= 1e-8, "{}: {c}", d.name);
            }
        }
    }
}

#[test]
fn degenerate_inverse_is_semidefinite_on_the_boundary() {
    for d in strictly_pseudoconvex() {
        let set = sample_boundary(&d, 100, 2).unwrap();
        for s in &set.samples {
            let rd = raise(&wirtinger(&d.ast.jet(&s.point, 2).unwrap())).unwrap();
            let a = HermitianForm::symmetrized(rd.a_tilde_matrix().clone());
            assert!(a.min_eigenvalue() >= -1e-9, "{}: {}", d.name, a.min_eigenvalue());
        }
    }
}

#[test]
fn raised_gradient_contractions_agree() {
    for d in corpus() {
        for p in sample_interior(&d, 50, 4) {
            let w = wirtinger(&d.ast.jet(&p, 2).unwrap());
            // raised indices need −r + |∂r|²_r > 0, which fails where H(r) is indefinite
            let Ok(rd) = raise(&w) else { continue };
            let (a, b) = (rd.q(), rd.q_contracted(&w));
            assert!((a - b).abs() <= 1e-11 * a.abs().max(b.abs()), "{}: {a} vs {b}", d.name);
        }
    }
}
