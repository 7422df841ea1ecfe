mod common;

use common::{corpus, point, polynomial};
use proptest::prelude::*;
use superpsc::expr::ExprAst;
use superpsc::geometry::sample_interior;
use superpsc::jets::{complex_hessian, fd_oracle, FdOptions};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn coefficients_match_finite_differences(
        (n, node, p) in (1usize..=3).prop_flat_map(|n| (Just(n), polynomial(n), point(2 * n)))
    ) {
        let ast = ExprAst::new(n, node).unwrap();
        let jet = ast.jet(&p, 4).unwrap();
        let layout = jet.layout().clone();
        // the stencil divides rounding of f by h^k; the Taylor coefficients
        // bound |f| over the stencil
        let h = 5e-2;
        let f_scale: f64 = jet.coeffs().iter().map(|c| c.abs()).sum();
        for i in 0..layout.len(4) {
            let vars: Vec<usize> = layout
                .exponent(i)
                .iter()
                .enumerate()
                .flat_map(|(v, &e)| std::iter::repeat(v).take(e as usize))
                .collect();
            let exact = jet.partial(&vars);
            let fd = fd_oracle(&ast, &p, &vars, FdOptions { step: h, richardson: true });
            let rounding = 1e3 * f64::EPSILON * f_scale / h.powi(vars.len() as i32);
            prop_assert!((exact - fd).abs() <= 1e-7f64.max(1e-6 * exact.abs()).max(rounding), "{ast} at {p:?} d{vars:?}: {exact} vs {fd}");
        }
    }

    #[test]
    fn products_are_truncated_products(a in polynomial(2), b in polynomial(2), p in point(4)) {
        let (fa, fb) = (ExprAst::new(2, a.clone()).unwrap(), ExprAst::new(2, b.clone()).unwrap());
        let prod = ExprAst::new(2, a * b).unwrap();
        let direct = prod.jet(&p, 4).unwrap();
        let composed = &fa.jet(&p, 4).unwrap() * &fb.jet(&p, 4).unwrap();
        for (x, y) in direct.coeffs().iter().zip(composed.coeffs()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}

#[test]
fn complex_hessians_are_hermitian() {
    for d in corpus() {
        for p in sample_interior(&d, 100, 5) {
            let h = complex_hessian(&d.ast.jet(&p, 2).unwrap());
            let gap = (&h - h.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
            assert!(gap <= 1e-13, "{}: {gap}", d.name);
        }
    }
}
