mod common;

use common::{corpus, domain};
use superpsc::criteria::{
    classify, evaluate_point, l2_decomposed, pseudo_ricci, shifted_jet, BoundaryContext, L2Variant,
    CONDITION_LIMIT,
};
use superpsc::geometry::sample_boundary;
use superpsc::jets::{fd_wirtinger, FdOptions};

#[test]
fn determinant_forms_and_decomposition_agree_on_the_corpus() {
    for d in corpus() {
        let c = classify(&d, 150, 9, L2Variant::Eq311, 1e-10).unwrap();
        assert!(c.failures.is_empty(), "{}: {:?}", d.name, c.failures);
        for r in &c.rows {
            assert!(r.e_lower <= r.e_tilde + 1e-7 && r.e_tilde <= r.e_upper + 1e-7, "{}: {r:?}", d.name);
            if r.condition < CONDITION_LIMIT {
                let gap = (r.det_h_rho_boundary - r.det_h_rho_rank_one).abs()
                    / r.det_h_rho_boundary.abs().max(r.det_h_rho_rank_one.abs()).max(1e-12);
                assert!(gap <= 1e-6, "{}: {gap}", d.name);
            }
        }
        // the decomposition through Ẽ, at the same shifted function
        let set = sample_boundary(&d, 40, 9).unwrap();
        for s in &set.samples {
            let row = evaluate_point(&d.ast, s, c.verdict.shift, 1e-10).unwrap();
            let jet = shifted_jet(&d.ast.jet(&s.point, 4).unwrap(), c.verdict.shift);
            let ctx = BoundaryContext::new(&jet).unwrap();
            assert!((row.l2 - l2_decomposed(&ctx)).abs() <= 1e-8, "{}", d.name);
        }
    }
}

#[test]
fn classification_is_deterministic() {
    let d = domain("example52", &[]);
    let a = classify(&d, 80, 4, L2Variant::Eq311, 1e-10).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| classify(&d, 80, 4, L2Variant::Eq311, 1e-10).unwrap());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn pseudo_ricci_matches_finite_differences() {
    // Ric(w, v̄) = −∂∂̄ log J(w, v̄) + n (det H(r)/J) H(r)(w, v̄) checked with
    // the log J Hessian rebuilt from finite differences of log J
    let d = domain("example52", &[]);
    let set = sample_boundary(&d, 6, 2).unwrap();
    for s in &set.samples {
        let jet = d.ast.jet(&s.point, 4).unwrap();
        let ctx = BoundaryContext::new(&jet).unwrap();
        let v = &s.frame[0];
        let ric = pseudo_ricci(&ctx, v, v).unwrap().value;
        let log_j = |p: &[f64]| superpsc::fefferman::j_value(&d.ast.jet(p, 2).unwrap()).ln();
        let n = ctx.n();
        let mut fd = num_complex::Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let h = fd_wirtinger(&log_j, &s.point, &[i], &[j], FdOptions { step: 1e-3, richardson: true });
                fd += -h * v[i] * v[j].conj();
            }
        }
        let det = ctx.rd.det_h();
        let levi: num_complex::Complex64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| ctx.w.levi()[(i, j)] * v[i] * v[j].conj())
            .sum();
        let expected = fd + levi * (n as f64) * det / ctx.j;
        assert!((ric - expected).norm() <= 1e-5 * expected.norm().max(1.0), "{ric} vs {expected}");
    }
}
