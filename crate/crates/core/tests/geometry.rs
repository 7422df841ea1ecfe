mod common;

use common::corpus;
use superpsc::geometry::sample_boundary;

#[test]
fn samples_do_not_depend_on_worker_count() {
    for d in corpus() {
        let a = sample_boundary(&d, 60, 12).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| sample_boundary(&d, 60, 12).unwrap());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

#[test]
fn normals_point_inward_and_frames_are_tangent() {
    for d in corpus() {
        let set = sample_boundary(&d, 100, 13).unwrap();
        assert_eq!(set.shortfall, 0, "{}", d.name);
        for s in &set.samples {
            assert!(s.residual.abs() <= 1e-10);
            let q: Vec<f64> = s.point.iter().zip(&s.inward_normal).map(|(p, v)| p + 1e-6 * v).collect();
            assert!(d.r(&q).unwrap() < 0.0, "{}", d.name);
            let grad = superpsc::criteria::boundary_gradient(&d.ast, &s.point).unwrap();
            let scale = grad.iter().map(|g| g.norm()).fold(0.0, f64::max);
            assert_eq!(s.frame.len(), d.n - 1);
            for v in &s.frame {
                let t: num_complex::Complex64 = grad.iter().zip(v).map(|(g, x)| g * x).sum();
                assert!(t.norm() <= 1e-10 * scale.max(1.0), "{}: {t}", d.name);
            }
        }
    }
}
