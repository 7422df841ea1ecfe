use superpsc::solver::{solve_radial, RadialOptions};

#[test]
fn refinement_and_identity() {
    for n in 1..=3 {
        let coarse = solve_radial(&RadialOptions::new(n, 500)).unwrap();
        let fine = solve_radial(&RadialOptions::new(n, 1000)).unwrap();
        let (ec, ef) = (coarse.max_deviation_from_ball(0.99), fine.max_deviation_from_ball(0.99));
        assert!(ec / ef >= 3.0, "n = {n}: {ec} -> {ef}");
        let identity = (0..fine.t.len()).map(|k| fine.log_identity_residual(k)).fold(0.0, f64::max);
        assert!(identity <= 1e-7, "n = {n}: {identity}");
    }
}

#[test]
fn solution_is_plurisubharmonic_on_the_grid() {
    let p = solve_radial(&RadialOptions::new(2, 2000)).unwrap();
    for k in 0..p.t.len() {
        assert!(p.fp[k] > 0.0);
        assert!(p.fp[k] + p.t[k] * p.fpp[k] > 0.0);
    }
    assert!(p.max_deviation_from_ball(0.99) <= 1e-6);
}
