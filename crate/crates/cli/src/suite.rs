//! Regression suite over the worked examples and the identities they rely on.
//!
//! Every assertion records what was observed next to what was expected, so a
//! failure explains itself in the report.

use std::collections::BTreeMap;
use std::f64::consts::E;

use serde::Serialize;
use superpsc::calculus::{raise, tilde_grad_norm_sq};
use superpsc::criteria::{
    classify, convex_companion, det_h_rho_boundary, e_tilde, l2, real_hessian_min_eigenvalue,
    BoundaryContext, Classification, Convexity, L2Variant,
};
use superpsc::expr::{builtin, bump, example52_c_max, DomainSpec};
use superpsc::fefferman::{
    b0_jet, b_jet, domain_defect_scan, log_j_derivatives, log_level_identity_check, log_spaced,
    shift_identity_rhs, AffineMap, Approximation, J_bordered, J_product,
};
use superpsc::geometry::{boundary_on_ray, sample_boundary, sample_interior};
use superpsc::jets::{complex_gradient, fd_wirtinger, wirtinger, FdOptions};
use superpsc::spectrum::metric_at;

/// Groups accepted by `--only`.
pub const GROUPS: [&str; 7] = [
    "expr",
    "fefferman",
    "criteria",
    "geometry",
    "spectrum",
    "example51",
    "example52",
];

/// Seed shared by every sampled assertion.
pub const SUITE_SEED: u64 = 20_240_917;

/// One checked claim.
#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub group: &'static str,
    pub name: &'static str,
    pub claim: String,
    pub observed: f64,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    pub passed: bool,
    pub note: Option<String>,
}

impl Assertion {
    fn close(group: &'static str, name: &'static str, claim: &str, observed: f64, expected: f64, tol: f64) -> Self {
        Self {
            group,
            name,
            claim: claim.to_string(),
            observed,
            expected: Some(expected),
            tolerance: Some(tol),
            passed: (observed - expected).abs() <= tol,
            note: None,
        }
    }

    fn holds(group: &'static str, name: &'static str, claim: &str, observed: f64, passed: bool) -> Self {
        Self {
            group,
            name,
            claim: claim.to_string(),
            observed,
            expected: None,
            tolerance: None,
            passed,
            note: None,
        }
    }

    fn failed(group: &'static str, name: &'static str, claim: &str, err: String) -> Self {
        Self {
            group,
            name,
            claim: claim.to_string(),
            observed: f64::NAN,
            expected: None,
            tolerance: None,
            passed: false,
            note: Some(err),
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// `PASS group.name: claim (observed ...)`.
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!("{status} {}.{}: {} (observed {:.10e}", self.group, self.name, self.claim, self.observed);
        if let Some(e) = self.expected {
            s.push_str(&format!(", expected {e:.10e}"));
        }
        if let Some(t) = self.tolerance {
            s.push_str(&format!(", tol {t:.0e}"));
        }
        s.push(')');
        if let Some(n) = &self.note {
            s.push_str(&format!(" [{n}]"));
        }
        s
    }
}

type Res<T> = Result<T, String>;

fn domain(name: &str, params: &[(&str, f64)]) -> Res<DomainSpec> {
    let map: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    builtin(name, &map).map_err(|e| e.to_string())
}

/// Corpus domains used by the sampled identity checks.
pub fn corpus() -> Vec<DomainSpec> {
    [
        ("ball", vec![("n", 2.0)]),
        ("ball", vec![("n", 3.0)]),
        ("ellipsoid", vec![]),
        ("ellipsoid", vec![("n", 3.0), ("a2", 3.0), ("b3", 0.5)]),
        ("example51", vec![]),
        ("example52", vec![]),
        ("disc_perturbed", vec![]),
    ]
    .iter()
    .map(|(name, p)| domain(name, p).expect("corpus parameters are valid"))
    .collect()
}

/// Largest relative gap `|a − b| / max(|a|, |b|, 1e-300)` over a set of pairs.
fn max_rel(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    pairs
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-300))
        .fold(0.0, f64::max)
}

fn origin_ctx(d: &DomainSpec) -> Res<BoundaryContext> {
    let jet = d.ast.jet(&vec![0.0; 2 * d.n], 4).map_err(|e| e.to_string())?;
    BoundaryContext::new(&jet).map_err(|e| e.to_string())
}

fn run<F: FnOnce() -> Res<Assertion>>(group: &'static str, name: &'static str, claim: &str, f: F) -> Assertion {
    f().unwrap_or_else(|e| Assertion::failed(group, name, claim, e))
}

fn expr_group() -> Vec<Assertion> {
    let delta = 4f64.powi(-12);
    vec![
        Assertion::close("expr", "bump_at_zero", "g_δ(0) = e^{-1} for δ = 4^{-12}", bump(0.0, delta), (-1.0f64).exp(), 1e-15),
        run("expr", "example52_default_c", "default C = (9 − 8α)(1 + α)/256 at α = 1.05", || {
            let d = domain("example52", &[("alpha", 1.05)])?;
            Ok(Assertion::close("expr", "example52_default_c", "default C = (9 − 8α)(1 + α)/256 at α = 1.05", d.parameters["c"], 0.6 * 2.05 / 256.0, 1e-15))
        }),
        run("expr", "r_1111_finite_difference", "finite-difference r_{11̄11̄}(0) = −32/e on example51", || {
            let d = domain("example51", &[])?;
            let f = |x: &[f64]| d.ast.eval(x).unwrap_or(f64::NAN);
            let opts = FdOptions { step: 1e-5, richardson: true };
            let v = fd_wirtinger(&f, &[0.0; 4], &[0, 0], &[0, 0], opts);
            Ok(Assertion::close("expr", "r_1111_finite_difference", "finite-difference r_{11̄11̄}(0) = −32/e on example51", v.re, -32.0 / E, 1e-4))
        }),
    ]
}

fn fefferman_group() -> Vec<Assertion> {
    let mut out = Vec::new();
    out.push(run("fefferman", "bordered_vs_product", "bordered and product forms of J agree to 1e-10", || {
        let mut gaps = Vec::new();
        for d in corpus() {
            for p in sample_interior(&d, 20, SUITE_SEED) {
                let w = wirtinger(&d.ast.jet(&p, 2).map_err(|e| e.to_string())?);
                if let Ok(rd) = raise(&w) {
                    gaps.push((J_bordered(&w), J_product(&rd)));
                }
            }
        }
        let g = max_rel(gaps.into_iter());
        Ok(Assertion::holds("fefferman", "bordered_vs_product", "bordered and product forms of J agree to 1e-10", g, g <= 1e-10))
    }));
    out.push(run("fefferman", "shift_identity", "J(r) from H(r + (a/2)r²) matches J(r) to 1e-8", || {
        let mut gaps = Vec::new();
        for d in corpus() {
            for p in sample_interior(&d, 20, SUITE_SEED + 1) {
                let w = wirtinger(&d.ast.jet(&p, 4).map_err(|e| e.to_string())?);
                let rhs = shift_identity_rhs(&w, 1.5).map_err(|e| e.to_string())?;
                gaps.push((J_bordered(&w), rhs));
            }
        }
        let g = max_rel(gaps.into_iter());
        Ok(Assertion::holds("fefferman", "shift_identity", "J(r) from H(r + (a/2)r²) matches J(r) to 1e-8", g, g <= 1e-8))
    }));
    out.push(run("fefferman", "log_level_identity", "det H(−log(−r)) = J e^{(n+1)(−log(−r))} to 1e-8", || {
        let mut worst: f64 = 0.0;
        for d in corpus() {
            for p in sample_interior(&d, 20, SUITE_SEED + 2) {
                let w = wirtinger(&d.ast.jet(&p, 2).map_err(|e| e.to_string())?);
                worst = worst.max(log_level_identity_check(&w).map_err(|e| e.to_string())?);
            }
        }
        Ok(Assertion::holds("fefferman", "log_level_identity", "det H(−log(−r)) = J e^{(n+1)(−log(−r))} to 1e-8", worst, worst <= 1e-8))
    }));
    out.push(run("fefferman", "example51_grad_log_j", "∂ log J(0) = 0 on example51", || {
        let d = domain("example51", &[])?;
        let lj = log_j_derivatives(&d.ast.jet(&[0.0; 4], 4).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let g = lj.gradient.iter().map(|c| c.norm()).fold(0.0, f64::max);
        Ok(Assertion::holds("fefferman", "example51_grad_log_j", "∂ log J(0) = 0 on example51", g, g <= 1e-10))
    }));
    out.push(run("fefferman", "radial_log_j", "R log J = Re r^k Δ̃r_k + Re r^i r^k r_ik / |∂r|²_r on the ellipsoid boundary", || {
        let d = domain("ellipsoid", &[("a1", 2.0), ("b2", 1.7)])?;
        let set = sample_boundary(&d, 50, SUITE_SEED).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for s in &set.samples {
            let ctx = BoundaryContext::new(&d.ast.jet(&s.point, 4).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            let rhs = ctx.radial_tilde_lap() + ctx.rrr().re / ctx.rd.q();
            worst = worst.max((ctx.radial_log_j() - rhs).abs());
        }
        Ok(Assertion::holds("fefferman", "radial_log_j", "R log J = Re r^k Δ̃r_k + Re r^i r^k r_ik / |∂r|²_r on the ellipsoid boundary", worst, worst <= 1e-7))
    }));
    out.push(run("fefferman", "boundary_gradient_of_b", "∂_j B = −B⁰ ∂_j r on the boundary", || {
        let d = domain("ellipsoid", &[])?;
        let set = sample_boundary(&d, 50, SUITE_SEED).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for s in &set.samples {
            let jet = d.ast.jet(&s.point, 5).map_err(|e| e.to_string())?;
            let b0 = b0_jet(&jet).map_err(|e| e.to_string())?.value();
            let gb = complex_gradient(&b_jet(&jet).map_err(|e| e.to_string())?);
            let gr = complex_gradient(&jet);
            for (a, r) in gb.iter().zip(&gr) {
                worst = worst.max((a + b0 * r).norm());
            }
        }
        Ok(Assertion::holds("fefferman", "boundary_gradient_of_b", "∂_j B = −B⁰ ∂_j r on the boundary", worst, worst <= 1e-7))
    }));
    out.push(run("fefferman", "tilde_gradient_of_r", "|∇̃_r r|² = 0 on the boundary", || {
        let d = domain("ellipsoid", &[])?;
        let set = sample_boundary(&d, 50, SUITE_SEED).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for s in &set.samples {
            let w = wirtinger(&d.ast.jet(&s.point, 2).map_err(|e| e.to_string())?);
            let rd = raise(&w).map_err(|e| e.to_string())?;
            worst = worst.max(tilde_grad_norm_sq(&rd, w.gradient()).abs());
        }
        Ok(Assertion::holds("fefferman", "tilde_gradient_of_r", "|∇̃_r r|² = 0 on the boundary", worst, worst <= 1e-9))
    }));
    out.push(run("fefferman", "second_order_defect", "|J(ρ₁) − 1| decays like r² on the ellipsoid", || {
        let d = domain("ellipsoid", &[])?;
        let scan = domain_defect_scan(&d, 10, SUITE_SEED, &log_spaced(1e-1, 1e-3, 5), Approximation::Rho1)
            .map_err(|e| e.to_string())?;
        let slope = scan.uniform_slope.unwrap_or(f64::NAN);
        Ok(Assertion::holds("fefferman", "second_order_defect", "|J(ρ₁) − 1| decays like r² on the ellipsoid", slope, slope >= 1.9)
            .with_note(format!("uniform slope over rays; smallest single-ray slope {:.3}", scan.min_ray_slope.unwrap_or(f64::NAN))))
    }));
    out.push(run("fefferman", "scaling_transport", "z ↦ 2z in C² multiplies det H(ρ) by 4^{2/3}", || {
        let map = AffineMap::scaling(2, 2.0).map_err(|e| e.to_string())?;
        // the radius-1/2 ball has ρ = 4^{1/3}(|z|² − 1/4), so det H(ρ) = 4^{2/3}
        // while the unit ball has det H(ρ) = 1
        let src = format!("{:.17}*(abs2(z1)+abs2(z2)-0.25)", 4f64.powf(1.0 / 3.0));
        let small = superpsc::expr::parse(&src, 2).map_err(|e| e.to_string())?;
        let jet = small.jet(&[0.1, 0.0, 0.0, 0.2], 2).map_err(|e| e.to_string())?;
        let direct = wirtinger(&jet).levi().determinant().re;
        let f = map.transport_det_h(1.0);
        Ok(Assertion::close("fefferman", "scaling_transport", "z ↦ 2z in C² multiplies det H(ρ) by 4^{2/3}", f, direct, 1e-12)
            .with_note(format!("ρ factor {:.12} = 4^(-2/3)", map.transport_rho(1.0))))
    }));
    out
}

fn criteria_group() -> Vec<Assertion> {
    let mut out = Vec::new();
    out.push(run("criteria", "example51_l2_negative", "L₂(0) < 0 on example51", || {
        let ctx = origin_ctx(&domain("example51", &[])?)?;
        let v = l2(&ctx, L2Variant::Eq311);
        Ok(Assertion::holds("criteria", "example51_l2_negative", "L₂(0) < 0 on example51", v, v < 0.0))
    }));
    out.push(run("criteria", "example52_l2_positive", "L₂(0) > 0 on example52", || {
        let ctx = origin_ctx(&domain("example52", &[])?)?;
        let v = l2(&ctx, L2Variant::Eq311);
        Ok(Assertion::holds("criteria", "example52_l2_positive", "L₂(0) > 0 on example52", v, v > 0.0))
    }));
    out.push(run("criteria", "example51_verdict", "example51 is strictly convex and its r fails the criterion", || {
        let c = classify(&domain("example51", &[])?, 400, SUITE_SEED, L2Variant::Eq311, 1e-10).map_err(|e| e.to_string())?;
        let v = &c.verdict;
        let worst = v.worst_point.as_ref().map_or(f64::NAN, |p| p.point.iter().map(|x| x * x).sum::<f64>().sqrt());
        let ok = v.classification == Classification::NotSuperPsc && v.convexity == Convexity::StrictlyConvex && worst < 1e-3;
        Ok(Assertion::holds("criteria", "example51_verdict", "example51 is strictly convex and its r fails the criterion", v.margin, ok)
            .with_note(format!("worst point at distance {worst:.2e} from the origin")))
    }));
    out.push(run("criteria", "example52_verdict", "example52 is strictly super-pseudoconvex and not convex", || {
        let c = classify(&domain("example52", &[])?, 300, SUITE_SEED, L2Variant::Eq311, 1e-10).map_err(|e| e.to_string())?;
        let v = &c.verdict;
        let ok = v.classification == Classification::StrictlySuperPsc && v.convexity == Convexity::NotConvex;
        Ok(Assertion::holds("criteria", "example52_verdict", "example52 is strictly super-pseudoconvex and not convex", v.margin, ok))
    }));
    out.push(run("criteria", "convex_companion", "the convex companion inequality is ≥ −1e-8 on convex corpus domains", || {
        let mut worst = f64::INFINITY;
        for d in [domain("ball", &[])?, domain("ellipsoid", &[])?, domain("example51", &[])?] {
            let set = sample_boundary(&d, 100, SUITE_SEED).map_err(|e| e.to_string())?;
            for s in &set.samples {
                let ctx = BoundaryContext::new(&d.ast.jet(&s.point, 4).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
                worst = worst.min(convex_companion(&ctx));
            }
        }
        Ok(Assertion::holds("criteria", "convex_companion", "the convex companion inequality is ≥ −1e-8 on convex corpus domains", worst, worst >= -1e-8))
    }));
    out
}

fn geometry_group() -> Vec<Assertion> {
    vec![run("geometry", "example51_origin", "the ray toward −Re z₂ finds 0 ∈ ∂D on example51", || {
        let d = domain("example51", &[])?;
        let s = boundary_on_ray(&d, &[0.0, 0.0, -1.0, 0.0], 0).ok_or("no boundary crossing on the ray")?;
        let dist = s.point.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(Assertion::holds("geometry", "example51_origin", "the ray toward −Re z₂ finds 0 ∈ ∂D on example51", dist, dist <= 1e-10))
    })]
}

fn spectrum_group() -> Vec<Assertion> {
    vec![run("spectrum", "metric_determinant", "det g = J e^{(n+1)u} for g = H(−log(−r))", || {
        let mut worst: f64 = 0.0;
        for d in corpus() {
            for p in sample_interior(&d, 15, SUITE_SEED + 3) {
                worst = worst.max(metric_at(&d, &p).map_err(|e| e.to_string())?.det_identity_residual());
            }
        }
        Ok(Assertion::holds("spectrum", "metric_determinant", "det g = J e^{(n+1)u} for g = H(−log(−r))", worst, worst <= 1e-8))
    })]
}

fn example51_group() -> Vec<Assertion> {
    let g = "example51";
    let ctx = match domain(g, &[]).and_then(|d| origin_ctx(&d)) {
        Ok(c) => c,
        Err(e) => return vec![Assertion::failed(g, "setup", "origin jet of example51", e)],
    };
    let levi = ctx.w.levi();
    let mut levi_gap: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            levi_gap = levi_gap.max((levi[(i, j)].re - id).abs()).max(levi[(i, j)].im.abs());
        }
    }
    let grad = ctx.log_j.gradient.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let r1111 = ctx.w.r_i_jbar_k_lbar(0, 0, 0, 0).re;
    let e = e_tilde(&ctx).value;
    let det = det_h_rho_boundary(&ctx).primary * ctx.j.powf(2.0 / 3.0);
    let claimed = 1.0 - 2.0 / 3.0 - 32.0 / (6.0 * E);
    vec![
        Assertion::close(g, "levi_form", "H(r)(0) = I₂ (largest entry gap)", levi_gap, 0.0, 1e-12),
        Assertion::close(g, "grad_log_j", "∂ log J(0) = 0", grad, 0.0, 1e-10),
        Assertion::close(g, "r_1111", "r_{11̄11̄}(0) = −32/e", r1111, -32.0 / E, 1e-8),
        Assertion::close(g, "e_tilde", "Ẽ(0) = −32/(6e)", e, -32.0 / (6.0 * E), 1e-7),
        Assertion::close(g, "det_h_rho", "det H(ρ)(0) J^{2/3} = 1 − 2/3 − 32/(6e)", det, claimed, 1e-6).with_note(format!(
            "direct evaluation gives 1 − 32/(6e) = {:.6}: the second fundamental term r_ik(0) vanishes here, so the −2/3 does not arise; both values are negative",
            1.0 - 32.0 / (6.0 * E)
        )),
        run(g, "strict_convexity", "real Hessian of r positive definite at 200 boundary samples", || {
            let d = domain(g, &[])?;
            let set = sample_boundary(&d, 200, SUITE_SEED).map_err(|e| e.to_string())?;
            let mut min = f64::INFINITY;
            for s in &set.samples {
                min = min.min(real_hessian_min_eigenvalue(&d.ast.jet(&s.point, 2).map_err(|e| e.to_string())?));
            }
            let ok = set.samples.len() == 200 && min > 0.0;
            Ok(Assertion::holds(g, "strict_convexity", "real Hessian of r positive definite at 200 boundary samples", min, ok))
        }),
    ]
}

fn example52_group() -> Vec<Assertion> {
    let g = "example52";
    let alpha = 1.05;
    let mut out = Vec::new();
    out.push(run(g, "non_convex_witness", "∂²r/∂y_n²(0) = 2 − 2α = −0.1", || {
        let d = domain(g, &[("alpha", alpha)])?;
        let jet = d.ast.jet(&[0.0; 4], 2).map_err(|e| e.to_string())?;
        let v = jet.partial(&[3, 3]);
        Ok(Assertion::close(g, "non_convex_witness", "∂²r/∂y_n²(0) = 2 − 2α = −0.1", v, -0.1, 1e-14))
    }));
    out.push(run(g, "positivity_scan", "L₂ > 0 at 500 boundary samples", || {
        let d = domain(g, &[("alpha", alpha)])?;
        let c = classify(&d, 500, SUITE_SEED, L2Variant::Eq311, 1e-10).map_err(|e| e.to_string())?;
        let v = &c.verdict;
        let ok = v.samples_used >= 500 && v.margin > 0.0 && v.classification == Classification::StrictlySuperPsc;
        Ok(Assertion::holds(g, "positivity_scan", "L₂ > 0 at 500 boundary samples", v.margin, ok)
            .with_note(format!("{} samples, margin {:.6}", v.samples_used, v.margin)))
    }));
    out.push({
        let too_big = domain(g, &[("alpha", alpha), ("c", example52_c_max(alpha) * 1.01)]).is_err();
        let bad_alpha = domain(g, &[("alpha", 1.2)]).is_err() && domain(g, &[("alpha", 1.0)]).is_err();
        let at_max = domain(g, &[("alpha", alpha), ("c", example52_c_max(alpha))]).is_ok();
        Assertion::holds(g, "parameter_guard", "C ≤ (9 − 8α)(1 + α)/256 and 1 < α < 9/8 are enforced", example52_c_max(alpha), too_big && bad_alpha && at_max)
    });
    out.push(run(g, "boundary_region", "boundary samples satisfy −2/(1+α) < x_n < 0", || {
        let d = domain(g, &[("alpha", alpha)])?;
        let set = sample_boundary(&d, 500, SUITE_SEED).map_err(|e| e.to_string())?;
        let lo = -2.0 / (1.0 + alpha);
        let xn: Vec<f64> = set.samples.iter().map(|s| s.point[2 * (d.n - 1)]).collect();
        let max = xn.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let outside = xn.iter().filter(|&&x| !(x > lo && x < 0.0)).count();
        let resid = set.samples.iter().map(|s| s.residual.abs()).fold(0.0, f64::max);
        Ok(Assertion::holds(g, "boundary_region", "boundary samples satisfy −2/(1+α) < x_n < 0", max, outside == 0 && resid <= 1e-10)
            .with_note(format!(
                "{outside} of {} samples lie outside; the region bound drops the (1 − α)|Im z|² terms, which are negative for α > 1, so boundary points with large Im z_j reach x_n > 0",
                xn.len()
            )))
    }));
    out
}

/// Runs the selected groups, all of them when `only` is `None`.
pub fn run_suite(only: Option<&str>) -> Vec<Assertion> {
    let mut out = Vec::new();
    for g in GROUPS {
        if only.is_some_and(|o| o != g) {
            continue;
        }
        out.extend(match g {
            "expr" => expr_group(),
            "fefferman" => fefferman_group(),
            "criteria" => criteria_group(),
            "geometry" => geometry_group(),
            "spectrum" => spectrum_group(),
            "example51" => example51_group(),
            "example52" => example52_group(),
            _ => unreachable!(),
        });
    }
    out
}
