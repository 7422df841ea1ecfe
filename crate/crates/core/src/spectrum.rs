//! The complete Kähler metric `g = H(u)` with `u = −log(−r)`, its Ricci form,
//! the Laplace–Beltrami operator, and Rayleigh-quotient upper bounds for the
//! bottom of its spectrum.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::calculus::HermitianForm;
use crate::expr::{bump_series, DomainSpec, ExprAst, ExprError};
use crate::fefferman::j_value;
use crate::jets::{complex_gradient, complex_hessian, dz, dzbar, jet_det, Jet, JetError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("point is not interior: r = {0:.6e}")]
    NotInterior(f64),
    #[error("metric is not positive definite here (min eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("exponent s = {s} is not integrable in dimension {n}: need s > n/2")]
    NonIntegrable { s: f64, n: usize },
    #[error("cutoff depth {0} is outside (0, 0.25)")]
    Cutoff(f64),
}

/// `g_{ij̄}`, its inverse and determinant at an interior point.
#[derive(Debug, Clone)]
pub struct MetricData {
    pub point: Vec<f64>,
    pub g: DMatrix<Complex64>,
    pub inverse: DMatrix<Complex64>,
    pub det: f64,
    /// `J(r) e^{(n+1)u}` at the same point, which should equal `det`.
    pub j_exp: f64,
}

/// `H(u)` for `u = −log(−r)`, assembled as `H(r)/(−r) + r_i r_j̄ / r²`.
pub fn metric_at(domain: &DomainSpec, point: &[f64]) -> Result<MetricData, SpectrumError> {
    let jet = domain.ast.jet(point, 2)?;
    let r = jet.value();
    if r >= 0.0 {
        return Err(SpectrumError::NotInterior(r));
    }
    let n = jet.dim() / 2;
    let grad = complex_gradient(&jet);
    let h = complex_hessian(&jet);
    let g = DMatrix::from_fn(n, n, |i, j| h[(i, j)] / (-r) + grad[i] * grad[j].conj() / (r * r));
    let form = HermitianForm::symmetrized(g);
    let lo = form.min_eigenvalue();
    if lo <= 0.0 {
        return Err(SpectrumError::NotPositive(lo));
    }
    let g = form.matrix().clone();
    let det = g.determinant().re;
    let inverse = g.clone().try_inverse().ok_or(SpectrumError::NotPositive(lo))?;
    let u = -(-r).ln();
    Ok(MetricData {
        point: point.to_vec(),
        g,
        inverse,
        det,
        j_exp: j_value(&jet) * ((n as f64 + 1.0) * u).exp(),
    })
}

impl MetricData {
    /// `|det g − J e^{(n+1)u}| / det g`.
    pub fn det_identity_residual(&self) -> f64 {
        (self.det - self.j_exp).abs() / self.det.abs()
    }

    /// `Σ g^{ij̄} a_i conj(a_j)` with `g^{ij̄} = (g⁻¹)_{ji}`.
    pub fn norm_sq(&self, a: &[Complex64]) -> f64 {
        let n = a.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.inverse[(j, i)] * a[i] * a[j].conj();
            }
        }
        acc.re
    }
}

/// `R_{kl̄} = −∂_k ∂_l̄ log det g`, from a fourth-order jet of `r`.
pub fn ricci_at(domain: &DomainSpec, point: &[f64]) -> Result<HermitianForm, SpectrumError> {
    let r = domain.ast.jet(point, 4)?;
    if r.value() >= 0.0 {
        return Err(SpectrumError::NotInterior(r.value()));
    }
    let n = r.dim() / 2;
    let u: Jet = -(-r).ln()?;
    let uc = u.to_complex();
    let g: Vec<Vec<Jet<Complex64>>> = (0..n)
        .map(|i| {
            let ui = dz(&uc, i);
            (0..n).map(|j| dzbar(&ui, j)).collect()
        })
        .collect();
    let log_det = jet_det(g)?.re().ln()?;
    Ok(HermitianForm::symmetrized(-complex_hessian(&log_det)))
}

/// `‖R + (n+1) g‖ / ‖g‖` in the Frobenius norm.
pub fn einstein_defect(domain: &DomainSpec, point: &[f64]) -> Result<f64, SpectrumError> {
    let ric = ricci_at(domain, point)?;
    let m = metric_at(domain, point)?;
    let n = m.g.nrows() as f64;
    Ok((ric.matrix() + &m.g * Complex64::new(n + 1.0, 0.0)).norm() / m.g.norm())
}

/// Smallest eigenvalue of `R + (n+1) g`; nonnegative where the metric is
/// super-Einstein.
pub fn einstein_deficit(domain: &DomainSpec, point: &[f64]) -> Result<f64, SpectrumError> {
    let ric = ricci_at(domain, point)?;
    let m = metric_at(domain, point)?;
    let n = m.g.nrows() as f64;
    Ok(HermitianForm::symmetrized(ric.matrix() + &m.g * Complex64::new(n + 1.0, 0.0)).min_eigenvalue())
}

/// `Δ_g f = −4 Σ g^{ij̄} ∂²f/∂z_i∂z̄_j`, nonnegative as an operator.
pub fn laplacian(domain: &DomainSpec, f: &ExprAst, point: &[f64]) -> Result<f64, SpectrumError> {
    let m = metric_at(domain, point)?;
    let fh = complex_hessian(&f.jet(point, 2)?);
    Ok(-4.0 * (&m.inverse * fh).trace().re)
}

/// Cutoff `χ(x) = 1 − e·g_ε(x − ε)` for `x ≥ ε`, zero below; equals one for
/// `x ≥ 2ε`. Returns `(χ, χ′)`.
pub fn cutoff(x: f64, eps: f64) -> (f64, f64) {
    if x <= eps {
        return (0.0, 0.0);
    }
    let g = bump_series(x - eps, eps, 1);
    let e = std::f64::consts::E;
    (1.0 - e * g[0], -e * g[1])
}

/// Radial test profile `φ(x) = x^s χ(x)` in `x = −ρ` and its derivative.
pub fn test_profile(x: f64, s: f64, eps: f64) -> (f64, f64) {
    let (c, dc) = cutoff(x, eps);
    let p = x.powf(s);
    (p * c, s * x.powf(s - 1.0) * c + p * dc)
}

/// One point of a Rayleigh scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RayleighPoint {
    pub s: f64,
    pub quotient: f64,
    /// Propagated quadrature error estimate, or Monte Carlo standard error.
    pub stderr: f64,
}

const PANELS: usize = 24;

fn panel_integral(f: &(dyn Fn(f64) -> f64 + Sync), a: f64, b: f64, tol: f64) -> (f64, f64) {
    let edges: Vec<f64> = (0..=PANELS).map(|k| a + (b - a) * k as f64 / PANELS as f64).collect();
    let parts: Vec<(f64, f64)> = edges
        .par_windows(2)
        .map(|w| {
            let o = quadrature::integrate(f, w[0], w[1], tol / PANELS as f64);
            (o.integral, o.error_estimate)
        })
        .collect();
    // fixed summation order keeps the result independent of scheduling
    parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1))
}

/// Rayleigh quotient of `(−ρ)^s χ_ε(−ρ)` on the unit ball, with
/// `ρ = |z|² − 1`, reduced to radial integrals in `y = log(1 − |z|²)`:
/// `Q = ∫ 4 t^n x^{1−n} φ′² dt / ∫ t^{n−1} x^{−(n+1)} φ² dt`, `x = 1 − t`.
pub fn rayleigh_quotient_ball(n: usize, s: f64, eps: f64) -> Result<RayleighPoint, SpectrumError> {
    if s <= n as f64 / 2.0 {
        return Err(SpectrumError::NonIntegrable { s, n });
    }
    if !(eps > 0.0 && eps < 0.25) {
        return Err(SpectrumError::Cutoff(eps));
    }
    let nf = n as f64;
    let num = |y: f64| {
        let x = y.exp();
        let (_, dphi) = test_profile(x, s, eps);
        4.0 * (1.0 - x).powf(nf) * x.powf(1.0 - nf) * dphi * dphi * x
    };
    let den = |y: f64| {
        let x = y.exp();
        let (phi, _) = test_profile(x, s, eps);
        (1.0 - x).powf(nf - 1.0) * x.powf(-(nf + 1.0)) * phi * phi * x
    };
    let (y0, y1, y2) = (eps.ln(), (2.0 * eps).ln(), 0.0);
    let tol = 1e-12;
    let (n1, en1) = panel_integral(&num, y0, y1, tol);
    let (n2, en2) = panel_integral(&num, y1, y2, tol);
    let (d1, ed1) = panel_integral(&den, y0, y1, tol);
    let (d2, ed2) = panel_integral(&den, y1, y2, tol);
    let (nv, dv) = (n1 + n2, d1 + d2);
    let q = nv / dv;
    let stderr = q * ((en1 + en2) / nv.abs() + (ed1 + ed2) / dv.abs());
    Ok(RayleighPoint {
        s,
        quotient: q,
        stderr,
    })
}

/// [`rayleigh_quotient_ball`] over a grid of exponents.
pub fn rayleigh_scan(n: usize, s_grid: &[f64], eps: f64) -> Result<Vec<RayleighPoint>, SpectrumError> {
    s_grid.iter().map(|&s| rayleigh_quotient_ball(n, s, eps)).collect()
}

/// `lo, lo + step, …` up to `hi` inclusive, robust to rounding of the step.
pub fn s_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count).map(|k| lo + step * k as f64).collect()
}

/// Monte Carlo estimate of the Rayleigh quotient of `(−r)^s χ_ε(−r)` on any
/// domain, sampling uniformly in the ball of radius `bounding_radius` about
/// the interior point. Batches use independent streams seeded by
/// `(seed, batch)` and are summed in batch order.
pub fn mc_rayleigh(
    domain: &DomainSpec,
    s: f64,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<RayleighPoint, SpectrumError> {
    const BATCH: usize = 10_000;
    let dim = domain.interior_point.len();
    let radius = domain.bounding_radius;
    let batches = samples.div_ceil(BATCH);
    let sums: Vec<Result<[f64; 5], SpectrumError>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = BATCH.min(samples - b * BATCH);
            let mut acc = [0.0; 5];
            for _ in 0..count {
                let p = uniform_in_ball(&mut rng, &domain.interior_point, radius, dim);
                let (a, d) = mc_integrands(domain, &p, s, eps)?;
                acc[0] += a;
                acc[1] += d;
                acc[2] += a * a;
                acc[3] += d * d;
                acc[4] += a * d;
            }
            Ok(acc)
        })
        .collect();
    let mut tot = [0.0; 5];
    for part in sums {
        let part = part?;
        for k in 0..5 {
            tot[k] += part[k];
        }
    }
    let m = samples as f64;
    let (ma, md) = (tot[0] / m, tot[1] / m);
    let (vaa, vdd, vad) = (tot[2] / m - ma * ma, tot[3] / m - md * md, tot[4] / m - ma * md);
    let q = ma / md;
    // delta method for a ratio of means
    let var = (vaa - 2.0 * q * vad + q * q * vdd) / (md * md * m);
    Ok(RayleighPoint {
        s,
        quotient: q,
        stderr: var.max(0.0).sqrt(),
    })
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, centre: &[f64], radius: f64, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
        let len2: f64 = v.iter().map(|x| x * x).sum();
        if len2 <= 1.0 {
            return centre.iter().zip(&v).map(|(c, x)| c + radius * x).collect();
        }
    }
}

/// `(4|∂f|²_g det g, f² det g)` at `p`, zero outside the domain.
fn mc_integrands(domain: &DomainSpec, p: &[f64], s: f64, eps: f64) -> Result<(f64, f64), SpectrumError> {
    let jet = domain.ast.jet(p, 1)?;
    let x = -jet.value();
    if x <= eps {
        return Ok((0.0, 0.0));
    }
    let (phi, dphi) = test_profile(x, s, eps);
    let m = metric_at(domain, p)?;
    // ∂_i f = −φ′(−r) r_i
    let grad: Vec<Complex64> = complex_gradient(&jet).iter().map(|c| -dphi * c).collect();
    Ok((4.0 * m.norm_sq(&grad) * m.det, phi * phi * m.det))
}
