//! Radial Cheng–Yau problem on the unit ball.
//!
//! For `u(z) = f(|z|²)` the equation `det H(u) = e^{(n+1)u}` becomes
//! `(f′)^{n−1}(f′ + t f″) = e^{(n+1)f}` on `[0, 1)`. It is discretized on
//! `[0, 1 − ε]` with second-order central differences in a stretched
//! coordinate `ξ`, where `1 − t = (1 − cξ)^m`, so nodes crowd towards the
//! blow-up. The boundary node carries the exact-ball value `−log ε` and the
//! origin row uses the regular limit `(f′)^n = e^{(n+1)f}`.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::fefferman::J_bordered;
use crate::jets::WirtingerData;

use nalgebra::DMatrix;

/// Exponent of the mesh stretching.
pub const GRADING: i32 = 4;

/// Newton updates below this, relative to `max |f|`, count as roundoff.
pub const STAGNATION: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension n must be at least 1")]
    Dimension,
    #[error("boundary offset {0} is outside (0, 0.1]")]
    Offset(f64),
    #[error("need at least 4 nodes, got {0}")]
    Nodes(usize),
    #[error("Newton iteration stalled after {iterations} steps with residual {residual:.3e}")]
    Diverged { iterations: usize, residual: f64 },
}

/// Solver settings.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RadialOptions {
    pub n: usize,
    pub nodes: usize,
    pub eps_grid: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl RadialOptions {
    pub fn new(n: usize, nodes: usize) -> Self {
        Self {
            n,
            nodes,
            eps_grid: 1e-2,
            tol: 1e-10,
            max_iter: 60,
        }
    }
}

/// Discrete radial profile `u = f(t)`, `t = |z|²`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialProfile {
    pub n: usize,
    pub t: Vec<f64>,
    pub f: Vec<f64>,
    pub fp: Vec<f64>,
    pub fpp: Vec<f64>,
    /// `ρ = −e^{−f}`.
    pub rho: Vec<f64>,
    pub iterations: usize,
    /// Max relative residual `|(f′)^{n−1}(f′+tf″)e^{−(n+1)f} − 1|` over the nodes.
    pub final_residual: f64,
    /// Set when iteration stopped because the Newton update fell to
    /// roundoff size before the residual reached the tolerance. The second
    /// difference amplifies rounding of `f` by `1/h²`, which puts a floor
    /// near `1e-10` on the residual at 2000 nodes.
    pub stopped_at_roundoff: bool,
}

/// Node map `ξ ↦ t` and its first two derivatives.
#[derive(Debug, Clone)]
struct Mesh {
    h: f64,
    t: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Mesh {
    fn new(nodes: usize, eps: f64) -> Self {
        let m = GRADING;
        let c = 1.0 - eps.powf(1.0 / f64::from(m));
        let h = 1.0 / (nodes - 1) as f64;
        let mut t = Vec::with_capacity(nodes);
        let mut d1 = Vec::with_capacity(nodes);
        let mut d2 = Vec::with_capacity(nodes);
        for k in 0..nodes {
            let s = 1.0 - c * k as f64 * h;
            t.push(1.0 - s.powi(m));
            d1.push(f64::from(m) * c * s.powi(m - 1));
            d2.push(-f64::from(m * (m - 1)) * c * c * s.powi(m - 2));
        }
        // pin the last node exactly
        t[nodes - 1] = 1.0 - eps;
        Self { h, t, d1, d2 }
    }

    /// `(f′, f″)` at node `k` from the stencil.
    fn derivs(&self, f: &[f64], k: usize) -> (f64, f64) {
        let h = self.h;
        let last = f.len() - 1;
        let (s1, s2) = if k == 0 {
            ((-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h), (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h))
        } else if k == last {
            (
                (3.0 * f[k] - 4.0 * f[k - 1] + f[k - 2]) / (2.0 * h),
                (2.0 * f[k] - 5.0 * f[k - 1] + 4.0 * f[k - 2] - f[k - 3]) / (h * h),
            )
        } else {
            ((f[k + 1] - f[k - 1]) / (2.0 * h), (f[k + 1] - 2.0 * f[k] + f[k - 1]) / (h * h))
        };
        let p1 = self.d1[k];
        (s1 / p1, (s2 - s1 * self.d2[k] / p1) / (p1 * p1))
    }
}

/// `(f′)^{n−1}(f′ + t f″)`, the radial `det H(u)`.
pub fn radial_det(n: usize, t: f64, fp: f64, fpp: f64) -> f64 {
    fp.powi(n as i32 - 1) * (fp + t * fpp)
}

/// `(f′)^{n−1}(f′ + t f″) − e^{(n+1)f}` at node `k` of a profile.
pub fn radial_residual(profile: &RadialProfile, k: usize) -> f64 {
    let n = profile.n;
    radial_det(n, profile.t[k], profile.fp[k], profile.fpp[k]) - ((n as f64 + 1.0) * profile.f[k]).exp()
}

impl RadialProfile {
    /// Profile from analytic values and derivatives.
    pub fn from_parts(n: usize, t: Vec<f64>, f: Vec<f64>, fp: Vec<f64>, fpp: Vec<f64>) -> Self {
        let rho = f.iter().map(|v| -(-v).exp()).collect();
        Self {
            n,
            t,
            f,
            fp,
            fpp,
            rho,
            iterations: 0,
            final_residual: f64::NAN,
            stopped_at_roundoff: false,
        }
    }

    /// Largest `|f_k + log(1 − t_k)|` over nodes with `t_k ≤ t_max`.
    pub fn max_deviation_from_ball(&self, t_max: f64) -> f64 {
        self.t
            .iter()
            .zip(&self.f)
            .filter(|(t, _)| **t <= t_max + 1e-12)
            .map(|(t, f)| (f + (1.0 - t).ln()).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|ρ_k − (t_k − 1)|` over nodes with `t_k ≤ t_max`.
    pub fn max_rho_deviation(&self, t_max: f64) -> f64 {
        self.t
            .iter()
            .zip(&self.rho)
            .filter(|(t, _)| **t <= t_max + 1e-12)
            .map(|(t, r)| (r - (t - 1.0)).abs())
            .fold(0.0, f64::max)
    }

    /// Relative residual of `det H(u) = J(ρ) e^{(n+1)u}` at node `k`, with
    /// `J(ρ)` taken from the bordered determinant at `z = (√t, 0, …, 0)`.
    pub fn log_identity_residual(&self, k: usize) -> f64 {
        let n = self.n;
        let (t, f, fp, fpp) = (self.t[k], self.f[k], self.fp[k], self.fpp[k]);
        let lhs = radial_det(n, t, fp, fpp);
        // ρ = P(t) with P′ = e^{−f} f′ and P″ = e^{−f}(f″ − f′²)
        let e = (-f).exp();
        let (p1, p2) = (e * fp, e * (fpp - fp * fp));
        let x = t.sqrt();
        let c = |v: f64| Complex64::new(v, 0.0);
        // ρ_i = P′ z̄_i, ρ_{ij̄} = P′ δ_ij + P″ z̄_i z_j
        let mut grad = vec![c(0.0); n];
        grad[0] = c(p1 * x);
        let levi = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { p1 } else { 0.0 };
            let rank = if i == 0 && j == 0 { p2 * t } else { 0.0 };
            c(diag + rank)
        });
        let zeros2 = DMatrix::from_element(n, n, c(0.0));
        let w = WirtingerData::from_parts(n, -e, grad, levi, zeros2, vec![c(0.0); n * n * n], vec![c(0.0); n * n * n * n]);
        let rhs = J_bordered(&w) * ((n as f64 + 1.0) * f).exp();
        (lhs - rhs).abs() / lhs.abs()
    }
}

fn relative_residual(n: usize, mesh: &Mesh, f: &[f64], fb: f64) -> Vec<f64> {
    let last = f.len() - 1;
    (0..f.len())
        .map(|k| {
            if k == last {
                return f[k] - fb;
            }
            let (fp, fpp) = mesh.derivs(f, k);
            radial_det(n, mesh.t[k], fp, fpp) * (-(n as f64 + 1.0) * f[k]).exp() - 1.0
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn strictly_psh(n: usize, mesh: &Mesh, f: &[f64]) -> bool {
    (0..f.len() - 1).all(|k| {
        let (fp, fpp) = mesh.derivs(f, k);
        fp > 0.0 && (n == 1 || fp + mesh.t[k] * fpp > 0.0) && radial_det(n, mesh.t[k], fp, fpp) > 0.0
    })
}

/// Newton step: solves `J δ = −R` for the banded Jacobian of the relative
/// residual. Row 0 couples nodes 0..2, interior rows are tridiagonal and the
/// last row is the Dirichlet identity.
fn newton_step(n: usize, mesh: &Mesh, f: &[f64], res: &[f64]) -> Vec<f64> {
    let len = f.len();
    let h = mesh.h;
    let nf = n as f64;
    let mut lower = vec![0.0; len];
    let mut diag = vec![0.0; len];
    let mut upper = vec![0.0; len];
    let mut upper2 = 0.0;
    let df = |fp: f64, fpp: f64, t: f64| -> (f64, f64) {
        let da = if n > 1 {
            (nf - 1.0) * fp.powi(n as i32 - 2) * (fp + t * fpp) + fp.powi(n as i32 - 1)
        } else {
            1.0
        };
        (da, t * fp.powi(n as i32 - 1))
    };
    for k in 0..len - 1 {
        let (fp, fpp) = mesh.derivs(f, k);
        let t = mesh.t[k];
        let e = (-(nf + 1.0) * f[k]).exp();
        let big_f = radial_det(n, t, fp, fpp);
        let (p1, p2) = (mesh.d1[k], mesh.d2[k]);
        let (da, db) = df(fp, fpp, t);
        if k == 0 {
            // t = 0 row, f″ drops out: F = (f′)^n
            let c = nf * fp.powi(n as i32 - 1) / (2.0 * h * p1) * e;
            diag[0] = -3.0 * c - (nf + 1.0) * big_f * e;
            upper[0] = 4.0 * c;
            upper2 = -c;
            continue;
        }
        // ∂f′/∂f_{k±1} = ±1/(2h p1); ∂f″/∂f_{k±1} = (1/h² ∓ p2/(2h p1))/p1²
        let a_pm = 1.0 / (2.0 * h * p1);
        let b_p = (1.0 / (h * h) - p2 / (2.0 * h * p1)) / (p1 * p1);
        let b_m = (1.0 / (h * h) + p2 / (2.0 * h * p1)) / (p1 * p1);
        let b_0 = -2.0 / (h * h * p1 * p1);
        lower[k] = e * (-da * a_pm + db * b_m);
        upper[k] = e * (da * a_pm + db * b_p);
        diag[k] = e * db * b_0 - (nf + 1.0) * big_f * e;
    }
    diag[len - 1] = 1.0;
    let mut rhs: Vec<f64> = res.iter().map(|r| -r).collect();
    // fold the (0, 2) entry away using row 1
    if upper2 != 0.0 {
        let m = upper2 / upper[1];
        diag[0] -= m * lower[1];
        upper[0] -= m * diag[1];
        rhs[0] -= m * rhs[1];
    }
    // Thomas algorithm
    for k in 1..len {
        let m = lower[k] / diag[k - 1];
        diag[k] -= m * upper[k - 1];
        rhs[k] -= m * rhs[k - 1];
    }
    let mut x = vec![0.0; len];
    x[len - 1] = rhs[len - 1] / diag[len - 1];
    for k in (0..len - 1).rev() {
        x[k] = (rhs[k] - upper[k] * x[k + 1]) / diag[k];
    }
    x
}

/// Damped Newton on the collocation system, starting from the linear lift of
/// the boundary value (zero homogeneous part).
pub fn solve_radial(opts: &RadialOptions) -> Result<RadialProfile, SolverError> {
    let RadialOptions {
        n,
        nodes,
        eps_grid,
        tol,
        max_iter,
    } = *opts;
    if n == 0 {
        return Err(SolverError::Dimension);
    }
    if !(eps_grid > 0.0 && eps_grid <= 0.1) {
        return Err(SolverError::Offset(eps_grid));
    }
    if nodes < 4 {
        return Err(SolverError::Nodes(nodes));
    }
    let mesh = Mesh::new(nodes, eps_grid);
    let fb = -eps_grid.ln();
    let mut f: Vec<f64> = (0..nodes).map(|k| fb * k as f64 * mesh.h).collect();
    let mut res = relative_residual(n, &mesh, &f, fb);
    let mut norm = max_abs(&res);
    let mut iterations = 0;
    let mut stopped_at_roundoff = false;
    while norm > tol {
        if iterations >= max_iter {
            return Err(SolverError::Diverged {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        let step = newton_step(n, &mesh, &f, &res);
        if max_abs(&step) <= STAGNATION * (1.0 + max_abs(&f)) {
            stopped_at_roundoff = true;
            break;
        }
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=20 {
            let trial: Vec<f64> = f.iter().zip(&step).map(|(a, b)| a + lambda * b).collect();
            if strictly_psh(n, &mesh, &trial) {
                let r = relative_residual(n, &mesh, &trial, fb);
                let rn = max_abs(&r);
                if rn < norm {
                    accepted = Some((trial, r, rn));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, r, rn)) => {
                f = trial;
                res = r;
                norm = rn;
            }
            None => {
                return Err(SolverError::Diverged {
                    iterations,
                    residual: norm,
                })
            }
        }
    }
    let (fp, fpp): (Vec<f64>, Vec<f64>) = (0..nodes).map(|k| mesh.derivs(&f, k)).unzip();
    let mut profile = RadialProfile::from_parts(n, mesh.t.clone(), f, fp, fpp);
    profile.iterations = iterations;
    profile.final_residual = norm;
    profile.stopped_at_roundoff = stopped_at_roundoff;
    Ok(profile)
}
