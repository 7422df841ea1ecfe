//! Boundary criteria for plurisubharmonicity of the Fefferman solution.
//!
//! Everything here is evaluated at boundary points from a Taylor jet of the
//! defining function. The central quantity is `L₂[r]`, the factor that
//! relates `det H(ρ)` on the boundary to `det H(r)`; the rest are
//! decompositions, bounds and companions of it.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::calculus::{
    raise, tilde_grad_norm_sq, tilde_laplacian, CalculusError, HermitianForm, RaisedData, R_op,
    BOUNDARY_TOL,
};
use crate::expr::{DomainSpec, ExprAst, ExprError};
use crate::fefferman::{
    approximation_jet, log_j_derivatives, psh_shift_auto, Approximation, FeffermanError, LogJ,
    J_bordered,
};
use crate::geometry::{sample_boundary, BoundarySample, GeometryError};
use crate::jets::{complex_gradient, complex_hessian, wirtinger, Jet, WirtingerData};

/// `|margin|` below this counts as zero.
pub const MARGIN_TOL: f64 = 1e-7;
/// Eigenvalue threshold for the convexity verdict.
pub const CONVEXITY_TOL: f64 = 1e-8;
/// Relative disagreement between the two `det H(ρ)` forms that flags a point.
pub const DET_FORMS_TOL: f64 = 1e-6;
/// Condition number of `H(r)` above which a point is flagged.
pub const CONDITION_LIMIT: f64 = 1e10;
/// Tangency tolerance for pseudo-Ricci arguments.
pub const TANGENCY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriteriaError {
    #[error(transparent)]
    Fefferman(#[from] FeffermanError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("point is not on the boundary: |r| = {0:.3e}")]
    NotBoundary(f64),
    #[error("J(r) = {0:.6e} is not positive")]
    NonPositiveJ(f64),
    #[error("this quantity is only defined for n = {expected}, got n = {got}")]
    Dimension { expected: usize, got: usize },
    #[error("∂r vanishes at the boundary point")]
    DegenerateGradient,
    #[error("vector is not complex tangent: |Σ r_j v_j| = {0:.3e}")]
    NotTangent(f64),
}

/// Which weighting of the gradient term `L₂` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum L2Variant {
    /// Gradient term weighted by `|∂r|²_r / (n+1)²`, as the boundary
    /// expansion of `det H(ρ)` produces it.
    #[default]
    Eq311,
    /// Gradient term weighted by `|∂r|²_r` alone.
    Def12,
}

impl std::str::FromStr for L2Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "eq311" => Ok(Self::Eq311),
            "def12" => Ok(Self::Def12),
            other => Err(format!("unknown L2 variant '{other}' (expected eq311 or def12)")),
        }
    }
}

/// Pointwise ingredients shared by all boundary criteria.
#[derive(Debug, Clone)]
pub struct BoundaryContext {
    pub w: WirtingerData,
    pub rd: RaisedData,
    pub j: f64,
    pub log_j: LogJ,
}

impl BoundaryContext {
    /// Builds the context from a jet of order `>= 4` at a boundary point.
    pub fn new(r_jet: &Jet) -> Result<Self, CriteriaError> {
        Self::with_tolerance(r_jet, BOUNDARY_TOL)
    }

    pub fn with_tolerance(r_jet: &Jet, tol: f64) -> Result<Self, CriteriaError> {
        if r_jet.value().abs() >= tol {
            return Err(CriteriaError::NotBoundary(r_jet.value().abs()));
        }
        let w = wirtinger(r_jet);
        let j = J_bordered(&w);
        if j <= 0.0 {
            return Err(CriteriaError::NonPositiveJ(j));
        }
        let rd = raise(&w)?;
        let log_j = log_j_derivatives(r_jet)?;
        Ok(Self { w, rd, j, log_j })
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    fn nf(&self) -> f64 {
        self.w.n() as f64
    }

    /// `Δ̃ log J`.
    pub fn lap_log_j(&self) -> f64 {
        tilde_laplacian(&self.rd, &self.log_j.hessian)
    }

    /// `|∇̃ log J|²`.
    pub fn grad_log_j_sq(&self) -> f64 {
        tilde_grad_norm_sq(&self.rd, &self.log_j.gradient)
    }

    /// `Re R log J`.
    pub fn radial_log_j(&self) -> f64 {
        R_op(&self.rd, &self.log_j.gradient).re
    }

    /// `Δ̃ r_k = Σ ã^{ij̄} r_{ij̄k}`.
    pub fn tilde_lap_rk(&self) -> Vec<Complex64> {
        let n = self.n();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        acc += self.rd.a_tilde(i, j) * self.w.r_i_jbar_k(i, j, k);
                    }
                }
                acc
            })
            .collect()
    }

    /// `Re Σ r^k Δ̃ r_k`.
    pub fn radial_tilde_lap(&self) -> f64 {
        let lap = self.tilde_lap_rk();
        (0..self.n()).map(|k| self.rd.r_up(k) * lap[k]).sum::<Complex64>().re
    }

    /// `Σ r^k r^i r_{ik}`.
    pub fn rrr(&self) -> Complex64 {
        let n = self.n();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += self.rd.r_up(i) * self.rd.r_up(k) * self.w.r_ij(i, k);
            }
        }
        acc
    }

    /// `X_k = Σ r^i r_{ik}`.
    fn x_vec(&self) -> Vec<Complex64> {
        let n = self.n();
        (0..n)
            .map(|k| (0..n).map(|i| self.rd.r_up(i) * self.w.r_ij(i, k)).sum())
            .collect()
    }

    /// `Σ ã^{kl̄} u_k conj(v_l)`.
    fn tilde_pair(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let n = self.n();
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            for l in 0..n {
                acc += self.rd.a_tilde(k, l) * u[k] * v[l].conj();
            }
        }
        acc
    }
}

/// `L₂[r]` at a boundary point.
pub fn l2(ctx: &BoundaryContext, variant: L2Variant) -> f64 {
    let n = ctx.nf();
    let q = ctx.rd.q();
    let weight = match variant {
        L2Variant::Eq311 => q / ((n + 1.0) * (n + 1.0)),
        L2Variant::Def12 => q,
    };
    1.0 + q / (n * (n + 1.0)) * ctx.lap_log_j() - 2.0 * ctx.radial_log_j() / (n + 1.0)
        - weight * ctx.grad_log_j_sq()
}

/// Boundary value of `det H(ρ)` computed two ways.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DetHRho {
    /// `det H(r) L₂[r] J^{-n/(n+1)}`.
    pub primary: f64,
    /// `J^{-n/(n+1)} det(H(r) − (r_i ∂_j̄ log J + ∂_i log J r_j̄)/(n+1) + 2B⁰ r_i r_j̄)`.
    pub rank_one: f64,
    pub relative_gap: f64,
}

/// `det H(ρ)` on the boundary via the `L₂` factor and via the explicit
/// rank-one corrected determinant.
pub fn det_h_rho_boundary(ctx: &BoundaryContext) -> DetHRho {
    let n = ctx.n();
    let nf = ctx.nf();
    let scale = ctx.j.powf(-nf / (nf + 1.0));
    let primary = ctx.rd.det_h() * l2(ctx, L2Variant::Eq311) * scale;
    let b0 = ctx.lap_log_j() / (2.0 * nf * (nf + 1.0));
    let g = &ctx.log_j.gradient;
    let m = DMatrix::from_fn(n, n, |i, j| {
        let ri = ctx.w.r_i(i);
        let rjb = ctx.w.r_ibar(j);
        ctx.w.levi()[(i, j)] - (ri * g[j].conj() + g[i] * rjb) / (nf + 1.0) + 2.0 * b0 * ri * rjb
    });
    let rank_one = scale * m.determinant().re;
    let relative_gap = (primary - rank_one).abs() / primary.abs().max(rank_one.abs()).max(1e-300);
    DetHRho {
        primary,
        rank_one,
        relative_gap,
    }
}

/// `det H(ρ₁)` read off the complex Hessian of a `ρ₁` jet; needs an `r` jet
/// of order `>= 6`.
pub fn det_h_rho1_jet(r_jet: &Jet) -> Result<f64, CriteriaError> {
    let rho = approximation_jet(r_jet, Approximation::Rho1)?;
    Ok(complex_hessian(&rho).determinant().re)
}

/// `Ẽ(r)` and its two-sided bounds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ETilde {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// The error functional `Ẽ` with the bounds assembled from third and fourth
/// derivatives of `r`.
pub fn e_tilde(ctx: &BoundaryContext) -> ETilde {
    let n = ctx.n();
    let nf = ctx.nf();
    let q = ctx.rd.q();
    let cross = ctx.radial_tilde_lap();
    let value = q / (nf * (nf + 1.0))
        * (ctx.lap_log_j() - nf * ctx.grad_log_j_sq() / (nf + 1.0) - 2.0 * nf * cross / q);

    let terms = prop_terms(ctx);
    let lower = q / (nf * (nf + 1.0)) * (terms.a1 - terms.a2 - terms.a3 - nf * terms.a4 / (q * q))
        - 2.0 * cross / (nf + 1.0);
    let upper = q / (nf * (nf + 1.0)) * (terms.a1 + terms.a5 + 2.0 * terms.a6 / q)
        - 2.0 * cross / (nf + 1.0);
    let _ = n;
    ETilde {
        value,
        lower,
        upper,
    }
}

/// Contractions of the higher Wirtinger tensors that enter the bounds on `Ẽ`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PropTerms {
    /// `ã^{kl̄} ã^{ij̄} r_{ij̄kl̄}`
    pub a1: f64,
    /// `ã^{kl̄} ã^{iq̄} r^{pj̄} r_{ij̄k} r_{pq̄l̄}`
    pub a2: f64,
    /// `ã^{kl̄} Δ̃r_k conj(Δ̃r_l)`
    pub a3: f64,
    /// `ã^{kl̄} X_k conj(X_l)` with `X_k = r^i r_{ik}`
    pub a4: f64,
    /// `ã^{kl̄} ã^{iq̄} Y_{ik} conj(Y_{ql})` with `Y_{ik} = conj(r^j) r_{ij̄k}`
    pub a5: f64,
    /// `ã^{kl̄} ã^{iq̄} r_{ik} conj(r_{ql})`
    pub a6: f64,
}

pub fn prop_terms(ctx: &BoundaryContext) -> PropTerms {
    let n = ctx.n();
    let w = &ctx.w;
    let rd = &ctx.rd;
    let at = |i: usize, j: usize| rd.a_tilde(i, j);
    let mut a1 = Complex64::new(0.0, 0.0);
    let mut a2 = Complex64::new(0.0, 0.0);
    let mut a5 = Complex64::new(0.0, 0.0);
    let mut a6 = Complex64::new(0.0, 0.0);
    let y = |i: usize, k: usize| -> Complex64 {
        (0..n).map(|j| rd.r_up(j).conj() * w.r_i_jbar_k(i, j, k)).sum()
    };
    for k in 0..n {
        for l in 0..n {
            let akl = at(k, l);
            for i in 0..n {
                for j in 0..n {
                    a1 += akl * at(i, j) * w.r_i_jbar_k_lbar(i, j, k, l);
                }
                for qq in 0..n {
                    let aiq = at(i, qq);
                    let mut inner = Complex64::new(0.0, 0.0);
                    for p in 0..n {
                        for j in 0..n {
                            inner += rd.r_upper(p, j) * w.r_i_jbar_k(i, j, k) * w.r_i_jbar_kbar(p, qq, l);
                        }
                    }
                    a2 += akl * aiq * inner;
                    a5 += akl * aiq * y(i, k) * y(qq, l).conj();
                    a6 += akl * aiq * w.r_ij(i, k) * w.r_ij(qq, l).conj();
                }
            }
        }
    }
    let lap = ctx.tilde_lap_rk();
    let x = ctx.x_vec();
    PropTerms {
        a1: a1.re,
        a2: a2.re,
        a3: ctx.tilde_pair(&lap, &lap).re,
        a4: ctx.tilde_pair(&x, &x).re,
        a5: a5.re,
        a6: a6.re,
    }
}

/// `1 − 2 Re(r^k r^i r_{ik}) / ((n+1)|∂r|²_r) + Ẽ`, which equals `L₂`.
pub fn l2_decomposed(ctx: &BoundaryContext) -> f64 {
    let nf = ctx.nf();
    1.0 - 2.0 * ctx.rrr().re / ((nf + 1.0) * ctx.rd.q()) + e_tilde(ctx).value
}

/// Left side of the convexity-based sufficient condition:
/// `(n−1)/(n+1) + |∂r|²_r (A1 − A2 − A3)/(n(n+1)) − 2 Re r^k Δ̃r_k / (n+1)`.
pub fn convex_sufficient(ctx: &BoundaryContext) -> f64 {
    let nf = ctx.nf();
    let t = prop_terms(ctx);
    (nf - 1.0) / (nf + 1.0) + ctx.rd.q() / (nf * (nf + 1.0)) * (t.a1 - t.a2 - t.a3)
        - 2.0 * ctx.radial_tilde_lap() / (nf + 1.0)
}

/// The companion quantity that is nonnegative on convex domains:
/// `2/(n+1) − 2 Re(r^k r^i r_{ik}) / ((n+1)q) − ã^{kl̄} X_k conj(X_l) / ((n+1)q)`.
pub fn convex_companion(ctx: &BoundaryContext) -> f64 {
    let nf = ctx.nf();
    let q = ctx.rd.q();
    let x = ctx.x_vec();
    2.0 / (nf + 1.0) - 2.0 * ctx.rrr().re / ((nf + 1.0) * q) - ctx.tilde_pair(&x, &x).re / ((nf + 1.0) * q)
}

/// Planar quantity `det H(r)(1 − Re(r^1 r^1 r_11)/|∂r|²_r)`; needs `r_{11̄} ≠ 0`.
pub fn s_r(ctx: &BoundaryContext) -> Result<f64, CriteriaError> {
    if ctx.n() != 1 {
        return Err(CriteriaError::Dimension {
            expected: 1,
            got: ctx.n(),
        });
    }
    Ok(ctx.rd.det_h() * (1.0 - ctx.rrr().re / ctx.rd.q()))
}

/// Rotation-invariant form `r_{11̄} − Re(conj(r_1)² r_11)/|r_1|²`, which
/// needs no inverse of `H(r)`.
pub fn s_r_closed(w: &WirtingerData) -> Result<f64, CriteriaError> {
    if w.n() != 1 {
        return Err(CriteriaError::Dimension {
            expected: 1,
            got: w.n(),
        });
    }
    let r1 = w.r_i(0);
    if r1.norm() < 1e-14 {
        return Err(CriteriaError::DegenerateGradient);
    }
    Ok(w.levi()[(0, 0)].re - (r1.conj() * r1.conj() * w.r_ij(0, 0)).re / r1.norm_sqr())
}

/// Signed curvature of the planar level curve `{r = 0}`, positive where the
/// domain `{r < 0}` is convex. Uses real derivatives only.
pub fn planar_curvature(r_jet: &Jet) -> f64 {
    let rx = r_jet.partial(&[0]);
    let ry = r_jet.partial(&[1]);
    let rxx = r_jet.partial(&[0, 0]);
    let rxy = r_jet.partial(&[0, 1]);
    let ryy = r_jet.partial(&[1, 1]);
    let g2 = rx * rx + ry * ry;
    (ryy * rx * rx - 2.0 * rxy * rx * ry + rxx * ry * ry) / g2.powf(1.5)
}

/// Pseudo-Ricci form evaluated on a pair of complex tangent vectors.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PseudoRicci {
    #[serde(serialize_with = "ser_complex")]
    pub value: Complex64,
    /// Value with the `log J` Hessian term dropped; meaningful when
    /// `J = 1 + O(r²)` and reported only then.
    #[serde(serialize_with = "ser_opt_complex")]
    pub einstein_form: Option<Complex64>,
}

fn ser_complex<S: serde::Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&c.re)?;
    t.serialize_element(&c.im)?;
    t.end()
}

fn ser_opt_complex<S: serde::Serializer>(c: &Option<Complex64>, s: S) -> Result<S::Ok, S::Error> {
    match c {
        Some(c) => ser_complex(c, s),
        None => s.serialize_none(),
    }
}

fn tangency(w: &WirtingerData, v: &[Complex64]) -> f64 {
    (0..w.n()).map(|j| w.r_i(j) * v[j]).sum::<Complex64>().norm()
}

/// The matrix `−(log J)_{kl̄} + n (det H / J) r_{kl̄}`.
pub fn pseudo_ricci_matrix(ctx: &BoundaryContext) -> DMatrix<Complex64> {
    let nf = ctx.nf();
    let factor = nf * ctx.rd.det_h() / ctx.j;
    -ctx.log_j.hessian.matrix() + ctx.w.levi() * Complex64::new(factor, 0.0)
}

/// `Ric(w, v̄)` for `w, v` in the complex tangent space.
pub fn pseudo_ricci(
    ctx: &BoundaryContext,
    w_vec: &[Complex64],
    v_vec: &[Complex64],
) -> Result<PseudoRicci, CriteriaError> {
    for v in [w_vec, v_vec] {
        let t = tangency(&ctx.w, v);
        if t > TANGENCY_TOL {
            return Err(CriteriaError::NotTangent(t));
        }
    }
    let m = pseudo_ricci_matrix(ctx);
    let value = HermitianForm::symmetrized(m).pair(w_vec, v_vec);
    let nearly_one = ctx.log_j.value.abs() < 1e-8
        && ctx.log_j.gradient.iter().all(|c| c.norm() < 1e-8);
    let einstein_form = nearly_one.then(|| {
        let factor = ctx.nf() * ctx.rd.det_h() / ctx.j;
        HermitianForm::symmetrized(ctx.w.levi().clone()).pair(w_vec, v_vec) * factor
    });
    Ok(PseudoRicci {
        value,
        einstein_form,
    })
}

/// Smallest eigenvalue of the pseudo-Ricci form over a unitary tangent frame.
pub fn pseudo_ricci_min(ctx: &BoundaryContext, frame: &[Vec<Complex64>]) -> Option<f64> {
    if frame.is_empty() {
        return None;
    }
    let m = HermitianForm::symmetrized(pseudo_ricci_matrix(ctx));
    let k = frame.len();
    let restricted = DMatrix::from_fn(k, k, |a, b| m.pair(&frame[a], &frame[b]));
    Some(HermitianForm::symmetrized(restricted).min_eigenvalue())
}

/// Real Hessian of `r` as a symmetric `2n × 2n` matrix.
pub fn real_hessian(r_jet: &Jet) -> DMatrix<f64> {
    let d = r_jet.dim();
    DMatrix::from_fn(d, d, |i, j| r_jet.partial(&[i.min(j), i.max(j)]))
}

/// Smallest eigenvalue of the full real Hessian.
pub fn real_hessian_min_eigenvalue(r_jet: &Jet) -> f64 {
    SymmetricEigen::new(real_hessian(r_jet)).eigenvalues.min()
}

/// Smallest eigenvalue of the real Hessian restricted to the real tangent
/// space `∇r^⊥`.
pub fn tangent_hessian_min_eigenvalue(r_jet: &Jet) -> f64 {
    let d = r_jet.dim();
    let g = r_jet.gradient();
    let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let normal: Vec<f64> = g.iter().map(|x| x / gn).collect();
    let skip = (0..d)
        .max_by(|&a, &b| normal[a].abs().total_cmp(&normal[b].abs()))
        .expect("dimension >= 2");
    let mut basis: Vec<Vec<f64>> = vec![normal];
    for k in (0..d).filter(|&k| k != skip) {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        basis.push(v.iter().map(|x| x / len).collect());
    }
    basis.remove(0);
    let h = real_hessian(r_jet);
    let k = basis.len();
    let restricted = DMatrix::from_fn(k, k, |a, b| {
        let hb = &h * nalgebra::DVector::from_column_slice(&basis[b]);
        basis[a].iter().zip(hb.iter()).map(|(x, y)| x * y).sum::<f64>()
    });
    SymmetricEigen::new(restricted).eigenvalues.min()
}

/// All per-point criteria.
#[derive(Debug, Clone, Serialize)]
pub struct CriteriaPointData {
    pub index: usize,
    pub point: Vec<f64>,
    pub residual: f64,
    pub shift: f64,
    pub j: f64,
    pub det_h_r: f64,
    pub q: f64,
    pub condition: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "L2_def12")]
    pub l2_def12: f64,
    #[serde(rename = "E_tilde")]
    pub e_tilde: f64,
    #[serde(rename = "E_lower")]
    pub e_lower: f64,
    #[serde(rename = "E_upper")]
    pub e_upper: f64,
    #[serde(rename = "detH_rho_boundary")]
    pub det_h_rho_boundary: f64,
    #[serde(rename = "detH_rho_rank_one")]
    pub det_h_rho_rank_one: f64,
    #[serde(rename = "S_r")]
    pub s_r: Option<f64>,
    pub conv_crit_lhs: f64,
    pub convex_companion: f64,
    pub pseudo_ricci_min: Option<f64>,
    pub tangent_hessian_min: f64,
    pub flags: Vec<String>,
}

/// Jet of `r + (a/2) r²` from a jet of `r`.
pub fn shifted_jet(r_jet: &Jet, a: f64) -> Jet {
    if a == 0.0 {
        return r_jet.clone();
    }
    r_jet.clone() + (r_jet * r_jet).scale(0.5 * a)
}

/// The shift that makes `H(r)` positive definite at one boundary sample.
pub fn required_shift(ast: &ExprAst, point: &[f64]) -> Result<f64, CriteriaError> {
    let jet = ast.jet(point, 2)?;
    let levi = HermitianForm::symmetrized(complex_hessian(&jet));
    if levi.is_positive_definite() {
        return Ok(0.0);
    }
    let w = wirtinger(&ast.jet(point, 4)?);
    Ok(psh_shift_auto(&w)?.0)
}

/// Evaluates every criterion at one boundary sample of `r + (a/2) r²`.
pub fn evaluate_point(
    ast: &ExprAst,
    sample: &BoundarySample,
    shift: f64,
    tol_boundary: f64,
) -> Result<CriteriaPointData, CriteriaError> {
    let raw = ast.jet(&sample.point, 4)?;
    let jet = shifted_jet(&raw, shift);
    let ctx = BoundaryContext::with_tolerance(&jet, tol_boundary)?;
    let det = det_h_rho_boundary(&ctx);
    let e = e_tilde(&ctx);
    let n = ctx.n();
    let mut flags = Vec::new();
    if ctx.rd.condition() > CONDITION_LIMIT {
        flags.push("ill_conditioned".to_string());
    }
    if det.relative_gap > DET_FORMS_TOL {
        flags.push("det_forms_disagree".to_string());
    }
    let l2 = l2(&ctx, L2Variant::Eq311);
    let l2_def12 = l2_def12_of(&ctx);
    if (l2 > 0.0) != (l2_def12 > 0.0) {
        flags.push("l2_variants_disagree_in_sign".to_string());
    }
    Ok(CriteriaPointData {
        index: sample.index,
        point: sample.point.clone(),
        residual: sample.residual,
        shift,
        j: ctx.j,
        det_h_r: ctx.rd.det_h(),
        q: ctx.rd.q(),
        condition: ctx.rd.condition(),
        l2,
        l2_def12,
        e_tilde: e.value,
        e_lower: e.lower,
        e_upper: e.upper,
        det_h_rho_boundary: det.primary,
        det_h_rho_rank_one: det.rank_one,
        s_r: if n == 1 { Some(s_r_closed(&ctx.w)?) } else { None },
        conv_crit_lhs: convex_sufficient(&ctx),
        convex_companion: convex_companion(&ctx),
        pseudo_ricci_min: pseudo_ricci_min(&ctx, &sample.frame),
        tangent_hessian_min: tangent_hessian_min_eigenvalue(&raw),
        flags,
    })
}

fn l2_def12_of(ctx: &BoundaryContext) -> f64 {
    l2(ctx, L2Variant::Def12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    StrictlySuperPsc,
    SuperPsc,
    NotSuperPsc,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    StrictlyConvex,
    Convex,
    NotConvex,
}

/// Classification of a domain from boundary samples of its defining function.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub classification: Classification,
    pub l2_variant: L2Variant,
    /// Minimum of `L₂` over the samples.
    pub margin: f64,
    pub at_tolerance: bool,
    pub convexity: Convexity,
    /// Minimum over samples of the tangent-projected real Hessian eigenvalue.
    pub convexity_margin: f64,
    pub worst_point: Option<CriteriaPointData>,
    pub shift: f64,
    pub samples_used: usize,
    pub shortfall: usize,
    pub reason: Option<String>,
}

/// Full result of [`classify`]: per-point rows and the verdict.
#[derive(Debug, Clone, Serialize)]
pub struct Classified {
    pub rows: Vec<CriteriaPointData>,
    pub failures: Vec<(usize, String)>,
    pub verdict: Verdict,
}

pub fn classify_convexity(min_eig: f64) -> Convexity {
    if min_eig > CONVEXITY_TOL {
        Convexity::StrictlyConvex
    } else if min_eig >= -CONVEXITY_TOL {
        Convexity::Convex
    } else {
        Convexity::NotConvex
    }
}

/// Samples the boundary and evaluates the criterion for the supplied
/// defining function; a negative verdict means this `r` fails, not that no
/// defining function succeeds.
pub fn classify(
    domain: &DomainSpec,
    n_samples: usize,
    seed: u64,
    variant: L2Variant,
    tol_boundary: f64,
) -> Result<Classified, CriteriaError> {
    let set = sample_boundary(domain, n_samples, seed)?;
    let shifts: Vec<Result<f64, CriteriaError>> = set
        .samples
        .par_iter()
        .map(|s| required_shift(&domain.ast, &s.point))
        .collect();
    let mut shift = 0.0f64;
    for s in &shifts {
        if let Ok(a) = s {
            shift = shift.max(*a);
        }
    }
    let results: Vec<Result<CriteriaPointData, CriteriaError>> = set
        .samples
        .par_iter()
        .map(|s| evaluate_point(&domain.ast, s, shift, tol_boundary))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (s, r) in set.samples.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((s.index, e.to_string())),
        }
    }
    let pick = |row: &CriteriaPointData| match variant {
        L2Variant::Eq311 => row.l2,
        L2Variant::Def12 => row.l2_def12,
    };
    let worst = rows
        .iter()
        .min_by(|a, b| pick(a).total_cmp(&pick(b)).then(a.index.cmp(&b.index)))
        .cloned();
    let margin = worst.as_ref().map_or(f64::NAN, pick);
    let convexity_margin = rows
        .iter()
        .map(|r| r.tangent_hessian_min)
        .fold(f64::INFINITY, f64::min);
    let at_tolerance = margin.abs() < MARGIN_TOL;
    let mut reason = None;
    let classification = if rows.is_empty() {
        reason = Some("no boundary sample could be evaluated".to_string());
        Classification::Inconclusive
    } else if margin < -MARGIN_TOL {
        Classification::NotSuperPsc
    } else if !failures.is_empty() {
        reason = Some(format!("{} samples could not be evaluated", failures.len()));
        Classification::Inconclusive
    } else if rows.iter().any(|r| r.flags.iter().any(|f| f == "ill_conditioned" || f == "det_forms_disagree")) {
        reason = Some("ill-conditioned samples or disagreeing det H(ρ) forms".to_string());
        Classification::Inconclusive
    } else if at_tolerance {
        Classification::SuperPsc
    } else {
        Classification::StrictlySuperPsc
    };
    let convexity = if rows.is_empty() {
        Convexity::NotConvex
    } else {
        classify_convexity(convexity_margin)
    };
    Ok(Classified {
        verdict: Verdict {
            classification,
            l2_variant: variant,
            margin,
            at_tolerance,
            convexity,
            convexity_margin,
            worst_point: worst,
            shift,
            samples_used: rows.len(),
            shortfall: set.shortfall,
            reason,
        },
        rows,
        failures,
    })
}

/// Complex gradient of `r` at a point, used to check tangency by callers.
pub fn boundary_gradient(ast: &ExprAst, point: &[f64]) -> Result<Vec<Complex64>, CriteriaError> {
    Ok(complex_gradient(&ast.jet(point, 1)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{builtin, parse};
    use std::collections::BTreeMap;

    fn ctx_at(src: &str, n: usize, p: &[f64]) -> BoundaryContext {
        let ast = parse(src, n).unwrap();
        BoundaryContext::new(&ast.jet(p, 4).unwrap()).unwrap()
    }

    #[test]
    fn ball_values() {
        let ctx = ctx_at("abs2(z1)+abs2(z2)-1", 2, &[0.6, 0.0, 0.0, 0.8]);
        assert!((l2(&ctx, L2Variant::Eq311) - 1.0).abs() < 1e-12);
        let d = det_h_rho_boundary(&ctx);
        assert!((d.primary - 1.0).abs() < 1e-12 && (d.rank_one - 1.0).abs() < 1e-12);
        let e = e_tilde(&ctx);
        assert!(e.value.abs() < 1e-12 && e.lower.abs() < 1e-12 && e.upper.abs() < 1e-12);
        assert!((convex_sufficient(&ctx) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ball_pseudo_ricci() {
        let ctx = ctx_at("abs2(z1)+abs2(z2)-1", 2, &[1.0, 0.0, 0.0, 0.0]);
        let e2 = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let ric = pseudo_ricci(&ctx, &e2, &e2).unwrap();
        assert!((ric.value - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        assert!((ric.einstein_form.unwrap() - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        let zero = [Complex64::new(0.0, 0.0); 2];
        assert!(pseudo_ricci(&ctx, &zero, &e2).unwrap().value.norm() < 1e-15);
        let e1 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!(matches!(pseudo_ricci(&ctx, &e1, &e2), Err(CriteriaError::NotTangent(_))));
    }

    #[test]
    fn planar_s_r_values() {
        let disc = ctx_at("abs2(z1)-1", 1, &[1.0, 0.0]);
        assert!((s_r(&disc).unwrap() - 1.0).abs() < 1e-12);
        let ast = parse("x1^2+4*y1^2-1", 1).unwrap();
        let jet = ast.jet(&[1.0, 0.0], 4).unwrap();
        let w = wirtinger(&jet);
        assert!((s_r_closed(&w).unwrap() - 4.0).abs() < 1e-12);
        let ctx = BoundaryContext::new(&jet).unwrap();
        assert!((s_r(&ctx).unwrap() - 4.0).abs() < 1e-12);
        let grad = jet.gradient();
        let gn = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
        assert!((planar_curvature(&jet) * gn / 2.0 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn example52_non_convex_witness() {
        let d = builtin("example52", &BTreeMap::new()).unwrap();
        let jet = d.ast.jet(&[0.0; 4], 4).unwrap();
        assert!((jet.partial(&[3, 3]) - (2.0 - 2.0 * 1.05)).abs() < 1e-15);
        assert!(tangent_hessian_min_eigenvalue(&jet) < -0.09);
    }

    #[test]
    fn variants_parse() {
        assert_eq!("eq311".parse::<L2Variant>().unwrap(), L2Variant::Eq311);
        assert_eq!("def12".parse::<L2Variant>().unwrap(), L2Variant::Def12);
        assert!("other".parse::<L2Variant>().is_err());
    }
}
