//! Fefferman's operator `J(r) = −det [[r, ∂̄r], [(∂̄r)*, H(r)]]`, the
//! logarithmic level function `ℓ = −log(−r)`, the correction `B`, and the
//! approximate solution `ρ₁ = r J(r)^{-1/(n+1)} e^{-B}`.
//!
//! Quantities that need derivatives of `J` are computed by carrying the
//! whole bordered determinant through truncated Taylor jets, so a jet of `r`
//! of order `K` gives `log J` to order `K − 2` and `ρ₁` to order `K − 4`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::calculus::{raise, tilde_laplacian, CalculusError, HermitianForm, RaisedData};
use crate::expr::{DomainSpec, ExprAst, ExprError, Node};
use crate::geometry::{sample_boundary, GeometryError};
use crate::jets::{
    complex_gradient, complex_hessian, dz, dzbar, jet_det, jet_inverse, wirtinger, Jet, JetError,
    WirtingerData,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeffermanError {
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("J(r) = {0:.6e} is not positive, so log J and ρ₁ are undefined")]
    NonPositiveJ(f64),
    #[error("point is not interior: r = {0:.6e}")]
    NotInterior(f64),
    #[error("no shift a <= 2^20 makes H(r[a]) positive definite (min eigenvalue {0:.3e})")]
    ShiftFailed(f64),
    #[error("jet order {got} is too low, need at least {need}")]
    OrderTooLow { got: usize, need: usize },
    #[error("affine map is singular")]
    SingularMap,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Negative determinant of the bordered matrix.
#[allow(non_snake_case)]
pub fn J_bordered(w: &WirtingerData) -> f64 {
    let n = w.n();
    let m = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
        (0, 0) => Complex64::new(w.value(), 0.0),
        (0, j) => w.r_ibar(j - 1),
        (i, 0) => w.r_i(i - 1),
        (i, j) => w.levi()[(i - 1, j - 1)],
    });
    -m.determinant().re
}

/// `det H(r) · (−r + |∂r|²_r)`.
#[allow(non_snake_case)]
pub fn J_product(rd: &RaisedData) -> f64 {
    rd.det_h() * rd.denom()
}

/// Wirtinger data of `r[a] = r + (a/2) r²` assembled by the Leibniz rule.
pub fn psh_shift(w: &WirtingerData, a: f64) -> WirtingerData {
    let n = w.n();
    let r = w.value();
    let f = 1.0 + a * r;
    let ca = Complex64::new(a, 0.0);
    let cf = Complex64::new(f, 0.0);
    let h = w.levi();
    let grad: Vec<Complex64> = (0..n).map(|i| w.r_i(i) * cf).collect();
    let levi = DMatrix::from_fn(n, n, |i, j| cf * h[(i, j)] + ca * w.r_i(i) * w.r_ibar(j));
    let holo2 = DMatrix::from_fn(n, n, |i, j| cf * w.r_ij(i, j) + ca * w.r_i(i) * w.r_i(j));
    let mut third = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                // ∂_k [(1 + ar) r_{ij̄} + a r_i r_j̄]
                let v = ca * w.r_i(k) * h[(i, j)]
                    + cf * w.r_i_jbar_k(i, j, k)
                    + ca * w.r_ij(i, k) * w.r_ibar(j)
                    + ca * w.r_i(i) * h[(k, j)];
                third.push(v);
            }
        }
    }
    let mut fourth = Vec::with_capacity(n * n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let v = ca * h[(k, l)] * h[(i, j)]
                        + ca * w.r_i(k) * w.r_i_jbar_kbar(i, j, l)
                        + ca * w.r_ibar(l) * w.r_i_jbar_k(i, j, k)
                        + cf * w.r_i_jbar_k_lbar(i, j, k, l)
                        + ca * w.r_i_jbar_k(i, l, k) * w.r_ibar(j)
                        + ca * w.r_ij(i, k) * w.r_ibar_jbar(j, l)
                        + ca * h[(i, l)] * h[(k, j)]
                        + ca * w.r_i(i) * w.r_i_jbar_kbar(k, j, l);
                    fourth.push(v);
                }
            }
        }
    }
    WirtingerData::from_parts(n, r + 0.5 * a * r * r, grad, levi, holo2, third, fourth)
}

/// Smallest `a ∈ {0, 1, 2, 4, ..., 2^20}` with `H(r[a])` positive definite.
pub fn psh_shift_auto(w: &WirtingerData) -> Result<(f64, WirtingerData), FeffermanError> {
    let mut a = 0.0;
    let mut last = f64::NAN;
    loop {
        let shifted = psh_shift(w, a);
        let form = HermitianForm::symmetrized(shifted.levi().clone());
        if form.is_positive_definite() {
            return Ok((a, shifted));
        }
        last = form.min_eigenvalue().min(last.min(f64::INFINITY));
        a = if a == 0.0 { 1.0 } else { 2.0 * a };
        if a > (1u64 << 20) as f64 {
            return Err(FeffermanError::ShiftFailed(last));
        }
    }
}

/// Right-hand side of the shift identity
/// `J(r) = (1 + ar)^{-n} det H(r[a]) (−r + (1 + 2ar) |∂r|²_{r[a]})`,
/// where `|∂r|²_{r[a]}` contracts the gradient of `r` with `H(r[a])^{-1}`.
pub fn shift_identity_rhs(w: &WirtingerData, a: f64) -> Result<f64, FeffermanError> {
    let n = w.n();
    let r = w.value();
    let s = psh_shift(w, a);
    let lu = s.levi().clone().full_piv_lu();
    let det = lu.determinant().re;
    let g = DVector::from_column_slice(w.gradient());
    // Σ_{ij} (H_s^{-1})_{ji} r_i r_j̄ = ḡᵀ H_s^{-1} g
    let x = lu
        .solve(&g)
        .ok_or(CalculusError::SingularHessian(f64::INFINITY))?;
    let qs: Complex64 = (0..n).map(|i| g[i].conj() * x[i]).sum();
    Ok((1.0 + a * r).powi(-(n as i32)) * det * (-r + (1.0 + 2.0 * a * r) * qs.re))
}

/// `H(ℓ(r)) = H(r)/(−r) + r_i r_j̄ / r²` at an interior point.
pub fn level_hessian(w: &WirtingerData) -> Result<HermitianForm, FeffermanError> {
    let r = w.value();
    if r >= 0.0 {
        return Err(FeffermanError::NotInterior(r));
    }
    let n = w.n();
    let m = DMatrix::from_fn(n, n, |i, j| {
        w.levi()[(i, j)] / (-r) + w.r_i(i) * w.r_ibar(j) / (r * r)
    });
    Ok(HermitianForm::symmetrized(m))
}

/// Relative residual of `det H(ℓ(r)) = J(r) e^{(n+1) ℓ(r)}`.
pub fn log_level_identity_check(w: &WirtingerData) -> Result<f64, FeffermanError> {
    let hl = level_hessian(w)?;
    let lhs = hl.matrix().determinant().re;
    let r = w.value();
    let rhs = J_bordered(w) * (-r).powi(-(w.n() as i32 + 1));
    Ok((lhs - rhs).abs() / rhs.abs())
}

/// Value, gradient and complex Hessian of `log J(r)` at a point.
#[derive(Debug, Clone)]
pub struct LogJ {
    pub value: f64,
    pub gradient: Vec<Complex64>,
    pub hessian: HermitianForm,
}

/// Complex jets of `r_i`, `r_ī` and `r_{ij̄}` derived from a real jet of `r`.
struct ComplexDerivs {
    r: Jet<Complex64>,
    grad: Vec<Jet<Complex64>>,
    grad_bar: Vec<Jet<Complex64>>,
    levi: Vec<Vec<Jet<Complex64>>>,
}

fn complex_derivs(r: &Jet) -> ComplexDerivs {
    let n = r.dim() / 2;
    let rc = r.to_complex();
    let grad: Vec<_> = (0..n).map(|i| dz(&rc, i)).collect();
    let grad_bar: Vec<_> = (0..n).map(|i| dzbar(&rc, i)).collect();
    let levi = (0..n)
        .map(|i| (0..n).map(|j| dzbar(&grad[i], j)).collect())
        .collect();
    ComplexDerivs {
        r: rc,
        grad,
        grad_bar,
        levi,
    }
}

/// Jet of `J(r)` of order `K − 2` from a jet of `r` of order `K >= 2`.
pub fn j_jet(r: &Jet) -> Result<Jet, FeffermanError> {
    if r.order() < 2 {
        return Err(FeffermanError::OrderTooLow { got: r.order(), need: 2 });
    }
    let n = r.dim() / 2;
    let d = complex_derivs(r);
    let mut m = Vec::with_capacity(n + 1);
    let mut top = vec![d.r.clone()];
    top.extend(d.grad_bar.iter().cloned());
    m.push(top);
    for i in 0..n {
        let mut row = vec![d.grad[i].clone()];
        row.extend(d.levi[i].iter().cloned());
        m.push(row);
    }
    Ok(-jet_det(m)?.re())
}

/// `J` at the base point of a jet of order `>= 2`.
pub fn j_value(r: &Jet) -> f64 {
    let n = r.dim() / 2;
    let g = complex_gradient(r);
    let h = complex_hessian(r);
    let m = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
        (0, 0) => Complex64::new(r.value(), 0.0),
        (0, j) => g[j - 1].conj(),
        (i, 0) => g[i - 1],
        (i, j) => h[(i - 1, j - 1)],
    });
    -m.determinant().re
}

/// Jet of `log J(r)` of order `K − 2`.
pub fn log_j_jet(r: &Jet) -> Result<Jet, FeffermanError> {
    let j = j_jet(r)?;
    if j.value() <= 0.0 {
        return Err(FeffermanError::NonPositiveJ(j.value()));
    }
    Ok(j.ln()?)
}

/// `log J` with its gradient and Hessian, from a jet of `r` of order `>= 4`.
pub fn log_j_derivatives(r: &Jet) -> Result<LogJ, FeffermanError> {
    if r.order() < 4 {
        return Err(FeffermanError::OrderTooLow { got: r.order(), need: 4 });
    }
    let l = log_j_jet(&r.truncate(4))?;
    Ok(LogJ {
        value: l.value(),
        gradient: complex_gradient(&l),
        hessian: HermitianForm::symmetrized(complex_hessian(&l)),
    })
}

/// `∂ log J/∂z_k = ã^{ij̄} r_{ij̄k} + r^i r_{ik} / (−r + |∂r|²_r)`.
pub fn log_j_gradient_formula(w: &WirtingerData, rd: &RaisedData) -> Vec<Complex64> {
    let n = w.n();
    (0..n)
        .map(|k| {
            let mut acc = C0;
            for i in 0..n {
                for j in 0..n {
                    acc += rd.a_tilde(i, j) * w.r_i_jbar_k(i, j, k);
                }
                acc += rd.r_up(i) * w.r_ij(i, k) / rd.denom();
            }
            acc
        })
        .collect()
}

/// `(B, B⁰)` with `B⁰ = Δ̃ log J / (2n(n+1))` and `B = (−r) B⁰`.
#[allow(non_snake_case)]
pub fn B_and_B0(rd: &RaisedData, log_j: &LogJ) -> (f64, f64) {
    let n = rd.n() as f64;
    let b0 = tilde_laplacian(rd, &log_j.hessian) / (2.0 * n * (n + 1.0));
    (-rd.r() * b0, b0)
}

/// `B = tr(H(ℓ)^{-1} H(log J)) / (2n(n+1))`, interior points only.
#[allow(non_snake_case)]
pub fn B_trace(w: &WirtingerData, log_j: &LogJ) -> Result<f64, FeffermanError> {
    let hl = level_hessian(w)?;
    let inv = hl
        .matrix()
        .clone()
        .try_inverse()
        .ok_or(CalculusError::SingularHessian(f64::INFINITY))?;
    let n = w.n() as f64;
    Ok((inv * log_j.hessian.matrix()).trace().re / (2.0 * n * (n + 1.0)))
}

/// `ρ₁ = r J^{-1/(n+1)} e^{-B}`.
pub fn rho1(r: f64, j: f64, b: f64, n: usize) -> Result<f64, FeffermanError> {
    if j <= 0.0 {
        return Err(FeffermanError::NonPositiveJ(j));
    }
    Ok(r * j.powf(-1.0 / (n as f64 + 1.0)) * (-b).exp())
}

/// Everything the criteria need at one point, from a jet of order `>= 4`.
#[derive(Debug, Clone, Serialize)]
pub struct FeffermanPointData {
    pub j: f64,
    pub j_product: f64,
    pub det_h_r: f64,
    /// `−log(−r)`, only at interior points.
    pub ell: Option<f64>,
    pub b: f64,
    pub b0: f64,
    pub rho1: f64,
    #[serde(skip)]
    pub log_j: LogJ,
}

impl Serialize for LogJ {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value)
    }
}

/// Fefferman quantities at the base point of `r_jet`.
pub fn point_data(r_jet: &Jet) -> Result<(WirtingerData, RaisedData, FeffermanPointData), FeffermanError> {
    let w = wirtinger(r_jet);
    let rd = raise(&w)?;
    let j = J_bordered(&w);
    if j <= 0.0 {
        return Err(FeffermanError::NonPositiveJ(j));
    }
    let log_j = log_j_derivatives(r_jet)?;
    let (b, b0) = B_and_B0(&rd, &log_j);
    let r = w.value();
    let data = FeffermanPointData {
        j,
        j_product: J_product(&rd),
        det_h_r: rd.det_h(),
        ell: (r < 0.0).then(|| -(-r).ln()),
        b,
        b0,
        rho1: rho1(r, j, b, w.n())?,
        log_j,
    };
    Ok((w, rd, data))
}

/// Which approximate solution a jet pipeline builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Approximation {
    /// `ρ₀ = r J^{-1/(n+1)}`
    Rho0,
    /// `ρ₁ = r J^{-1/(n+1)} e^{-B}`
    Rho1,
}

/// Jet of `B⁰ = Δ̃ log J / (2n(n+1))` of order `K − 4`.
pub fn b0_jet(r: &Jet) -> Result<Jet, FeffermanError> {
    if r.order() < 4 {
        return Err(FeffermanError::OrderTooLow { got: r.order(), need: 4 });
    }
    let n = r.dim() / 2;
    let d = complex_derivs(r);
    let log_j = log_j_jet(r)?.to_complex();
    let hinv = jet_inverse(&d.levi)?;
    // r^{ij̄} = (H^{-1})_{ji}
    let upper = |i: usize, j: usize| &hinv[j][i];
    let r_up: Vec<Jet<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| upper(i, j) * &d.grad_bar[j])
                .reduce(|a, b| a + b)
                .expect("n >= 1")
        })
        .collect();
    let q = (0..n)
        .map(|i| &r_up[i] * &d.grad[i])
        .reduce(|a, b| a + b)
        .expect("n >= 1");
    let denom_inv = (q - &d.r).recip()?;
    let mut lap: Option<Jet<Complex64>> = None;
    for i in 0..n {
        let li = dz(&log_j, i);
        for j in 0..n {
            let a = upper(i, j) - &(&(&r_up[i] * &r_up[j].conj()) * &denom_inv);
            let term = &a * &dzbar(&li, j);
            lap = Some(match lap {
                Some(acc) => acc + term,
                None => term,
            });
        }
    }
    let nf = n as f64;
    Ok(lap.expect("n >= 1").re().scale(1.0 / (2.0 * nf * (nf + 1.0))))
}

/// Jet of `ρ₀` (order `K − 2`) or `ρ₁` (order `K − 4`) from a jet of `r`.
pub fn approximation_jet(r: &Jet, which: Approximation) -> Result<Jet, FeffermanError> {
    let n = (r.dim() / 2) as f64;
    let log_j = log_j_jet(r)?;
    let factor = log_j.scale(-1.0 / (n + 1.0)).exp();
    match which {
        Approximation::Rho0 => Ok(r * &factor),
        Approximation::Rho1 => {
            let b = -(r * &b0_jet(r)?);
            Ok(&(r * &factor) * &(-b).exp())
        }
    }
}

/// Jet of `B = (−r) B⁰` of order `K − 4`.
pub fn b_jet(r: &Jet) -> Result<Jet, FeffermanError> {
    Ok(-(r * &b0_jet(r)?))
}

/// Result of probing `|J(ρ) − 1|` along an inward ray.
#[derive(Debug, Clone, Serialize)]
pub struct DefectScan {
    pub approximation: Approximation,
    pub depths: Vec<f64>,
    pub abs_r: Vec<f64>,
    pub defects: Vec<f64>,
    /// Least-squares slope of `log defect` against `log |r|`.
    pub slope: Option<f64>,
    /// All defects are below `1e-13`.
    pub exact: bool,
}

/// Defects below this are treated as roundoff.
pub const EXACT_DEFECT: f64 = 1e-13;

/// Order of the `r` jets used by the defect scan.
pub const DEFECT_JET_ORDER: usize = 6;

/// Evaluates `|J(ρ) − 1|` at `boundary_point + t · inward_normal` for each
/// depth `t` and fits the log-log slope against `|r|`.
pub fn defect_scan(
    ast: &ExprAst,
    boundary_point: &[f64],
    inward_normal: &[f64],
    depths: &[f64],
    which: Approximation,
) -> Result<DefectScan, FeffermanError> {
    let mut abs_r = Vec::with_capacity(depths.len());
    let mut defects = Vec::with_capacity(depths.len());
    for &t in depths {
        let z: Vec<f64> = boundary_point
            .iter()
            .zip(inward_normal)
            .map(|(p, v)| p + t * v)
            .collect();
        let r_jet = ast.jet(&z, DEFECT_JET_ORDER)?;
        if r_jet.value() >= 0.0 {
            return Err(FeffermanError::NotInterior(r_jet.value()));
        }
        let rho = approximation_jet(&r_jet, which)?;
        abs_r.push(r_jet.value().abs());
        defects.push((j_value(&rho) - 1.0).abs());
    }
    let exact = defects.iter().all(|&d| d < EXACT_DEFECT);
    let slope = if exact {
        None
    } else {
        let pts: Vec<(f64, f64)> = abs_r
            .iter()
            .zip(&defects)
            .filter(|(_, &d)| d >= EXACT_DEFECT)
            .map(|(&r, &d)| (r.ln(), d.ln()))
            .collect();
        least_squares_slope(&pts)
    };
    Ok(DefectScan {
        approximation: which,
        depths: depths.to_vec(),
        abs_r,
        defects,
        slope,
        exact,
    })
}

/// Slope of the least-squares line through `points`; `None` below two points.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Defect scans along inward rays from several boundary points.
#[derive(Debug, Clone, Serialize)]
pub struct DomainDefectScan {
    pub approximation: Approximation,
    pub depths: Vec<f64>,
    pub rays: Vec<DefectScan>,
    /// Slope of `log max_rays defect` against `log depth`: the order of the
    /// uniform error across the boundary layer.
    pub uniform_slope: Option<f64>,
    /// Smallest per-ray slope. Single rays can sit in a pre-asymptotic range
    /// where the cubic term partly cancels the quadratic one.
    pub min_ray_slope: Option<f64>,
    pub exact: bool,
}

/// Runs [`defect_scan`] from `rays` sampled boundary points of `domain`.
pub fn domain_defect_scan(
    domain: &DomainSpec,
    rays: usize,
    seed: u64,
    depths: &[f64],
    which: Approximation,
) -> Result<DomainDefectScan, FeffermanError> {
    let set = sample_boundary(domain, rays, seed)?;
    let scans: Vec<Result<DefectScan, FeffermanError>> = set
        .samples
        .par_iter()
        .map(|s| defect_scan(&domain.ast, &s.point, &s.inward_normal, depths, which))
        .collect();
    let scans = scans.into_iter().collect::<Result<Vec<_>, _>>()?;
    let exact = scans.iter().all(|s| s.exact);
    let uniform_slope = if exact {
        None
    } else {
        let pts: Vec<(f64, f64)> = depths
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let worst = scans.iter().map(|s| s.defects[k]).fold(0.0, f64::max);
                (t.ln(), worst.ln())
            })
            .filter(|p| p.1.is_finite())
            .collect();
        least_squares_slope(&pts)
    };
    let min_ray_slope = scans
        .iter()
        .filter_map(|s| s.slope)
        .min_by(f64::total_cmp);
    Ok(DomainDefectScan {
        approximation: which,
        depths: depths.to_vec(),
        rays: scans,
        uniform_slope,
        min_ray_slope,
        exact,
    })
}

/// `count` depths log-spaced from `hi` down to `lo`.
pub fn log_spaced(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = (hi.ln(), lo.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Holomorphic affine map `z ↦ A z + b`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    a: DMatrix<Complex64>,
    b: DVector<Complex64>,
}

impl AffineMap {
    pub fn new(a: DMatrix<Complex64>, b: DVector<Complex64>) -> Result<Self, FeffermanError> {
        if a.nrows() != a.ncols() || a.nrows() != b.len() || a.determinant().norm() == 0.0 {
            return Err(FeffermanError::SingularMap);
        }
        Ok(Self { a, b })
    }

    /// `z ↦ s z`.
    pub fn scaling(n: usize, s: f64) -> Result<Self, FeffermanError> {
        Self::new(
            DMatrix::from_diagonal_element(n, n, Complex64::new(s, 0.0)),
            DVector::zeros(n),
        )
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    /// Constant Jacobian determinant `c = det A`.
    pub fn det(&self) -> Complex64 {
        self.a.determinant()
    }

    /// Image of a point given in real coordinates.
    pub fn apply(&self, point: &[f64]) -> Vec<f64> {
        let n = self.n();
        let z = DVector::from_fn(n, |j, _| Complex64::new(point[2 * j], point[2 * j + 1]));
        let w = &self.a * z + &self.b;
        w.iter().flat_map(|c| [c.re, c.im]).collect()
    }

    /// Expression for `r ∘ φ`, a defining function of `φ^{-1}(D)`.
    pub fn pullback(&self, ast: &ExprAst) -> Result<ExprAst, FeffermanError> {
        Ok(ExprAst::new(ast.n(), self.substitute(ast.root()))?)
    }

    fn coordinate(&self, j: usize, imag: bool) -> Node {
        let n = self.n();
        let mut acc = Node::c(if imag { self.b[j].im } else { self.b[j].re });
        for k in 0..n {
            let c = self.a[(j, k)];
            // Re(c z) = Re c·x − Im c·y,  Im(c z) = Im c·x + Re c·y
            let (cx, cy) = if imag { (c.im, c.re) } else { (c.re, -c.im) };
            if cx != 0.0 {
                acc = acc + Node::c(cx) * Node::x(k);
            }
            if cy != 0.0 {
                acc = acc + Node::c(cy) * Node::y(k);
            }
        }
        acc
    }

    fn substitute(&self, node: &Node) -> Node {
        let sub = |a: &Node| Box::new(self.substitute(a));
        match node {
            Node::Const(c) => Node::Const(*c),
            Node::X(j) => self.coordinate(*j, false),
            Node::Y(j) => self.coordinate(*j, true),
            Node::Neg(a) => Node::Neg(sub(a)),
            Node::Add(a, b) => Node::Add(sub(a), sub(b)),
            Node::Sub(a, b) => Node::Sub(sub(a), sub(b)),
            Node::Mul(a, b) => Node::Mul(sub(a), sub(b)),
            Node::Div(a, b) => Node::Div(sub(a), sub(b)),
            Node::Pow(a, e) => Node::Pow(sub(a), *e),
            Node::Bump(a, d) => Node::Bump(sub(a), *d),
        }
    }

    /// `ρ^{D₁}(z) = ρ^{D₂}(φ(z)) |det φ′|^{-2/(n+1)}` given `ρ^{D₂}(φ(z))`.
    pub fn transport_rho(&self, rho_at_image: f64) -> f64 {
        rho_at_image * self.det().norm().powf(-2.0 / (self.n() as f64 + 1.0))
    }

    /// `det H(ρ^{D₁})(z) = |c|^{2/(n+1)} det H(ρ^{D₂})(φ(z))`.
    pub fn transport_det_h(&self, det_h_at_image: f64) -> f64 {
        det_h_at_image * self.det().norm().powf(2.0 / (self.n() as f64 + 1.0))
    }
}

/// Transports approximate-solution values from `D₂ = φ(D₁)` back to `D₁`.
pub fn biholo_transport(rho_values_at_image: &[f64], map: &AffineMap) -> Vec<f64> {
    rho_values_at_image
        .iter()
        .map(|&v| map.transport_rho(v))
        .collect()
}

/// `ρ₁` at a point of a domain, through the scalar pipeline.
pub fn rho1_at(domain: &DomainSpec, point: &[f64]) -> Result<f64, FeffermanError> {
    let jet = domain.ast.jet(point, 4)?;
    Ok(point_data(&jet)?.2.rho1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn jet(src: &str, n: usize, p: &[f64], order: usize) -> Jet {
        parse(src, n).unwrap().jet(p, order).unwrap()
    }

    const BALL: &str = "abs2(z1)+abs2(z2)-1";

    #[test]
    fn ball_j_is_one() {
        let w = wirtinger(&jet(BALL, 2, &[0.5, 0.0, 0.0, 0.0], 4));
        assert!((J_bordered(&w) - 1.0).abs() < 1e-14);
        let rd = raise(&w).unwrap();
        assert!((J_product(&rd) - 1.0).abs() < 1e-14);
        assert!(log_level_identity_check(&w).unwrap() < 1e-12);
        let hl = level_hessian(&w).unwrap();
        assert!((hl.matrix().determinant().re - 2.370_370_370_370_37).abs() < 1e-12);
    }

    #[test]
    fn scaled_ball_j() {
        let w = wirtinger(&jet("2*(abs2(z1)+abs2(z2)-1)", 2, &[0.5, 0.0, 0.0, 0.0], 4));
        let rd = raise(&w).unwrap();
        assert!((J_product(&rd) - 8.0).abs() < 1e-12);
        assert!((J_bordered(&w) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn leibniz_shift_matches_jet_shift() {
        let src = "x1^2 + 3*y1^2 + x2^2 - y2^2 + x1*y2^3 + 0.3*x1^2*x2*y1 - 1";
        let p = [0.2, -0.1, 0.3, 0.25];
        let j = jet(src, 2, &p, 4);
        for a in [0.0, 0.7, 3.0] {
            let shifted_jet = &j + &(&j * &j).scale(0.5 * a);
            let oracle = wirtinger(&shifted_jet);
            let s = psh_shift(&wirtinger(&j), a);
            assert!((s.value() - oracle.value()).abs() < 1e-14);
            for i in 0..2 {
                assert!((s.r_i(i) - oracle.r_i(i)).norm() < 1e-12);
                for k in 0..2 {
                    assert!((s.levi()[(i, k)] - oracle.levi()[(i, k)]).norm() < 1e-12);
                    assert!((s.r_ij(i, k) - oracle.r_ij(i, k)).norm() < 1e-12);
                    for l in 0..2 {
                        assert!((s.r_i_jbar_k(i, k, l) - oracle.r_i_jbar_k(i, k, l)).norm() < 1e-11);
                        for m in 0..2 {
                            let d = s.r_i_jbar_k_lbar(i, k, l, m) - oracle.r_i_jbar_k_lbar(i, k, l, m);
                            assert!(d.norm() < 1e-10, "{i}{k}{l}{m}: {d}");
                        }
                    }
                }
            }
            let w = wirtinger(&j);
            let rel = (shift_identity_rhs(&w, a).unwrap() - J_bordered(&w)).abs() / J_bordered(&w).abs();
            assert!(rel < 1e-10, "a = {a}: {rel}");
        }
    }

    #[test]
    fn gradient_formula_matches_jet_gradient() {
        let src = "2*x1^2 + y1^2 + x2^2 + 3*y2^2 + 0.2*x1^3 - 0.1*x2*y1^2 - 1";
        let j = jet(src, 2, &[0.1, 0.2, -0.3, 0.1], 4);
        let (w, rd, data) = point_data(&j).unwrap();
        let formula = log_j_gradient_formula(&w, &rd);
        for (a, b) in formula.iter().zip(&data.log_j.gradient) {
            assert!((a - b).norm() < 1e-11, "{a} vs {b}");
        }
    }

    #[test]
    fn trace_and_product_forms_of_b_agree() {
        let src = "2*x1^2 + y1^2 + x2^2 + 3*y2^2 + 0.2*x1^3 - 1";
        let j = jet(src, 2, &[0.1, 0.2, -0.3, 0.1], 4);
        let (w, _, data) = point_data(&j).unwrap();
        let bt = B_trace(&w, &data.log_j).unwrap();
        assert!((bt - data.b).abs() < 1e-12 * (1.0 + bt.abs()), "{bt} vs {}", data.b);
    }

    #[test]
    fn ball_rho1_is_r() {
        let p = [0.3, 0.1, -0.2, 0.4];
        let j = jet(BALL, 2, &p, 6);
        let rho = approximation_jet(&j, Approximation::Rho1).unwrap();
        assert_eq!(rho.order(), 2);
        for (a, b) in rho.coeffs().iter().zip(j.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn b0_jet_matches_pointwise_value() {
        let src = "2*x1^2 + y1^2 + x2^2 + 3*y2^2 + 0.2*x1^3 - 1";
        let p = [0.1, 0.2, -0.3, 0.1];
        let (_, _, data) = point_data(&jet(src, 2, &p, 4)).unwrap();
        let b0 = b0_jet(&jet(src, 2, &p, 5)).unwrap();
        assert!((b0.value() - data.b0).abs() < 1e-12);
    }

    #[test]
    fn scaling_map_factors() {
        let m = AffineMap::scaling(2, 2.0).unwrap();
        // ρ of the unit ball at φ(z) = 2z, transported to B(0, 1/2)
        let z = [0.1, 0.2, 0.0, -0.1];
        let img = m.apply(&z);
        let rho_ball: f64 = img.iter().map(|v| v * v).sum::<f64>() - 1.0;
        let expected = (4.0 * z.iter().map(|v| v * v).sum::<f64>() - 1.0) * 4f64.powf(-2.0 / 3.0);
        assert!((m.transport_rho(rho_ball) - expected).abs() < 1e-15);
        assert!((m.transport_det_h(1.0) - 4f64.powf(2.0 / 3.0)).abs() < 1e-15);
        let small = m.pullback(&parse(BALL, 2).unwrap()).unwrap();
        assert!((small.eval(&z).unwrap() - (rho_ball)).abs() < 1e-15);
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = (1..5).map(|k| (k as f64, 2.0 * k as f64 + 1.0)).collect();
        assert!((least_squares_slope(&pts).unwrap() - 2.0).abs() < 1e-14);
        assert!(least_squares_slope(&pts[..1]).is_none());
    }
}
