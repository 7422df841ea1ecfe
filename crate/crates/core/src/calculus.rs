//! Raised-index quantities of a defining function and the operators built
//! from the degenerate inverse `ã^{ij̄} = r^{ij̄} − r^i r^j̄ / (−r + |∂r|²_r)`.
//!
//! Index convention: `H = [r_{ij̄}]` and `r^{ij̄} = (H^{-1})_{ji}`, so that
//! `Σ_j r^{ij̄} r_{kj̄} = δ_{ik}`. Matrices returned here store `r^{ij̄}` and
//! `ã^{ij̄}` at position `(i, j)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::jets::WirtingerData;

/// Boundary tolerance on `|r|` under which boundary-only identities apply.
pub const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalculusError {
    #[error("complex Hessian is singular (condition number {0:.3e})")]
    SingularHessian(f64),
    #[error("−r + |∂r|²_r = {0:.3e} is not positive")]
    NonPositiveDenominator(f64),
    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),
}

/// A Hermitian `n × n` complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianForm(DMatrix<Complex64>);

impl HermitianForm {
    /// Symmetrizes `m` after checking it is Hermitian up to `1e-8` relative.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self, CalculusError> {
        let defect = hermitian_defect(&m);
        if defect > 1e-8 * (1.0 + m.norm()) {
            return Err(CalculusError::NotHermitian(defect));
        }
        Ok(Self::symmetrized(m))
    }

    /// Averages `m` with its adjoint without checking.
    pub fn symmetrized(m: DMatrix<Complex64>) -> Self {
        let adj = m.adjoint();
        Self((m + adj).scale(0.5))
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Real eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(f64::NAN)
    }

    /// Decided by the smallest eigenvalue; nalgebra's complex Cholesky
    /// accepts negative real pivots, so it cannot serve as the test.
    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue() > 0.0
    }

    /// `Σ w_k v̄_l M_{kl}`.
    pub fn pair(&self, w: &[Complex64], v: &[Complex64]) -> Complex64 {
        let n = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            for l in 0..n {
                acc += w[k] * v[l].conj() * self.0[(k, l)];
            }
        }
        acc
    }
}

/// `‖M − M*‖_max`.
pub fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Inverse-Hessian data of a defining function at one point.
#[derive(Debug, Clone)]
pub struct RaisedData {
    n: usize,
    r: f64,
    upper: DMatrix<Complex64>,
    r_up: Vec<Complex64>,
    q: f64,
    denom: f64,
    a_tilde: DMatrix<Complex64>,
    det_h: f64,
    condition: f64,
    positive_definite: bool,
}

/// Computes `r^{ij̄}`, `r^i`, `|∂r|²_r` and `ã^{ij̄}` from Wirtinger data.
pub fn raise(w: &WirtingerData) -> Result<RaisedData, CalculusError> {
    let n = w.n();
    let h = w.levi().clone();
    let eig = HermitianForm::symmetrized(h.clone()).eigenvalues();
    let (lo, hi) = (eig[0], eig[n - 1]);
    let abs_min = eig.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
    let abs_max = lo.abs().max(hi.abs());
    let condition = if abs_min > 0.0 { abs_max / abs_min } else { f64::INFINITY };
    if !condition.is_finite() || condition > 1e14 {
        return Err(CalculusError::SingularHessian(condition));
    }
    let positive_definite = lo > 0.0;
    let (inv, det_h) = match h.clone().cholesky() {
        Some(ch) if positive_definite => {
            let l = ch.l();
            let det: f64 = l.diagonal().iter().map(|d| d.re * d.re).product();
            (ch.inverse(), det)
        }
        _ => {
            let lu = h.clone().full_piv_lu();
            let det = lu.determinant().re;
            let inv = lu
                .try_inverse()
                .ok_or(CalculusError::SingularHessian(condition))?;
            (inv, det)
        }
    };
    let upper = inv.transpose();
    let grad = w.gradient();
    let r_up: Vec<Complex64> = (0..n)
        .map(|i| (0..n).map(|j| upper[(i, j)] * grad[j].conj()).sum())
        .collect();
    let q_c: Complex64 = (0..n).map(|i| r_up[i] * grad[i]).sum();
    let q = q_c.re;
    let r = w.value();
    let denom = -r + q;
    if denom.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(CalculusError::NonPositiveDenominator(denom));
    }
    let a_tilde = DMatrix::from_fn(n, n, |i, j| upper[(i, j)] - r_up[i] * r_up[j].conj() / denom);
    Ok(RaisedData {
        n,
        r,
        upper,
        r_up,
        q,
        denom,
        a_tilde,
        det_h,
        condition,
        positive_definite,
    })
}

impl RaisedData {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `r` at the point.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// `r^{ij̄}`.
    pub fn r_upper(&self, i: usize, j: usize) -> Complex64 {
        self.upper[(i, j)]
    }

    pub fn upper(&self) -> &DMatrix<Complex64> {
        &self.upper
    }

    /// `r^i = Σ_j r^{ij̄} r_j̄`.
    pub fn r_up(&self, i: usize) -> Complex64 {
        self.r_up[i]
    }

    /// `r^ī`, the conjugate of `r^i`.
    pub fn r_up_bar(&self, i: usize) -> Complex64 {
        self.r_up[i].conj()
    }

    pub fn r_up_vec(&self) -> &[Complex64] {
        &self.r_up
    }

    /// `|∂r|²_r`.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// `−r + |∂r|²_r`.
    pub fn denom(&self) -> f64 {
        self.denom
    }

    /// `ã^{ij̄}`.
    pub fn a_tilde(&self, i: usize, j: usize) -> Complex64 {
        self.a_tilde[(i, j)]
    }

    pub fn a_tilde_matrix(&self) -> &DMatrix<Complex64> {
        &self.a_tilde
    }

    /// `det H(r)`.
    pub fn det_h(&self) -> f64 {
        self.det_h
    }

    /// Spectral condition number of `H(r)`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn positive_definite(&self) -> bool {
        self.positive_definite
    }

    /// `|∂r|²_r` recomputed as the full contraction `Σ r^{ij̄} r_i r_j̄`.
    pub fn q_contracted(&self, w: &WirtingerData) -> f64 {
        let g = w.gradient();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.n {
            for j in 0..self.n {
                acc += self.upper[(i, j)] * g[i] * g[j].conj();
            }
        }
        acc.re
    }

    /// `Σ_l ã^{kl̄} r_l̄` for each `k`; vanishes on the boundary.
    pub fn annihilation(&self, w: &WirtingerData) -> Vec<Complex64> {
        (0..self.n)
            .map(|k| (0..self.n).map(|l| self.a_tilde[(k, l)] * w.r_ibar(l)).sum())
            .collect()
    }

    /// `Σ_j r^{ij̄} r_{kj̄}`, which should be the identity.
    pub fn contraction_check(&self, w: &WirtingerData) -> DMatrix<Complex64> {
        let h = w.levi();
        DMatrix::from_fn(self.n, self.n, |i, k| {
            (0..self.n).map(|j| self.upper[(i, j)] * h[(k, j)]).sum()
        })
    }

    /// `Σ ã^{ij̄} M_{ij}` for an arbitrary complex matrix.
    pub fn tilde_contract(&self, m: &DMatrix<Complex64>) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.n {
            for j in 0..self.n {
                acc += self.a_tilde[(i, j)] * m[(i, j)];
            }
        }
        acc
    }
}

/// `Δ̃f = Σ ã^{ij̄} f_{ij̄}`.
pub fn tilde_laplacian(rd: &RaisedData, f_hessian: &HermitianForm) -> f64 {
    rd.tilde_contract(f_hessian.matrix()).re
}

/// `R f = Σ_j r^j ∂f/∂z_j`.
#[allow(non_snake_case)]
pub fn R_op(rd: &RaisedData, f_gradient: &[Complex64]) -> Complex64 {
    (0..rd.n).map(|j| rd.r_up[j] * f_gradient[j]).sum()
}

/// `|∇̃f|² = Σ ã^{ij̄} ∂_i f · conj(∂_j f)` for a real function `f`.
pub fn tilde_grad_norm_sq(rd: &RaisedData, f_gradient: &[Complex64]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..rd.n {
        for j in 0..rd.n {
            acc += rd.a_tilde[(i, j)] * f_gradient[i] * f_gradient[j].conj();
        }
    }
    acc.re
}

/// The same norm through `Σ r^{ij̄} ∂_i f ∂_j̄ f − |Rf|² / (−r + |∂r|²_r)`.
pub fn tilde_grad_norm_sq_split(rd: &RaisedData, f_gradient: &[Complex64]) -> f64 {
    let mut full = Complex64::new(0.0, 0.0);
    for i in 0..rd.n {
        for j in 0..rd.n {
            full += rd.upper[(i, j)] * f_gradient[i] * f_gradient[j].conj();
        }
    }
    full.re - R_op(rd, f_gradient).norm_sqr() / rd.denom
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::jets::wirtinger;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn data(src: &str, n: usize, p: &[f64]) -> WirtingerData {
        wirtinger(&parse(src, n).unwrap().jet(p, 4).unwrap())
    }

    #[test]
    fn negative_forms_are_not_definite() {
        let neg = HermitianForm::symmetrized(DMatrix::from_element(1, 1, c(-2.0)));
        assert!(!neg.is_positive_definite());
        let mixed = HermitianForm::symmetrized(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(-1e-3)])));
        assert!(!mixed.is_positive_definite());
        assert!(HermitianForm::symmetrized(DMatrix::identity(2, 2)).is_positive_definite());
    }

    #[test]
    fn ball_interior_point() {
        let w = data("abs2(z1)+abs2(z2)-1", 2, &[0.5, 0.0, 0.0, 0.0]);
        let rd = raise(&w).unwrap();
        assert!((rd.r_up(0) - c(0.5)).norm() < 1e-15);
        assert!(rd.r_up(1).norm() < 1e-15);
        assert!((rd.q() - 0.25).abs() < 1e-15);
        assert!((rd.denom() - 1.0).abs() < 1e-15);
        assert!(rd.positive_definite());
    }

    #[test]
    fn ball_boundary_operators() {
        let w = data("abs2(z1)+abs2(z2)-1", 2, &[1.0, 0.0, 0.0, 0.0]);
        let rd = raise(&w).unwrap();
        assert!(rd.a_tilde(0, 0).norm() < 1e-15);
        assert!((rd.a_tilde(1, 1) - c(1.0)).norm() < 1e-15);
        let lap = tilde_laplacian(&rd, &HermitianForm::new(w.levi().clone()).unwrap());
        assert!((lap - 1.0).abs() < 1e-15);
        let rr = R_op(&rd, w.gradient());
        assert!((rr - c(1.0)).norm() < 1e-15);
        assert!(tilde_grad_norm_sq(&rd, w.gradient()).abs() < 1e-15);
        let g = [c(0.0), c(1.0)];
        assert!((tilde_grad_norm_sq(&rd, &g) - 1.0).abs() < 1e-15);
        assert!((tilde_grad_norm_sq_split(&rd, &g) - 1.0).abs() < 1e-15);
        for a in rd.annihilation(&w) {
            assert!(a.norm() < 1e-15);
        }
    }

    #[test]
    fn transpose_convention_contracts_to_identity() {
        // a non-diagonal Hermitian Hessian: r = |z1|² + |z2|² + Re(i z1 z̄2)
        let w = data("abs2(z1)+abs2(z2)+0.5*(x1*y2-y1*x2)-1", 2, &[0.3, 0.1, -0.2, 0.4]);
        let rd = raise(&w).unwrap();
        let id = rd.contraction_check(&w);
        for i in 0..2 {
            for k in 0..2 {
                let t = if i == k { 1.0 } else { 0.0 };
                assert!((id[(i, k)] - c(t)).norm() < 1e-12);
            }
        }
        assert!((rd.q() - rd.q_contracted(&w)).abs() < 1e-12);
    }
}
