//! Truncated multivariate Taylor jets and their conversion to Wirtinger
//! (holomorphic / antiholomorphic) derivatives.
//!
//! A [`Jet`] stores the Taylor coefficients `D^α f(p) / α!` of a function at
//! a base point `p` for every multi-index with `|α| <= order`. Arithmetic is
//! exact truncated power-series algebra, so jets of polynomials of degree
//! `<= order` are exact up to roundoff.

mod fd;
mod layout;
mod wirtinger;

pub use fd::{fd_oracle, fd_partial, fd_wirtinger, FdOptions};
pub use layout::Layout;
pub use wirtinger::{complex_gradient, complex_hessian, dz, dzbar, wirtinger, wirtinger_partial, WirtingerData};

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

/// Largest supported complex dimension.
pub const MAX_COMPLEX_DIM: usize = 8;
/// Largest supported jet order.
pub const MAX_ORDER: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("division by a jet whose constant term is zero")]
    ZeroDivisor,
    #[error("complex dimension {0} exceeds the supported maximum of {MAX_COMPLEX_DIM}")]
    DimensionTooLarge(usize),
    #[error("jet order {0} exceeds the supported maximum of {MAX_ORDER}")]
    OrderTooLarge(usize),
    #[error("function undefined at the base value {0}")]
    Domain(f64),
}

/// Coefficient field of a jet: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + PartialEq
    + std::fmt::Debug
    + Send
    + Sync
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + MulAssign
    + 'static
{
    fn zero() -> Self {
        Self::from(0.0)
    }
    fn one() -> Self {
        Self::from(1.0)
    }
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Truncated Taylor expansion of order `order` around a base point.
#[derive(Clone)]
pub struct Jet<T: Scalar = f64> {
    layout: Arc<Layout>,
    order: usize,
    coeffs: Vec<T>,
}

impl<T: Scalar> std::fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.dim())
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

/// Checks the `(real dimension, order)` pair against the supported limits.
pub fn check_limits(real_dim: usize, order: usize) -> Result<(), JetError> {
    if real_dim > 2 * MAX_COMPLEX_DIM {
        return Err(JetError::DimensionTooLarge(real_dim.div_ceil(2)));
    }
    if order > MAX_ORDER {
        return Err(JetError::OrderTooLarge(order));
    }
    Ok(())
}

impl<T: Scalar> Jet<T> {
    pub fn constant(layout: &Arc<Layout>, order: usize, value: T) -> Self {
        let mut coeffs = vec![T::zero(); layout.len(order)];
        coeffs[0] = value;
        Self {
            layout: layout.clone(),
            order,
            coeffs,
        }
    }

    /// The coordinate function `x_var` expanded around `base`.
    pub fn variable(layout: &Arc<Layout>, order: usize, var: usize, base: T) -> Self {
        let mut jet = Self::constant(layout, order, base);
        if order >= 1 {
            jet.coeffs[1 + var] = T::one();
        }
        jet
    }

    pub fn from_coeffs(layout: &Arc<Layout>, order: usize, coeffs: Vec<T>) -> Self {
        assert_eq!(coeffs.len(), layout.len(order), "coefficient count mismatch");
        Self {
            layout: layout.clone(),
            order,
            coeffs,
        }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Taylor coefficient of the monomial with the given exponent vector.
    pub fn coefficient(&self, exponent: &[u8]) -> T {
        match self.layout.index_of(exponent) {
            Some(i) if i < self.coeffs.len() => self.coeffs[i],
            _ => T::zero(),
        }
    }

    /// Partial derivative `∂^k f / ∂x_{v1} ... ∂x_{vk}` at the base point.
    pub fn partial(&self, vars: &[usize]) -> T {
        if vars.len() > self.order {
            return T::zero();
        }
        let mut exponent = vec![0u8; self.dim()];
        for &v in vars {
            exponent[v] += 1;
        }
        match self.layout.index_of(&exponent) {
            Some(i) => self.coeffs[i] * T::from(self.layout.multi_factorial(i)),
            None => T::zero(),
        }
    }

    /// Real gradient `(∂f/∂x_0, ..., ∂f/∂x_{m-1})`.
    pub fn gradient(&self) -> Vec<T> {
        (0..self.dim()).map(|v| self.partial(&[v])).collect()
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        Self {
            layout: self.layout.clone(),
            order,
            coeffs: self.coeffs[..self.layout.len(order)].to_vec(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            layout: self.layout.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: T) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// Derivative with respect to `x_var`; the result has order `order - 1`.
    pub fn derivative(&self, var: usize) -> Self {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let mut coeffs = vec![T::zero(); self.layout.len(order)];
        let len = self.coeffs.len();
        for &(s, t, factor) in self.layout.derivative_table(var) {
            let s = s as usize;
            if s < len {
                coeffs[t as usize] += self.coeffs[s] * T::from(factor);
            }
        }
        Self {
            layout: self.layout.clone(),
            order,
            coeffs,
        }
    }

    fn mul_jet(&self, other: &Self) -> Self {
        debug_assert!(Arc::ptr_eq(&self.layout, &other.layout));
        let order = self.order.min(other.order);
        let mut coeffs = vec![T::zero(); self.layout.len(order)];
        for &(a, b, c) in self.layout.products(order) {
            coeffs[c as usize] += self.coeffs[a as usize] * other.coeffs[b as usize];
        }
        Self {
            layout: self.layout.clone(),
            order,
            coeffs,
        }
    }

    /// `Σ_k series[k] · (self − self(p))^k`, i.e. composition of a univariate
    /// function with Taylor coefficients `series` (taken at `self(p)`).
    pub fn compose(&self, series: &[T]) -> Self {
        let mut h = self.clone();
        h.coeffs[0] = T::zero();
        let top = self.order.min(series.len().saturating_sub(1));
        let mut acc = Self::constant(&self.layout, self.order, series[top]);
        for k in (0..top).rev() {
            acc = acc.mul_jet(&h);
            acc.coeffs[0] += series[k];
        }
        acc
    }

    pub fn recip(&self) -> Result<Self, JetError> {
        let v = self.value();
        if v.modulus() == 0.0 {
            return Err(JetError::ZeroDivisor);
        }
        let inv = T::one() / v;
        let mut series = Vec::with_capacity(self.order + 1);
        let mut term = inv;
        for _ in 0..=self.order {
            series.push(term);
            term = -term * inv;
        }
        Ok(self.compose(&series))
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, JetError> {
        Ok(self.mul_jet(&other.recip()?))
    }

    pub fn powi(&self, exponent: u32) -> Self {
        let mut result = Self::constant(&self.layout, self.order, T::one());
        let mut base = self.clone();
        let mut e = exponent;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        result
    }

    pub fn map_coeffs<U: Scalar>(&self, f: impl Fn(T) -> U) -> Jet<U> {
        Jet {
            layout: self.layout.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|&c| f(c)).collect(),
        }
    }
}

impl Jet<f64> {
    pub fn to_complex(&self) -> Jet<Complex64> {
        self.map_coeffs(|c| Complex64::new(c, 0.0))
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        let mut series = Vec::with_capacity(self.order + 1);
        let mut fact = 1.0;
        for k in 0..=self.order {
            if k > 0 {
                fact *= k as f64;
            }
            series.push(e / fact);
        }
        self.compose(&series)
    }

    pub fn ln(&self) -> Result<Self, JetError> {
        let v = self.value();
        if v <= 0.0 || !v.is_finite() {
            return Err(JetError::Domain(v));
        }
        let mut series = vec![v.ln()];
        for k in 1..=self.order {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            series.push(sign / (k as f64 * v.powi(k as i32)));
        }
        Ok(self.compose(&series))
    }

    /// Real power `self^a` for a positive base value.
    pub fn powf(&self, a: f64) -> Result<Self, JetError> {
        let v = self.value();
        if v <= 0.0 || !v.is_finite() {
            return Err(JetError::Domain(v));
        }
        let mut series = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        for k in 0..=self.order {
            if k > 0 {
                binom *= (a - (k as f64 - 1.0)) / k as f64;
            }
            series.push(v.powf(a - k as f64) * binom);
        }
        Ok(self.compose(&series))
    }
}

impl Jet<Complex64> {
    pub fn re(&self) -> Jet<f64> {
        self.map_coeffs(|c| c.re)
    }

    pub fn im(&self) -> Jet<f64> {
        self.map_coeffs(|c| c.im)
    }

    pub fn conj(&self) -> Self {
        self.map_coeffs(|c| c.conj())
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl<T: Scalar> $trait<&Jet<T>> for &Jet<T> {
            type Output = Jet<T>;
            fn $method(self, rhs: &Jet<T>) -> Jet<T> {
                let f: fn(&Jet<T>, &Jet<T>) -> Jet<T> = $body;
                f(self, rhs)
            }
        }
        impl<T: Scalar> $trait<Jet<T>> for Jet<T> {
            type Output = Jet<T>;
            fn $method(self, rhs: Jet<T>) -> Jet<T> {
                (&self).$method(&rhs)
            }
        }
        impl<T: Scalar> $trait<&Jet<T>> for Jet<T> {
            type Output = Jet<T>;
            fn $method(self, rhs: &Jet<T>) -> Jet<T> {
                (&self).$method(rhs)
            }
        }
        impl<T: Scalar> $trait<Jet<T>> for &Jet<T> {
            type Output = Jet<T>;
            fn $method(self, rhs: Jet<T>) -> Jet<T> {
                self.$method(&rhs)
            }
        }
    };
}

fn zip_with<T: Scalar>(a: &Jet<T>, b: &Jet<T>, f: impl Fn(T, T) -> T) -> Jet<T> {
    let order = a.order.min(b.order);
    let len = a.layout.len(order);
    Jet {
        layout: a.layout.clone(),
        order,
        coeffs: a.coeffs[..len]
            .iter()
            .zip(&b.coeffs[..len])
            .map(|(&x, &y)| f(x, y))
            .collect(),
    }
}

binop!(Add, add, |a, b| zip_with(a, b, |x, y| x + y));
binop!(Sub, sub, |a, b| zip_with(a, b, |x, y| x - y));
binop!(Mul, mul, |a, b| a.mul_jet(b));

impl<T: Scalar> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.scale(-T::one())
    }
}

/// Determinant of a square matrix of jets by elimination with partial
/// pivoting on the constant terms.
pub fn jet_det<T: Scalar>(mut m: Vec<Vec<Jet<T>>>) -> Result<Jet<T>, JetError> {
    let n = m.len();
    let layout = m[0][0].layout().clone();
    let order = m.iter().flatten().map(Jet::order).min().unwrap_or(0);
    let mut det = Jet::constant(&layout, order, T::one());
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| {
                m[a][col]
                    .value()
                    .modulus()
                    .total_cmp(&m[b][col].value().modulus())
            })
            .expect("non-empty range");
        if m[pivot][col].value().modulus() == 0.0 {
            // singular at the base point; expand the remaining block instead
            let block: Vec<Vec<Jet<T>>> = m[col..].iter().map(|row| row[col..].to_vec()).collect();
            return Ok(&det * &laplace_det(&block));
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let inv = m[col][col].recip()?;
        det = &det * &m[col][col];
        for row in col + 1..n {
            let factor = &m[row][col] * &inv;
            for k in col + 1..n {
                let update = &factor * &m[col][k];
                m[row][k] = &m[row][k] - &update;
            }
        }
    }
    Ok(det)
}

fn laplace_det<T: Scalar>(m: &[Vec<Jet<T>>]) -> Jet<T> {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc: Option<Jet<T>> = None;
    for j in 0..n {
        let minor: Vec<Vec<Jet<T>>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, x)| x.clone()).collect())
            .collect();
        let term = &m[0][j] * &laplace_det(&minor);
        let term = if j % 2 == 1 { -term } else { term };
        acc = Some(match acc {
            Some(a) => a + term,
            None => term,
        });
    }
    acc.expect("non-empty matrix")
}

/// Inverse of a square matrix of jets by Gauss–Jordan elimination with
/// partial pivoting on the constant terms.
pub fn jet_inverse<T: Scalar>(m: &[Vec<Jet<T>>]) -> Result<Vec<Vec<Jet<T>>>, JetError> {
    let n = m.len();
    let layout = m[0][0].layout().clone();
    let order = m.iter().flatten().map(Jet::order).min().unwrap_or(0);
    let mut a: Vec<Vec<Jet<T>>> = m
        .iter()
        .map(|row| row.iter().map(|j| j.truncate(order)).collect())
        .collect();
    let mut inv: Vec<Vec<Jet<T>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Jet::constant(&layout, order, if i == j { T::one() } else { T::zero() }))
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| {
                a[x][col]
                    .value()
                    .modulus()
                    .total_cmp(&a[y][col].value().modulus())
            })
            .expect("non-empty range");
        a.swap(pivot, col);
        inv.swap(pivot, col);
        let p = a[col][col].recip()?;
        for k in 0..n {
            a[col][k] = &a[col][k] * &p;
            inv[col][k] = &inv[col][k] * &p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col].clone();
            for k in 0..n {
                let ua = &factor * &a[col][k];
                a[row][k] = &a[row][k] - &ua;
                let ui = &factor * &inv[col][k];
                inv[row][k] = &inv[row][k] - &ui;
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(l: &Arc<Layout>, order: usize, v: usize, base: f64) -> Jet {
        Jet::variable(l, order, v, base)
    }

    #[test]
    fn square_of_variable() {
        let l = Layout::get(2, 4);
        let x = var(&l, 4, 0, 0.7);
        let sq = &x * &x;
        assert!((sq.value() - 0.49).abs() < 1e-15);
        assert!((sq.partial(&[0]) - 1.4).abs() < 1e-15);
        assert!((sq.partial(&[0, 0]) - 2.0).abs() < 1e-15);
        assert_eq!(sq.partial(&[0, 0, 0]), 0.0);
        assert_eq!(sq.partial(&[0, 1]), 0.0);
    }

    #[test]
    fn reciprocal_matches_closed_form() {
        let l = Layout::get(1, 4);
        let x = var(&l, 4, 0, 2.0);
        let r = x.recip().unwrap();
        // d^k/dx^k 1/x = (-1)^k k! / x^{k+1}
        let mut fact = 1.0;
        for k in 0..=4usize {
            if k > 0 {
                fact *= k as f64;
            }
            let expected = (-1f64).powi(k as i32) * fact / 2f64.powi(k as i32 + 1);
            assert!((r.partial(&vec![0; k]) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn exp_ln_roundtrip() {
        let l = Layout::get(3, 4);
        let x = var(&l, 4, 0, 0.3) + var(&l, 4, 1, -0.2) * var(&l, 4, 2, 0.5);
        let back = x.exp().ln().unwrap();
        for (a, b) in back.coeffs().iter().zip(x.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn powf_matches_repeated_product() {
        let l = Layout::get(2, 4);
        let x = var(&l, 4, 0, 1.3) + var(&l, 4, 1, 0.4);
        let cube = x.powf(3.0).unwrap();
        let prod = &(&x * &x) * &x;
        for (a, b) in cube.coeffs().iter().zip(prod.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_lowers_order() {
        let l = Layout::get(2, 4);
        let x = var(&l, 4, 0, 0.5);
        let y = var(&l, 4, 1, -1.0);
        let f = &x.powi(3) * &y;
        let fx = f.derivative(0);
        assert_eq!(fx.order(), 3);
        // d/dx (x^3 y) = 3x^2 y
        assert!((fx.value() - 3.0 * 0.25 * -1.0).abs() < 1e-14);
        assert!((fx.partial(&[1]) - 0.75).abs() < 1e-14);
    }

    #[test]
    fn determinant_and_inverse_of_jet_matrix() {
        let l = Layout::get(2, 3);
        let x = var(&l, 3, 0, 0.2);
        let y = var(&l, 3, 1, 0.1);
        let one = Jet::constant(&l, 3, 1.0);
        let m = vec![
            vec![one.add_scalar(1.0) + &x, y.clone()],
            vec![x.clone(), &y * &y],
        ];
        let det = jet_det(m.clone()).unwrap();
        let expected = &(&(one.add_scalar(1.0) + &x) * &(&y * &y)) - &(&x * &y);
        for (a, b) in det.coeffs().iter().zip(expected.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
        let inv = jet_inverse(&m).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Jet::constant(&l, 3, 0.0);
                for k in 0..2 {
                    acc = acc + &m[i][k] * &inv[k][j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((acc.value() - target).abs() < 1e-12);
                for c in &acc.coeffs()[1..] {
                    // inverse coefficients reach 1e7 here, so compare relatively
                    assert!(c.abs() < 1e-14 * 1e7, "{c}");
                }
            }
        }
    }
}
