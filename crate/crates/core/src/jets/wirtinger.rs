use nalgebra::DMatrix;
use num_complex::Complex64;

use super::Jet;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `∂^{p+q} f / ∂z_{holo...} ∂z̄_{anti...}` at the base point of a real jet.
///
/// Real variables are ordered `(x_1, y_1, x_2, y_2, ...)`, and
/// `∂/∂z = (∂/∂x − i∂/∂y)/2`, `∂/∂z̄ = (∂/∂x + i∂/∂y)/2`.
pub fn wirtinger_partial(jet: &Jet, holo: &[usize], anti: &[usize]) -> Complex64 {
    wirtinger_combination(holo, anti, |vars| jet.partial(vars))
}

/// Expands a mixed Wirtinger derivative into real partials supplied by `real`.
pub(crate) fn wirtinger_combination(
    holo: &[usize],
    anti: &[usize],
    mut real: impl FnMut(&[usize]) -> f64,
) -> Complex64 {
    let k = holo.len() + anti.len();
    let mut total = Complex64::new(0.0, 0.0);
    let mut vars = vec![0usize; k];
    for mask in 0u32..(1 << k) {
        let mut weight = Complex64::new(0.5f64.powi(k as i32), 0.0);
        for (slot, (&j, is_holo)) in holo
            .iter()
            .map(|j| (j, true))
            .chain(anti.iter().map(|j| (j, false)))
            .enumerate()
        {
            if mask & (1 << slot) == 0 {
                vars[slot] = 2 * j;
            } else {
                vars[slot] = 2 * j + 1;
                weight *= if is_holo { -I } else { I };
            }
        }
        total += weight * real(&vars);
    }
    total
}

/// `∂/∂z_j` of a complex-valued jet.
pub fn dz(jet: &Jet<Complex64>, j: usize) -> Jet<Complex64> {
    (jet.derivative(2 * j) - jet.derivative(2 * j + 1).scale(I)).scale(Complex64::new(0.5, 0.0))
}

/// `∂/∂z̄_j` of a complex-valued jet.
pub fn dzbar(jet: &Jet<Complex64>, j: usize) -> Jet<Complex64> {
    (jet.derivative(2 * j) + jet.derivative(2 * j + 1).scale(I)).scale(Complex64::new(0.5, 0.0))
}

/// `(∂f/∂z_1, ..., ∂f/∂z_n)` at the base point.
pub fn complex_gradient(jet: &Jet) -> Vec<Complex64> {
    (0..jet.dim() / 2)
        .map(|i| wirtinger_partial(jet, &[i], &[]))
        .collect()
}

/// Complex Hessian `[∂²f/∂z_i∂z̄_j]` at the base point.
pub fn complex_hessian(jet: &Jet) -> DMatrix<Complex64> {
    let n = jet.dim() / 2;
    DMatrix::from_fn(n, n, |i, j| wirtinger_partial(jet, &[i], &[j]))
}

/// Holomorphic and antiholomorphic derivatives of a real function at a point,
/// up to the mixed fourth order `r_{ij̄kl̄}`.
#[derive(Debug, Clone)]
pub struct WirtingerData {
    n: usize,
    value: f64,
    grad: Vec<Complex64>,
    levi: DMatrix<Complex64>,
    holo2: DMatrix<Complex64>,
    third: Vec<Complex64>,
    fourth: Vec<Complex64>,
}

impl WirtingerData {
    /// Assembles the data directly from tensors; used by transformations.
    pub fn from_parts(
        n: usize,
        value: f64,
        grad: Vec<Complex64>,
        levi: DMatrix<Complex64>,
        holo2: DMatrix<Complex64>,
        third: Vec<Complex64>,
        fourth: Vec<Complex64>,
    ) -> Self {
        assert_eq!(grad.len(), n);
        assert_eq!(third.len(), n * n * n);
        assert_eq!(fourth.len(), n * n * n * n);
        Self {
            n,
            value,
            grad,
            levi,
            holo2,
            third,
            fourth,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `r` itself.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// `r_i = ∂r/∂z_i`.
    pub fn r_i(&self, i: usize) -> Complex64 {
        self.grad[i]
    }

    /// `r_ī = ∂r/∂z̄_i`.
    pub fn r_ibar(&self, i: usize) -> Complex64 {
        self.grad[i].conj()
    }

    pub fn gradient(&self) -> &[Complex64] {
        &self.grad
    }

    /// `r_{ij̄}`, the complex Hessian `H(r)`.
    pub fn levi(&self) -> &DMatrix<Complex64> {
        &self.levi
    }

    /// `r_{ij}`.
    pub fn r_ij(&self, i: usize, j: usize) -> Complex64 {
        self.holo2[(i, j)]
    }

    /// `r_{īj̄} = conj(r_{ij})`.
    pub fn r_ibar_jbar(&self, i: usize, j: usize) -> Complex64 {
        self.holo2[(i, j)].conj()
    }

    /// `r_{ij̄k}`: holomorphic in `i, k`, antiholomorphic in `j`.
    pub fn r_i_jbar_k(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.third[(i * self.n + j) * self.n + k]
    }

    /// `r_{ij̄k̄}`: holomorphic in `i`, antiholomorphic in `j, k`.
    pub fn r_i_jbar_kbar(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.r_i_jbar_k(j, i, k).conj()
    }

    /// `r_{ij̄kl̄}`.
    pub fn r_i_jbar_k_lbar(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        let n = self.n;
        self.fourth[((i * n + j) * n + k) * n + l]
    }
}

/// Converts a real jet of order >= 4 at a point of `R^{2n}` into Wirtinger data.
pub fn wirtinger(jet: &Jet) -> WirtingerData {
    assert!(jet.dim() % 2 == 0, "jet dimension must be even");
    let n = jet.dim() / 2;
    let grad = complex_gradient(jet);
    let levi = complex_hessian(jet);
    let holo2 = DMatrix::from_fn(n, n, |i, j| wirtinger_partial(jet, &[i, j], &[]));
    let mut third = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                third.push(wirtinger_partial(jet, &[i, k], &[j]));
            }
        }
    }
    let mut fourth = Vec::with_capacity(n * n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    fourth.push(wirtinger_partial(jet, &[i, k], &[j, l]));
                }
            }
        }
    }
    WirtingerData {
        n,
        value: jet.value(),
        grad,
        levi,
        holo2,
        third,
        fourth,
    }
}
