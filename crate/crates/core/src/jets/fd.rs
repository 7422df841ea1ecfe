//! Finite-difference oracle, kept independent of the jet arithmetic so it can
//! validate it.
//!
//! Each partial is a tensor product of second-order central stencils; one
//! Richardson step on `(h, h/2)` raises the truncation error to `O(h⁴)`.
//! Roundoff grows like `ε |f| / h^k` for a `k`-th derivative, so the step has
//! to be matched to the scale on which the function varies.

use num_complex::Complex64;

use super::wirtinger::wirtinger_combination;
use crate::expr::ExprAst;

#[derive(Debug, Clone, Copy)]
pub struct FdOptions {
    pub step: f64,
    pub richardson: bool,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            step: 1e-2,
            richardson: true,
        }
    }
}

// (offset, weight) pairs of the central stencil for the a-th derivative, h = 1
fn stencil(a: usize) -> &'static [(i32, f64)] {
    match a {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        _ => panic!("finite-difference oracle supports derivatives up to order 4"),
    }
}

fn central(f: &dyn Fn(&[f64]) -> f64, point: &[f64], vars: &[usize], h: f64) -> f64 {
    let mut counts = vec![0usize; point.len()];
    for &v in vars {
        counts[v] += 1;
    }
    let active: Vec<(usize, &[(i32, f64)])> = counts
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c > 0)
        .map(|(v, &c)| (v, stencil(c)))
        .collect();
    let mut total = 0.0;
    let mut idx = vec![0usize; active.len()];
    let mut x = point.to_vec();
    loop {
        let mut w = 1.0;
        for (slot, &(v, st)) in active.iter().enumerate() {
            let (off, wt) = st[idx[slot]];
            x[v] = point[v] + f64::from(off) * h;
            w *= wt;
        }
        total += w * f(&x);
        // odometer over stencil indices
        let mut slot = 0;
        loop {
            if slot == active.len() {
                return total / h.powi(vars.len() as i32);
            }
            idx[slot] += 1;
            if idx[slot] < active[slot].1.len() {
                break;
            }
            idx[slot] = 0;
            slot += 1;
        }
    }
}

/// Finite-difference estimate of `∂^k f/∂x_{v1}...∂x_{vk}` for `k <= 4`.
pub fn fd_partial(f: &dyn Fn(&[f64]) -> f64, point: &[f64], vars: &[usize], opts: FdOptions) -> f64 {
    assert!(vars.len() <= 4, "multi-index order must be at most 4");
    let coarse = central(f, point, vars, opts.step);
    if !opts.richardson || vars.is_empty() {
        return coarse;
    }
    let fine = central(f, point, vars, opts.step / 2.0);
    (4.0 * fine - coarse) / 3.0
}

/// Finite-difference estimate of a real partial of an expression.
///
/// Evaluation failures (division by zero at a stencil point) yield NaN.
pub fn fd_oracle(ast: &ExprAst, point: &[f64], vars: &[usize], opts: FdOptions) -> f64 {
    let f = |x: &[f64]| ast.eval(x).unwrap_or(f64::NAN);
    fd_partial(&f, point, vars, opts)
}

/// Mixed Wirtinger derivative assembled from finite-difference real partials.
pub fn fd_wirtinger(
    f: &dyn Fn(&[f64]) -> f64,
    point: &[f64],
    holo: &[usize],
    anti: &[usize],
    opts: FdOptions,
) -> Complex64 {
    wirtinger_combination(holo, anti, |vars| fd_partial(f, point, vars, opts))
}
