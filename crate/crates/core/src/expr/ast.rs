use std::fmt;
use std::sync::Arc;

use crate::jets::{check_limits, Jet, JetError, Layout};

use super::ExprError;

/// Node of a defining-function expression over the real coordinates of `C^n`.
///
/// Coordinate indices are zero-based complex indices: `X(0)` is `x_1 = Re z_1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    X(usize),
    Y(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, u32),
    /// `g_δ(t) = exp(−δ/(δ−t))` for `t < δ`, zero otherwise.
    Bump(Box<Node>, f64),
}

/// Parsed expression together with its complex dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    n: usize,
    root: Node,
}

/// Scalar value of the bump `g_δ(t)`.
pub fn bump(t: f64, delta: f64) -> f64 {
    if t < delta {
        (-delta / (delta - t)).exp()
    } else {
        0.0
    }
}

/// Taylor coefficients `g^{(k)}(t)/k!`, `k = 0..=order`, of the bump at `t`.
pub fn bump_series(t: f64, delta: f64, order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    if t >= delta {
        return out;
    }
    let s = delta - t;
    let g0 = (-delta / s).exp();
    if g0 == 0.0 {
        return out;
    }
    // φ(t) = −δ/(δ−t) has Taylor coefficients φ_k = −δ/s^{k+1}
    let phi: Vec<f64> = (0..=order).map(|k| -delta / s.powi(k as i32 + 1)).collect();
    out[0] = g0;
    for k in 1..=order {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += j as f64 * phi[j] * out[k - j];
        }
        out[k] = acc / k as f64;
    }
    out
}

impl Node {
    pub fn x(j: usize) -> Node {
        Node::X(j)
    }

    pub fn y(j: usize) -> Node {
        Node::Y(j)
    }

    pub fn c(v: f64) -> Node {
        Node::Const(v)
    }

    /// `|z_j|² = x_j² + y_j²`.
    pub fn abs2(j: usize) -> Node {
        Node::X(j).powi(2) + Node::Y(j).powi(2)
    }

    pub fn powi(self, e: u32) -> Node {
        Node::Pow(Box::new(self), e)
    }

    pub fn bump(self, delta: f64) -> Node {
        Node::Bump(Box::new(self), delta)
    }

    fn max_index(&self) -> Option<usize> {
        match self {
            Node::Const(_) => None,
            Node::X(j) | Node::Y(j) => Some(*j),
            Node::Neg(a) | Node::Pow(a, _) | Node::Bump(a, _) => a.max_index(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.max_index().max(b.max_index())
            }
        }
    }

    fn eval(&self, p: &[f64]) -> Result<f64, ExprError> {
        Ok(match self {
            Node::Const(c) => *c,
            Node::X(j) => p[2 * j],
            Node::Y(j) => p[2 * j + 1],
            Node::Neg(a) => -a.eval(p)?,
            Node::Add(a, b) => a.eval(p)? + b.eval(p)?,
            Node::Sub(a, b) => a.eval(p)? - b.eval(p)?,
            Node::Mul(a, b) => a.eval(p)? * b.eval(p)?,
            Node::Div(a, b) => {
                let d = b.eval(p)?;
                if d == 0.0 {
                    return Err(ExprError::DivisionByZero {
                        denominator: b.to_string(),
                    });
                }
                a.eval(p)? / d
            }
            Node::Pow(a, e) => a.eval(p)?.powi(*e as i32),
            Node::Bump(a, delta) => bump(a.eval(p)?, *delta),
        })
    }

    fn jet(&self, p: &[f64], layout: &Arc<Layout>, order: usize) -> Result<Jet, ExprError> {
        Ok(match self {
            Node::Const(c) => Jet::constant(layout, order, *c),
            Node::X(j) => Jet::variable(layout, order, 2 * j, p[2 * j]),
            Node::Y(j) => Jet::variable(layout, order, 2 * j + 1, p[2 * j + 1]),
            Node::Neg(a) => -a.jet(p, layout, order)?,
            Node::Add(a, b) => a.jet(p, layout, order)? + b.jet(p, layout, order)?,
            Node::Sub(a, b) => a.jet(p, layout, order)? - b.jet(p, layout, order)?,
            Node::Mul(a, b) => a.jet(p, layout, order)? * b.jet(p, layout, order)?,
            Node::Div(a, b) => {
                let den = b.jet(p, layout, order)?;
                let num = a.jet(p, layout, order)?;
                num.checked_div(&den).map_err(|_| ExprError::DivisionByZero {
                    denominator: b.to_string(),
                })?
            }
            Node::Pow(a, e) => a.jet(p, layout, order)?.powi(*e),
            Node::Bump(a, delta) => {
                let inner = a.jet(p, layout, order)?;
                inner.compose(&bump_series(inner.value(), *delta, order))
            }
        })
    }
}

impl ExprAst {
    /// Wraps a node tree; fails if a coordinate index is out of range.
    pub fn new(n: usize, root: Node) -> Result<Self, ExprError> {
        if n == 0 {
            return Err(ExprError::Dimension(n));
        }
        if let Some(j) = root.max_index() {
            if j >= n {
                return Err(ExprError::IndexOutOfRange {
                    pos: 0,
                    index: j + 1,
                    n,
                });
            }
        }
        Ok(Self { n, root })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    fn check_point(&self, point: &[f64]) -> Result<(), ExprError> {
        if point.len() != 2 * self.n {
            return Err(ExprError::PointDimension {
                expected: 2 * self.n,
                got: point.len(),
            });
        }
        Ok(())
    }

    /// Value at a point `(x_1, y_1, ..., x_n, y_n)`.
    pub fn eval(&self, point: &[f64]) -> Result<f64, ExprError> {
        self.check_point(point)?;
        self.root.eval(point)
    }

    /// Taylor jet of the expression at `point`, truncated at `order`.
    pub fn jet(&self, point: &[f64], order: usize) -> Result<Jet, ExprError> {
        self.check_point(point)?;
        check_limits(point.len(), order).map_err(ExprError::Jet)?;
        let layout = Layout::get(point.len(), order);
        self.root.jet(point, &layout, order)
    }
}

impl From<JetError> for ExprError {
    fn from(e: JetError) -> Self {
        ExprError::Jet(e)
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{})", -c)
            }
            Node::Const(c) => write!(f, "{c}"),
            Node::X(j) => write!(f, "x{}", j + 1),
            Node::Y(j) => write!(f, "y{}", j + 1),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Pow(a, e) if matches!(**a, Node::Pow(..)) => write!(f, "({a})^{e}"),
            Node::Pow(a, e) => write!(f, "{a}^{e}"),
            Node::Bump(a, d) => write!(f, "bump({a}, {d})"),
        }
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

macro_rules! node_op {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl std::ops::$trait for Node {
            type Output = Node;
            fn $method(self, rhs: Node) -> Node {
                Node::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}

node_op!(Add, add, Add);
node_op!(Sub, sub, Sub);
node_op!(Mul, mul, Mul);
node_op!(Div, div, Div);

impl std::ops::Neg for Node {
    type Output = Node;
    fn neg(self) -> Node {
        Node::Neg(Box::new(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_values() {
        let delta = 4f64.powi(-12);
        assert!((bump(0.0, delta) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(bump(delta, delta), 0.0);
        assert_eq!(bump(2.0 * delta, delta), 0.0);
    }

    #[test]
    fn bump_series_matches_finite_differences() {
        let delta = 0.5;
        let t = 0.1;
        let s = bump_series(t, delta, 4);
        let h = 1e-3;
        let d1 = (bump(t + h, delta) - bump(t - h, delta)) / (2.0 * h);
        let d2 = (bump(t + h, delta) - 2.0 * bump(t, delta) + bump(t - h, delta)) / (h * h);
        assert!((s[1] - d1).abs() < 1e-5);
        assert!((2.0 * s[2] - d2).abs() < 1e-4);
    }

    #[test]
    fn bump_is_flat_below_cutoff() {
        let delta = 4f64.powi(-12);
        let s = bump_series(delta * (1.0 - 1e-3), delta, 4);
        for c in s {
            assert!(c.abs() < 1e-8, "{c}");
        }
    }

    #[test]
    fn division_by_zero_names_the_denominator() {
        let ast = ExprAst::new(1, Node::c(1.0) / Node::x(0)).unwrap();
        let err = ast.eval(&[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, ExprError::DivisionByZero { ref denominator } if denominator == "x1"));
        assert!(ast.jet(&[0.0, 0.0], 2).is_err());
    }
}
