//! Built-in domain corpus.

use std::collections::BTreeMap;

use serde::Serialize;

use super::ast::{ExprAst, Node};
use super::ExprError;

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 5] = ["ball", "ellipsoid", "example51", "example52", "disc_perturbed"];

/// A bounded domain `{r < 0}` together with what the samplers need to find
/// its boundary.
#[derive(Debug, Clone, Serialize)]
pub struct DomainSpec {
    pub name: String,
    pub n: usize,
    #[serde(serialize_with = "serialize_ast")]
    pub ast: ExprAst,
    pub parameters: BTreeMap<String, f64>,
    /// A point with `r < 0`; boundary rays start here.
    pub interior_point: Vec<f64>,
    /// Rays longer than this leave the domain for sure.
    pub bounding_radius: f64,
    /// Points the boundary sampler aims at before the low-discrepancy
    /// directions; used to reach small regions where a criterion is tight.
    pub focus_points: Vec<Vec<f64>>,
}

fn serialize_ast<S: serde::Serializer>(ast: &ExprAst, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&ast.to_string())
}

impl DomainSpec {
    /// Wraps an arbitrary expression; the origin is the default interior point.
    pub fn from_expr(
        name: &str,
        ast: ExprAst,
        interior_point: Option<Vec<f64>>,
        bounding_radius: f64,
    ) -> Result<Self, ExprError> {
        let n = ast.n();
        let interior_point = interior_point.unwrap_or_else(|| vec![0.0; 2 * n]);
        let spec = Self {
            name: name.to_string(),
            n,
            ast,
            parameters: BTreeMap::new(),
            interior_point,
            bounding_radius,
            focus_points: Vec::new(),
        };
        spec.check_interior()?;
        Ok(spec)
    }

    fn check_interior(&self) -> Result<(), ExprError> {
        let v = self.ast.eval(&self.interior_point)?;
        if v >= 0.0 {
            return Err(ExprError::Parameter {
                name: "interior_point".into(),
                value: v,
                reason: "r must be negative at the interior point".into(),
            });
        }
        Ok(())
    }

    /// `r` at a point.
    pub fn r(&self, point: &[f64]) -> Result<f64, ExprError> {
        self.ast.eval(point)
    }
}

/// Largest admissible quartic coefficient of the non-convex example.
pub fn example52_c_max(alpha: f64) -> f64 {
    (9.0 - 8.0 * alpha) * (1.0 + alpha) / 256.0
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn dimension(params: &BTreeMap<String, f64>, default: usize) -> Result<usize, ExprError> {
    let v = param(params, "n", default as f64);
    if v < 1.0 || v.fract() != 0.0 || v > crate::jets::MAX_COMPLEX_DIM as f64 {
        return Err(ExprError::Parameter {
            name: "n".into(),
            value: v,
            reason: format!("must be an integer in 1..={}", crate::jets::MAX_COMPLEX_DIM),
        });
    }
    Ok(v as usize)
}

fn sum(terms: impl IntoIterator<Item = Node>) -> Node {
    terms
        .into_iter()
        .reduce(|a, b| a + b)
        .unwrap_or(Node::Const(0.0))
}

fn abs2_all(n: usize) -> Node {
    sum((0..n).map(Node::abs2))
}

fn reject_unknown(params: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<(), ExprError> {
    for (k, &v) in params {
        let ok = allowed.iter().any(|a| {
            if let Some(prefix) = a.strip_suffix('*') {
                k.strip_prefix(prefix)
                    .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
            } else {
                k == a
            }
        });
        if !ok {
            return Err(ExprError::Parameter {
                name: k.clone(),
                value: v,
                reason: "not a parameter of this domain".into(),
            });
        }
    }
    Ok(())
}

/// Builds a corpus domain by name.
///
/// | name | parameters | `r` |
/// |---|---|---|
/// | `ball` | `n` | `Σ|z_j|² − 1` |
/// | `ellipsoid` | `n`, `a1..`, `b1..` | `Σ (a_j x_j² + b_j y_j²) − 1`, default `a = (2, 1, ...)`, `b = 1` |
/// | `example51` | none | `−2 Re z_2 + |z|² − 8|z_1|⁴ g(|z_1|²)` with `δ = 4^{-12}` |
/// | `example52` | `n`, `alpha`, `c` | `|z|² + 2 Re z_n + α Re Σ z_j² + C Σ |z_j|⁴` |
/// | `disc_perturbed` | `eps`, `width` | `|z|² − 1 + ε g_w((x−1)² + y²)` |
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<DomainSpec, ExprError> {
    let mut parameters = params.clone();
    let (n, root, interior_point, bounding_radius, focus_points) = match name {
        "ball" => {
            reject_unknown(params, &["n"])?;
            let n = dimension(params, 2)?;
            parameters.insert("n".into(), n as f64);
            (n, abs2_all(n) - Node::c(1.0), vec![0.0; 2 * n], 2.0, Vec::new())
        }
        "ellipsoid" => {
            reject_unknown(params, &["n", "a*", "b*"])?;
            let n = dimension(params, 2)?;
            parameters.insert("n".into(), n as f64);
            let mut terms = Vec::new();
            let mut min_coeff = f64::INFINITY;
            for j in 0..n {
                let a = param(params, &format!("a{}", j + 1), if j == 0 { 2.0 } else { 1.0 });
                let b = param(params, &format!("b{}", j + 1), 1.0);
                for (key, v) in [(format!("a{}", j + 1), a), (format!("b{}", j + 1), b)] {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(ExprError::Parameter {
                            name: key,
                            value: v,
                            reason: "semi-axis coefficients must be positive".into(),
                        });
                    }
                    parameters.insert(key, v);
                }
                min_coeff = min_coeff.min(a).min(b);
                terms.push(Node::c(a) * Node::x(j).powi(2));
                terms.push(Node::c(b) * Node::y(j).powi(2));
            }
            let radius = 1.0 / min_coeff.sqrt() + 1.0;
            (n, sum(terms) - Node::c(1.0), vec![0.0; 2 * n], radius, Vec::new())
        }
        "example51" => {
            reject_unknown(params, &[])?;
            let delta = 4f64.powi(-12);
            parameters.insert("delta".into(), delta);
            let z1sq = Node::abs2(0);
            let root = Node::c(-2.0) * Node::x(1) + abs2_all(2)
                - Node::c(8.0) * z1sq.clone().powi(2) * z1sq.bump(delta);
            // the negative-margin region is |z_1|² < δ around the origin
            let mut focus = vec![vec![0.0; 4]];
            for k in 0..8 {
                let rad = delta.sqrt() * (k as f64 + 0.5) / 8.0;
                for m in 0..4 {
                    let th = std::f64::consts::FRAC_PI_2 * m as f64 + 0.3 * k as f64;
                    focus.push(vec![rad * th.cos(), rad * th.sin(), 0.0, 0.0]);
                }
            }
            (2, root, vec![0.0, 0.0, 0.5, 0.0], 3.0, focus)
        }
        "example52" => {
            reject_unknown(params, &["n", "alpha", "c"])?;
            let n = dimension(params, 2)?;
            if n < 2 {
                return Err(ExprError::Parameter {
                    name: "n".into(),
                    value: n as f64,
                    reason: "this example needs n >= 2".into(),
                });
            }
            let alpha = param(params, "alpha", 21.0 / 20.0);
            if !(alpha > 1.0 && alpha < 9.0 / 8.0) {
                return Err(ExprError::Parameter {
                    name: "alpha".into(),
                    value: alpha,
                    reason: "must satisfy 1 < alpha < 9/8".into(),
                });
            }
            let c_max = example52_c_max(alpha);
            let c = param(params, "c", c_max);
            if !(c > 0.0 && c <= c_max) {
                return Err(ExprError::Parameter {
                    name: "c".into(),
                    value: c,
                    reason: format!("must satisfy 0 < C <= (9-8 alpha)(1+alpha)/256 = {c_max}"),
                });
            }
            parameters.insert("n".into(), n as f64);
            parameters.insert("alpha".into(), alpha);
            parameters.insert("c".into(), c);
            // Re z_j² = x_j² − y_j²
            let quad = sum((0..n).map(|j| Node::x(j).powi(2) - Node::y(j).powi(2)));
            let quartic = sum((0..n).map(|j| Node::abs2(j).powi(2)));
            let root = abs2_all(n)
                + Node::c(2.0) * Node::x(n - 1)
                + Node::c(alpha) * quad
                + Node::c(c) * quartic;
            let mut interior = vec![0.0; 2 * n];
            interior[2 * (n - 1)] = -1.0 / (1.0 + alpha);
            // |y_j|² can reach about (alpha − 1)/C before the quartic wins
            let radius = 2.0 * ((alpha - 1.0) / c).sqrt() + 3.0;
            (n, root, interior, radius, vec![vec![0.0; 2 * n]])
        }
        "disc_perturbed" => {
            reject_unknown(params, &["eps", "width"])?;
            let eps = param(params, "eps", 0.3);
            let width = param(params, "width", 0.04);
            if !(eps > 0.0 && eps < 1.0) {
                return Err(ExprError::Parameter {
                    name: "eps".into(),
                    value: eps,
                    reason: "must lie in (0, 1)".into(),
                });
            }
            if !(width > 0.0 && width < 0.25) {
                return Err(ExprError::Parameter {
                    name: "width".into(),
                    value: width,
                    reason: "must lie in (0, 0.25)".into(),
                });
            }
            parameters.insert("eps".into(), eps);
            parameters.insert("width".into(), width);
            let dist = (Node::x(0) - Node::c(1.0)).powi(2) + Node::y(0).powi(2);
            let root = Node::abs2(0) - Node::c(1.0) + Node::c(eps) * dist.bump(width);
            (1, root, vec![0.0, 0.0], 2.0, vec![vec![1.0, 0.0]])
        }
        other => return Err(ExprError::UnknownDomain(other.to_string())),
    };
    let spec = DomainSpec {
        name: name.to_string(),
        n,
        ast: ExprAst::new(n, root)?,
        parameters,
        interior_point,
        bounding_radius,
        focus_points,
    };
    spec.check_interior()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn none() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn example52_default_c() {
        let mut p = none();
        p.insert("alpha".into(), 1.05);
        let d = builtin("example52", &p).unwrap();
        assert!((d.parameters["c"] - 0.6 * 2.05 / 256.0).abs() < 1e-15);
        assert!((d.parameters["c"] - 0.004_804_688).abs() < 1e-9);
    }

    #[test]
    fn example52_guard() {
        let mut p = none();
        p.insert("c".into(), 0.01);
        assert!(matches!(builtin("example52", &p), Err(ExprError::Parameter { .. })));
        p.insert("c".into(), 0.0);
        assert!(builtin("example52", &p).is_err());
    }

    #[test]
    fn ball_value() {
        let d = builtin("ball", &none()).unwrap();
        assert_eq!(d.n, 2);
        assert!((d.r(&[0.5, 0.0, 0.0, 0.0]).unwrap() + 0.75).abs() < 1e-15);
    }

    #[test]
    fn example51_interior() {
        let d = builtin("example51", &none()).unwrap();
        assert!((d.r(&d.interior_point).unwrap() + 0.75).abs() < 1e-15);
        assert_eq!(d.r(&[0.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn unknown_name_and_parameter() {
        assert!(matches!(builtin("torus", &none()), Err(ExprError::UnknownDomain(_))));
        let mut p = none();
        p.insert("q".into(), 1.0);
        assert!(builtin("ball", &p).is_err());
    }

    #[test]
    fn every_builtin_has_negative_interior() {
        for name in BUILTIN_NAMES {
            let d = builtin(name, &none()).unwrap();
            assert!(d.r(&d.interior_point).unwrap() < 0.0, "{name}");
        }
    }
}
