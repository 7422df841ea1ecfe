#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use superpsc::expr::{builtin, DomainSpec, Node};

pub fn domain(name: &str, params: &[(&str, f64)]) -> DomainSpec {
    let map: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    builtin(name, &map).unwrap()
}

/// Built-in corpus with a few parameter variations.
pub fn corpus() -> Vec<DomainSpec> {
    vec![
        domain("ball", &[("n", 2.0)]),
        domain("ball", &[("n", 3.0)]),
        domain("ellipsoid", &[]),
        domain("ellipsoid", &[("n", 3.0), ("a2", 3.0), ("b3", 0.5)]),
        domain("example51", &[]),
        domain("example52", &[]),
        domain("disc_perturbed", &[]),
    ]
}

/// Corpus members whose Levi form is positive definite on the boundary.
pub fn strictly_pseudoconvex() -> Vec<DomainSpec> {
    vec![
        domain("ball", &[("n", 2.0)]),
        domain("ellipsoid", &[]),
        domain("ellipsoid", &[("n", 3.0), ("a2", 3.0), ("b3", 0.5)]),
        domain("example51", &[]),
        domain("example52", &[]),
    ]
}

/// Random polynomial expression in `n` complex variables of degree at most 4.
pub fn polynomial(n: usize) -> impl Strategy<Value = Node> {
    let leaf = prop_oneof![
        (-2.0f64..2.0).prop_map(Node::Const),
        (0..n).prop_map(Node::X),
        (0..n).prop_map(Node::Y),
    ];
    // (node, degree) pairs keep the total degree bounded
    let leaf = leaf.prop_map(|l| {
        let d = if matches!(l, Node::Const(_)) { 0 } else { 1 };
        (l, d)
    });
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|((a, da), (b, db))| (a + b, da.max(db))),
            (inner.clone(), inner.clone()).prop_map(|((a, da), (b, db))| (a - b, da.max(db))),
            (inner.clone(), inner.clone()).prop_map(|((a, da), (b, db))| {
                if da + db <= 4 {
                    (a * b, da + db)
                } else {
                    (a + b, da.max(db))
                }
            }),
            inner.clone().prop_map(|(a, d)| if 2 * d <= 4 { (Node::Pow(Box::new(a), 2), 2 * d) } else { (a, d) }),
            inner.prop_map(|(a, d)| (-a, d)),
        ]
    })
    .prop_map(|(node, _)| node)
}

pub fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, dim)
}
