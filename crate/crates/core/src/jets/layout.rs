//! Monomial bookkeeping shared by every jet of a given dimension and order.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Graded monomial table for `dim` variables up to total degree `max_order`.
///
/// Monomials are stored degree by degree, so the coefficients of a jet of
/// order `k <= max_order` form a prefix of the full coefficient vector.
#[derive(Debug)]
pub struct Layout {
    dim: usize,
    max_order: usize,
    exponents: Vec<Vec<u8>>,
    degree: Vec<usize>,
    // number of monomials of degree <= k, for k = 0..=max_order
    prefix: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    // (a, b, c) with m_a * m_b = m_c, sorted by degree of m_c
    products: Vec<(u32, u32, u32)>,
    // products[..product_prefix[k]] have result degree <= k
    product_prefix: Vec<usize>,
    // per variable: (source, target, factor) with d/dx_v m_source = factor * m_target
    derivatives: Vec<Vec<(u32, u32, f64)>>,
    factorials: Vec<f64>,
}

impl Layout {
    fn build(dim: usize, max_order: usize) -> Self {
        let mut exponents: Vec<Vec<u8>> = Vec::new();
        let mut degree = Vec::new();
        let mut prefix = Vec::with_capacity(max_order + 1);
        for d in 0..=max_order {
            let mut current = vec![0u8; dim];
            push_compositions(&mut current, 0, d, &mut exponents);
            while degree.len() < exponents.len() {
                degree.push(d);
            }
            prefix.push(exponents.len());
        }
        let index: HashMap<Vec<u8>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();

        let mut products = Vec::new();
        for (a, ea) in exponents.iter().enumerate() {
            for (b, eb) in exponents.iter().enumerate() {
                if degree[a] + degree[b] > max_order {
                    continue;
                }
                let ec: Vec<u8> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                let c = index[&ec];
                products.push((a as u32, b as u32, c as u32));
            }
        }
        products.sort_by_key(|&(_, _, c)| (degree[c as usize], c));
        let mut product_prefix = vec![0; max_order + 1];
        for (k, slot) in product_prefix.iter_mut().enumerate() {
            *slot = products.partition_point(|&(_, _, c)| degree[c as usize] <= k);
        }

        let mut derivatives = vec![Vec::new(); dim];
        for (s, e) in exponents.iter().enumerate() {
            for (v, list) in derivatives.iter_mut().enumerate() {
                if e[v] == 0 {
                    continue;
                }
                let mut t = e.clone();
                t[v] -= 1;
                list.push((s as u32, index[&t] as u32, f64::from(e[v])));
            }
        }

        let mut factorials = vec![1.0; max_order + 1];
        for k in 1..=max_order {
            factorials[k] = factorials[k - 1] * k as f64;
        }

        Self {
            dim,
            max_order,
            exponents,
            degree,
            prefix,
            index,
            products,
            product_prefix,
            derivatives,
            factorials,
        }
    }

    /// Shared layout for `(dim, max_order)`; built once per process.
    pub fn get(dim: usize, max_order: usize) -> Arc<Layout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet layout cache poisoned");
        guard
            .entry((dim, max_order))
            .or_insert_with(|| Arc::new(Layout::build(dim, max_order)))
            .clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Number of coefficients of a jet of order `order`.
    pub fn len(&self, order: usize) -> usize {
        self.prefix[order]
    }

    pub fn exponent(&self, i: usize) -> &[u8] {
        &self.exponents[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degree[i]
    }

    pub fn index_of(&self, exponent: &[u8]) -> Option<usize> {
        self.index.get(exponent).copied()
    }

    pub(crate) fn products(&self, order: usize) -> &[(u32, u32, u32)] {
        &self.products[..self.product_prefix[order]]
    }

    pub(crate) fn derivative_table(&self, var: usize) -> &[(u32, u32, f64)] {
        &self.derivatives[var]
    }

    /// Multi-index factorial `alpha!` for monomial `i`.
    pub fn multi_factorial(&self, i: usize) -> f64 {
        self.exponents[i]
            .iter()
            .map(|&e| self.factorials[e as usize])
            .product()
    }
}

fn push_compositions(current: &mut Vec<u8>, pos: usize, remaining: usize, out: &mut Vec<Vec<u8>>) {
    if pos + 1 == current.len() {
        current[pos] = remaining as u8;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e as u8;
        push_compositions(current, pos + 1, remaining - e, out);
    }
    current[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn monomial_counts() {
        for dim in 1..=6 {
            for order in 0..=4 {
                let l = Layout::get(dim, order);
                assert_eq!(l.len(order), binomial(dim + order, order));
            }
        }
    }

    #[test]
    fn graded_prefix() {
        let l = Layout::get(3, 4);
        for i in 0..l.len(4) {
            let d: usize = l.exponent(i).iter().map(|&e| e as usize).sum();
            assert_eq!(d, l.degree(i));
            assert!(i < l.len(d));
            if d > 0 {
                assert!(i >= l.len(d - 1));
            }
        }
    }
}
