//! Boundary sampling along rays from an interior point.
//!
//! Ray directions come from a Halton sequence pushed through Box–Muller onto
//! the sphere, with a Cranley–Patterson shift drawn from the seed. Each ray is
//! marched to its first sign change, bisected, and polished with Newton steps
//! along the real gradient.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{DomainSpec, ExprError};
use crate::jets::complex_gradient;

/// Residual bound for an accepted boundary point.
pub const MAX_RESIDUAL: f64 = 1e-10;

const MARCH_STEPS: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("gradient of r vanishes at the boundary point")]
    VanishingGradient,
    #[error("no boundary point found on any of {0} rays")]
    NoSamples(usize),
}

/// A point on `{r = 0}` with its inward normal and complex tangent frame.
#[derive(Debug, Clone, Serialize)]
pub struct BoundarySample {
    /// Ray index that produced the sample.
    pub index: usize,
    pub point: Vec<f64>,
    pub residual: f64,
    pub inward_normal: Vec<f64>,
    /// Orthonormal basis of `H_z = {v : Σ r_j v_j = 0}`, as `(re, im)` pairs.
    #[serde(skip)]
    pub frame: Vec<Vec<Complex64>>,
}

/// Samples together with the number of rays that found no boundary.
#[derive(Debug, Clone, Serialize)]
pub struct SampleSet {
    pub requested: usize,
    pub shortfall: usize,
    pub samples: Vec<BoundarySample>,
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = f64::from(base);
    let mut inv = 1.0 / b;
    let mut acc = 0.0;
    while i > 0 {
        acc += (i % u64::from(base)) as f64 * inv;
        i /= u64::from(base);
        inv /= b;
    }
    acc
}

/// `count` unit vectors in `R^dim`, deterministic in `seed`.
pub fn directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = dim + dim % 2;
    let shift: Vec<f64> = (0..slots).map(|_| rng.gen::<f64>()).collect();
    (0..count)
        .map(|i| {
            let u: Vec<f64> = (0..slots)
                .map(|k| (radical_inverse(i as u64 + 1, PRIMES[k]) + shift[k]).fract())
                .collect();
            let mut v = Vec::with_capacity(slots);
            for pair in u.chunks(2) {
                let rad = (-2.0 * pair[0].max(1e-300).ln()).sqrt();
                let ang = std::f64::consts::TAU * pair[1];
                v.push(rad * ang.cos());
                v.push(rad * ang.sin());
            }
            v.truncate(dim);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / norm).collect()
        })
        .collect()
}

/// Orthonormal basis of the complex tangent space `{v : Σ r_j v_j = 0}`.
pub fn tangent_frame(grad: &[Complex64]) -> Result<Vec<Vec<Complex64>>, GeometryError> {
    let n = grad.len();
    let norm = grad.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-300 {
        return Err(GeometryError::VanishingGradient);
    }
    // v ⟂ ū in the Hermitian product, where u_j = r_j
    let u: Vec<Complex64> = grad.iter().map(|c| c.conj() / norm).collect();
    let skip = (0..n)
        .max_by(|&a, &b| u[a].norm().total_cmp(&u[b].norm()))
        .expect("n >= 1");
    let mut basis: Vec<Vec<Complex64>> = vec![u];
    for k in (0..n).filter(|&k| k != skip) {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[k] = Complex64::new(1.0, 0.0);
        // two passes of modified Gram–Schmidt for stability
        for _ in 0..2 {
            for b in &basis {
                let proj: Complex64 = v.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
        }
        let len = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        basis.push(v.into_iter().map(|c| c / len).collect());
    }
    basis.remove(0);
    Ok(basis)
}

fn eval(domain: &DomainSpec, p: &[f64]) -> f64 {
    domain.r(p).unwrap_or(f64::NAN)
}

fn along(origin: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    origin.iter().zip(dir).map(|(o, d)| o + t * d).collect()
}

/// Finds the first boundary crossing along a ray and polishes it.
pub fn boundary_on_ray(domain: &DomainSpec, dir: &[f64], index: usize) -> Option<BoundarySample> {
    let origin = &domain.interior_point;
    let h = domain.bounding_radius / MARCH_STEPS as f64;
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=MARCH_STEPS {
        let t = k as f64 * h;
        let v = eval(domain, &along(origin, dir, t));
        if v.is_nan() {
            return None;
        }
        if v >= 0.0 {
            hi = Some(t);
            break;
        }
        lo = t;
    }
    let mut hi = hi?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = eval(domain, &along(origin, dir, mid));
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if v.abs() < 1e-12 && hi - lo < 1e-12 {
            break;
        }
    }
    let t0 = if eval(domain, &along(origin, dir, lo)).abs() < eval(domain, &along(origin, dir, hi)).abs() {
        lo
    } else {
        hi
    };
    let mut p = along(origin, dir, t0);
    for _ in 0..2 {
        let jet = domain.ast.jet(&p, 1).ok()?;
        let g = jet.gradient();
        let g2: f64 = g.iter().map(|x| x * x).sum();
        if g2 == 0.0 {
            return None;
        }
        let step = jet.value() / g2;
        let next: Vec<f64> = p.iter().zip(&g).map(|(x, gi)| x - step * gi).collect();
        if eval(domain, &next).abs() <= jet.value().abs() {
            p = next;
        }
    }
    let jet = domain.ast.jet(&p, 1).ok()?;
    let residual = jet.value().abs();
    if residual >= MAX_RESIDUAL {
        return None;
    }
    let g = jet.gradient();
    let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if gn < 1e-6 {
        return None;
    }
    let frame = tangent_frame(&complex_gradient(&jet)).ok()?;
    Some(BoundarySample {
        index,
        point: p,
        residual,
        inward_normal: g.iter().map(|x| -x / gn).collect(),
        frame,
    })
}

/// Ray directions used for a domain: focus points first, then Halton.
pub fn ray_directions(domain: &DomainSpec, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let origin = &domain.interior_point;
    let mut dirs: Vec<Vec<f64>> = domain
        .focus_points
        .iter()
        .take(count)
        .filter_map(|target| {
            let d: Vec<f64> = target.iter().zip(origin).map(|(t, o)| t - o).collect();
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm > 0.0).then(|| d.iter().map(|x| x / norm).collect())
        })
        .collect();
    let rest = count - dirs.len();
    dirs.extend(directions(origin.len(), rest, seed));
    dirs
}

/// Samples `count` boundary points; deterministic in `(domain, count, seed)`
/// whatever the size of the thread pool.
pub fn sample_boundary(domain: &DomainSpec, count: usize, seed: u64) -> Result<SampleSet, GeometryError> {
    let dirs = ray_directions(domain, count, seed);
    let found: Vec<Option<BoundarySample>> = dirs
        .par_iter()
        .enumerate()
        .map(|(i, d)| boundary_on_ray(domain, d, i))
        .collect();
    let samples: Vec<BoundarySample> = found.into_iter().flatten().collect();
    if samples.is_empty() && count > 0 {
        return Err(GeometryError::NoSamples(count));
    }
    Ok(SampleSet {
        requested: count,
        shortfall: count - samples.len(),
        samples,
    })
}

/// Uniform random interior points by rejection from the bounding box around
/// the interior point; deterministic in `seed`.
pub fn sample_interior(domain: &DomainSpec, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rad = domain.bounding_radius;
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count && tries < 1000 * count.max(1) {
        tries += 1;
        let p: Vec<f64> = domain
            .interior_point
            .iter()
            .map(|c| c + rad * (2.0 * rng.gen::<f64>() - 1.0))
            .collect();
        if eval(domain, &p) < 0.0 {
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::builtin;
    use std::collections::BTreeMap;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn ball_samples_lie_on_sphere() {
        let d = builtin("ball", &BTreeMap::new()).unwrap();
        let set = sample_boundary(&d, 64, 3).unwrap();
        assert_eq!(set.shortfall, 0);
        for s in &set.samples {
            let norm: f64 = s.point.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            assert!(s.residual <= 1e-12);
            for (x, nv) in s.point.iter().zip(&s.inward_normal) {
                assert!((x + nv).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn frames_for_the_ball() {
        let f = tangent_frame(&[c(1.0), c(0.0)]).unwrap();
        assert_eq!(f.len(), 1);
        assert!((f[0][0]).norm() < 1e-15 && (f[0][1].norm() - 1.0).abs() < 1e-15);
        let f = tangent_frame(&[c(0.0), c(1.0)]).unwrap();
        assert!((f[0][0].norm() - 1.0).abs() < 1e-15 && f[0][1].norm() < 1e-15);
        assert!(tangent_frame(&[c(0.0), c(0.0)]).is_err());
    }

    #[test]
    fn frame_is_tangent_and_orthonormal() {
        let g = [Complex64::new(0.3, -0.2), Complex64::new(-0.5, 0.1), Complex64::new(0.2, 0.7)];
        let f = tangent_frame(&g).unwrap();
        assert_eq!(f.len(), 2);
        for (a, v) in f.iter().enumerate() {
            let t: Complex64 = g.iter().zip(v).map(|(x, y)| x * y).sum();
            assert!(t.norm() < 1e-14);
            for w in &f[a..] {
                let ip: Complex64 = v.iter().zip(w).map(|(x, y)| x * y.conj()).sum();
                let target = if std::ptr::eq(v, w) { 1.0 } else { 0.0 };
                assert!((ip - c(target)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn directions_are_deterministic_unit_vectors() {
        let a = directions(4, 10, 9);
        let b = directions(4, 10, 9);
        assert_eq!(a, b);
        for v in &a {
            assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
        }
        assert_ne!(a, directions(4, 10, 10));
    }

    #[test]
    fn example51_focus_ray_hits_origin() {
        let d = builtin("example51", &BTreeMap::new()).unwrap();
        let set = sample_boundary(&d, 1, 0).unwrap();
        let p = &set.samples[0].point;
        assert!(p.iter().all(|x| x.abs() < 1e-12), "{p:?}");
    }
}
