//! Gauss rules on the reference interval `[0, 1]` and the reference triangle
//! with vertices `(0,0), (1,0), (0,1)`.
//!
//! Triangle rules are conical products of Gauss-Legendre rules (collapsed
//! square), so every weight is positive and any exactness degree is
//! available.

use std::f64::consts::PI;

pub const DEFAULT_DEGREE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    exactness_degree: usize,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one Gauss point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Legendre polynomial `P_n(z)` and its derivative.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

impl QuadratureRule {
    /// Rule exact for polynomials of degree `degree` on `[0, 1]`.
    pub fn interval(degree: usize) -> QuadratureRule {
        let n = degree / 2 + 1;
        let (x, w) = gauss_legendre(n);
        QuadratureRule {
            dim: 1,
            points: x.iter().map(|&xi| [0.5 * (xi + 1.0), 0.0]).collect(),
            weights: w.iter().map(|wi| 0.5 * wi).collect(),
            exactness_degree: 2 * n - 1,
        }
    }

    /// Rule exact for polynomials of total degree `degree` on the reference
    /// triangle.
    pub fn triangle(degree: usize) -> QuadratureRule {
        let n = (degree + 2).div_ceil(2);
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (xu, wu) in x.iter().zip(&w) {
            let u = 0.5 * (xu + 1.0);
            for (xv, wv) in x.iter().zip(&w) {
                let v = 0.5 * (xv + 1.0);
                points.push([u, v * (1.0 - u)]);
                weights.push(0.25 * wu * wv * (1.0 - u));
            }
        }
        QuadratureRule {
            dim: 2,
            points,
            weights,
            exactness_degree: 2 * n - 2,
        }
    }

    pub fn for_dim(dim: usize, degree: usize) -> QuadratureRule {
        match dim {
            1 => QuadratureRule::interval(degree),
            _ => QuadratureRule::triangle(degree),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn exactness_degree(&self) -> usize {
        self.exactness_degree
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn reference_measure(&self) -> f64 {
        if self.dim == 1 {
            1.0
        } else {
            0.5
        }
    }

    /// Barycentric coordinates of point `i`.
    pub fn barycentric(&self, i: usize) -> [f64; 3] {
        let [u, v] = self.points[i];
        if self.dim == 1 {
            [1.0 - u, u, 0.0]
        } else {
            [1.0 - u - v, u, v]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn weights_sum_to_reference_measure() {
        for d in 0..12 {
            let r = QuadratureRule::interval(d);
            assert!((r.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let t = QuadratureRule::triangle(d);
            assert!((t.weights().iter().sum::<f64>() - 0.5).abs() < 1e-14);
            assert!(t.weights().iter().all(|&w| w > 0.0));
            assert!(r.exactness_degree() >= d && t.exactness_degree() >= d);
        }
    }

    #[test]
    fn interval_monomials() {
        for d in 1..14 {
            let r = QuadratureRule::interval(d);
            for k in 0..=r.exactness_degree() {
                let q: f64 = r
                    .points()
                    .iter()
                    .zip(r.weights())
                    .map(|(p, w)| w * p[0].powi(k as i32))
                    .sum();
                let exact = 1.0 / (k as f64 + 1.0);
                assert!(
                    ((q - exact) / exact).abs() < 1e-12,
                    "degree {k} with rule {d}"
                );
            }
        }
    }

    #[test]
    fn triangle_monomials() {
        for d in 1..12 {
            let r = QuadratureRule::triangle(d);
            for a in 0..=r.exactness_degree() {
                for b in 0..=r.exactness_degree() - a {
                    let q: f64 = r
                        .points()
                        .iter()
                        .zip(r.weights())
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    assert!(
                        ((q - exact) / exact).abs() < 1e-12,
                        "x^{a} y^{b} with rule {d}"
                    );
                }
            }
        }
    }

    #[test]
    fn gauss_nodes_symmetric() {
        let (x, w) = gauss_legendre(5);
        for i in 0..5 {
            assert!((x[i] + x[4 - i]).abs() < 1e-15);
            assert!((w[i] - w[4 - i]).abs() < 1e-15);
        }
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }
}
