//! Gauss quadrature on the reference triangle and the reference edge.
//!
//! Edge rules are Gauss-Legendre on [0, 1]. Triangle rules are conical
//! products of a Gauss-Jacobi(1,0) rule (which absorbs the collapsed-edge
//! weight) with a Gauss-Legendre rule, so all weights are positive and the
//! rules are exact for total degree up to the requested order. Nodes and
//! weights are computed with the Golub-Welsch algorithm.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

pub const MAX_DEGREE: usize = 12;

/// Quadrature rule on the reference triangle {x, y >= 0, x + y <= 1}.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

/// Quadrature rule on the reference edge [0, 1].
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

fn check_degree(degree: usize) -> Result<()> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::InvalidInput(format!(
            "quadrature degree {degree} outside the supported range 1..={MAX_DEGREE}"
        )));
    }
    Ok(())
}

/// Nodes and weights of the m-point rule for the weight function whose
/// Jacobi-matrix recurrence coefficients are given: `diag[k] = a_k`,
/// `offdiag[k] = sqrt(b_{k+1})`, with `mu0` the total mass of the weight.
fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> (Vec<f64>, Vec<f64>) {
    let m = diag.len();
    let mut jac = DMatrix::zeros(m, m);
    for k in 0..m {
        jac[(k, k)] = diag[k];
        if k + 1 < m {
            jac[(k, k + 1)] = offdiag[k];
            jac[(k + 1, k)] = offdiag[k];
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|k| {
            let node = eig.eigenvalues[k];
            let w = mu0 * eig.eigenvectors[(0, k)].powi(2);
            (node, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Gauss-Legendre nodes/weights on [-1, 1].
fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let diag = vec![0.0; m];
    let offdiag: Vec<f64> = (1..m)
        .map(|k| {
            let k = k as f64;
            (k * k / (4.0 * k * k - 1.0)).sqrt()
        })
        .collect();
    golub_welsch(&diag, &offdiag, 2.0)
}

/// Gauss-Jacobi nodes/weights on [-1, 1] for the weight (1 - x).
fn gauss_jacobi_10(m: usize) -> (Vec<f64>, Vec<f64>) {
    // Recurrence coefficients for Jacobi polynomials with alpha=1, beta=0.
    let diag: Vec<f64> = (0..m)
        .map(|k| {
            let k = k as f64;
            -1.0 / ((2.0 * k + 1.0) * (2.0 * k + 3.0))
        })
        .collect();
    let offdiag: Vec<f64> = (1..m)
        .map(|k| {
            let k = k as f64;
            (k * (k + 1.0)).sqrt() / (2.0 * k + 1.0)
        })
        .collect();
    golub_welsch(&diag, &offdiag, 2.0)
}

/// Gauss rule on the reference edge [0, 1], exact for polynomials of the
/// requested total degree.
pub fn edge_rule(degree: usize) -> Result<EdgeRule> {
    check_degree(degree)?;
    let m = degree / 2 + 1;
    let (nodes, weights) = gauss_legendre(m);
    Ok(EdgeRule {
        points: nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights: weights.iter().map(|w| 0.5 * w).collect(),
        exactness: 2 * m - 1,
    })
}

/// Conical-product Gauss rule on the reference triangle, exact for
/// polynomials of the requested total degree.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    check_degree(degree)?;
    let m = degree / 2 + 1;
    let (gj_nodes, gj_weights) = gauss_jacobi_10(m);
    let (gl_nodes, gl_weights) = gauss_legendre(m);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for (xi_raw, wi) in gj_nodes.iter().zip(&gj_weights) {
        let xi = 0.5 * (xi_raw + 1.0);
        // Map of the GJ weight to [0,1]: (1-x) dx on [-1,1] equals
        // 4 (1-xi) dxi on [0,1].
        let wxi = wi / 4.0;
        for (eta_raw, wj) in gl_nodes.iter().zip(&gl_weights) {
            let eta = 0.5 * (eta_raw + 1.0);
            points.push([xi, eta * (1.0 - xi)]);
            weights.push(wxi * 0.5 * wj);
        }
    }
    Ok(TriangleRule {
        points,
        weights,
        exactness: 2 * m - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^a y^b over the reference triangle: a! b! / (a+b+2)!.
    fn monomial_integral(a: u32, b: u32) -> f64 {
        let fact = |k: u32| (1..=k as u64).product::<u64>() as f64;
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn rejects_unsupported_degrees() {
        assert!(triangle_rule(0).is_err());
        assert!(triangle_rule(13).is_err());
        assert!(edge_rule(0).is_err());
        assert!(edge_rule(13).is_err());
    }

    #[test]
    fn centroid_rule_for_degree_one() {
        let r = triangle_rule(1).unwrap();
        assert_eq!(r.points.len(), 1);
        assert!((r.points[0][0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((r.points[0][1] - 1.0 / 3.0).abs() < 1e-14);
        assert!((r.weights[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn triangle_exactness_sweep() {
        for degree in 1..=MAX_DEGREE {
            let r = triangle_rule(degree).unwrap();
            let wsum: f64 = r.weights.iter().sum();
            assert!((wsum - 0.5).abs() < 1e-14, "measure at degree {degree}");
            assert!(r.weights.iter().all(|w| *w > 0.0));
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let approx: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = monomial_integral(a, b);
                    assert!(
                        (approx - exact).abs() < 1e-14,
                        "x^{a} y^{b} at degree {degree}: {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn triangle_xy_is_one_twentyfourth() {
        let r = triangle_rule(3).unwrap();
        let v: f64 = r
            .points
            .iter()
            .zip(&r.weights)
            .map(|(p, w)| w * p[0] * p[1])
            .sum();
        assert!((v - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn edge_exactness_sweep() {
        for degree in 1..=MAX_DEGREE {
            let r = edge_rule(degree).unwrap();
            let wsum: f64 = r.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for a in 0..=degree as u32 {
                let approx: f64 = r
                    .points
                    .iter()
                    .zip(&r.weights)
                    .map(|(t, w)| w * t.powi(a as i32))
                    .sum();
                let exact = 1.0 / (a as f64 + 1.0);
                assert!(
                    (approx - exact).abs() < 1e-14,
                    "t^{a} at degree {degree}: {approx} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn edge_midpoint_and_fifth_power() {
        let r = edge_rule(1).unwrap();
        assert_eq!(r.points.len(), 1);
        assert!((r.points[0] - 0.5).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);

        let r = edge_rule(5).unwrap();
        let v: f64 = r
            .points
            .iter()
            .zip(&r.weights)
            .map(|(t, w)| w * t.powi(5))
            .sum();
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
    }
}
