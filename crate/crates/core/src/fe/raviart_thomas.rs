//! Raviart-Thomas bases of degree 0 and 1 on triangles, constructed per cell
//! in physical coordinates.
//!
//! All degrees of freedom are defined globally: edge moments of the normal
//! component against the global edge orientation and normal, plus (for
//! degree 1) interior moments against the coordinate directions. Two cells
//! sharing an edge therefore see the same functionals and normal-trace
//! continuity holds by construction.

use crate::mesh::Mesh;
use crate::quadrature::{edge_rule, triangle_rule};
use nalgebra::SMatrix;

/// Evaluated RT basis on one cell.
pub struct RtCellBasis {
    /// degree 0: 3 functions, degree 1: 8 functions, slot-major
    /// (edge slot 0 moments, edge slot 1 moments, edge slot 2 moments,
    /// then interior moments).
    pub n_local: usize,
    kind: Kind,
}

enum Kind {
    /// RT0: opposite vertex and sign/(2|K|) scale per edge slot; the
    /// divergence is the constant sign/|K|.
    Rt0 {
        opposite: [[f64; 2]; 3],
        scale: [f64; 3],
    },
    /// RT1: monomial coefficients per basis function (8x8), in local frame.
    Rt1 {
        coeffs: SMatrix<f64, 8, 8>,
        center: [f64; 2],
        h: f64,
    },
}

/// Monomial basis of the RT1 space in local coordinates.
fn rt1_monomial(xi: f64, eta: f64, j: usize) -> [f64; 2] {
    match j {
        0 => [1.0, 0.0],
        1 => [xi, 0.0],
        2 => [eta, 0.0],
        3 => [0.0, 1.0],
        4 => [0.0, xi],
        5 => [0.0, eta],
        6 => [xi * xi, xi * eta],
        7 => [xi * eta, eta * eta],
        _ => unreachable!(),
    }
}

/// Divergence of the RT1 monomials with respect to the local frame.
fn rt1_monomial_div(xi: f64, eta: f64, j: usize) -> f64 {
    match j {
        0 | 2 | 3 | 4 => 0.0,
        1 | 5 => 1.0,
        6 => 3.0 * xi,
        7 => 3.0 * eta,
        _ => unreachable!(),
    }
}

impl RtCellBasis {
    pub fn new(mesh: &Mesh, cell: usize, degree: usize) -> Self {
        match degree {
            0 => {
                let verts = mesh.cell_vertices(cell);
                let area = mesh.area(cell);
                let mut opposite = [[0.0; 2]; 3];
                let mut scale = [0.0; 3];
                for slot in 0..3 {
                    opposite[slot] = verts[(slot + 2) % 3];
                    let (_, sign) = mesh.cell_to_edges[cell][slot];
                    scale[slot] = sign as f64 / (2.0 * area);
                }
                Self {
                    n_local: 3,
                    kind: Kind::Rt0 { opposite, scale },
                }
            }
            1 => {
                let verts = mesh.cell_vertices(cell);
                let center = [
                    (verts[0][0] + verts[1][0] + verts[2][0]) / 3.0,
                    (verts[0][1] + verts[1][1] + verts[2][1]) / 3.0,
                ];
                let h = mesh.area(cell).sqrt();
                let local = |p: [f64; 2]| [(p[0] - center[0]) / h, (p[1] - center[1]) / h];

                // DOF matrix: rows are functionals, columns monomials.
                let mut m = SMatrix::<f64, 8, 8>::zeros();
                let erule = edge_rule(5).expect("static rule");
                for slot in 0..3 {
                    let (edge, _) = mesh.cell_to_edges[cell][slot];
                    let len = mesh.edge_length(edge);
                    let n = mesh.edge_normal(edge);
                    let pts = mesh.edge_points(edge, &erule.points);
                    for j in 0..8 {
                        let (mut m0, mut m1) = (0.0, 0.0);
                        for (p, (t, w)) in pts.iter().zip(erule.points.iter().zip(&erule.weights)) {
                            let l = local(*p);
                            let v = rt1_monomial(l[0], l[1], j);
                            let vn = v[0] * n[0] + v[1] * n[1];
                            m0 += w * len * vn;
                            m1 += w * len * vn * (2.0 * t - 1.0);
                        }
                        m[(2 * slot, j)] = m0;
                        m[(2 * slot + 1, j)] = m1;
                    }
                }
                let vrule = triangle_rule(4).expect("static rule");
                let area2 = 2.0 * mesh.area(cell);
                for j in 0..8 {
                    let (mut ix, mut iy) = (0.0, 0.0);
                    for (q, w) in vrule.points.iter().zip(&vrule.weights) {
                        // Map the reference point to the physical cell.
                        let p = [
                            verts[0][0]
                                + q[0] * (verts[1][0] - verts[0][0])
                                + q[1] * (verts[2][0] - verts[0][0]),
                            verts[0][1]
                                + q[0] * (verts[1][1] - verts[0][1])
                                + q[1] * (verts[2][1] - verts[0][1]),
                        ];
                        let l = local(p);
                        let v = rt1_monomial(l[0], l[1], j);
                        ix += w * area2 * v[0];
                        iy += w * area2 * v[1];
                    }
                    m[(6, j)] = ix;
                    m[(7, j)] = iy;
                }
                let coeffs = m.try_inverse().expect("RT1 DOF matrix is unisolvent");
                Self {
                    n_local: 8,
                    kind: Kind::Rt1 { coeffs, center, h },
                }
            }
            d => panic!("unsupported RT degree {d}"),
        }
    }

    /// Value and divergence of local basis function `i` at physical `x`.
    pub fn eval(&self, i: usize, x: [f64; 2]) -> ([f64; 2], f64) {
        match &self.kind {
            Kind::Rt0 {
                opposite, scale, ..
            } => {
                let s = scale[i];
                (
                    [s * (x[0] - opposite[i][0]), s * (x[1] - opposite[i][1])],
                    2.0 * s,
                )
            }
            Kind::Rt1 { coeffs, center, h } => {
                let xi = (x[0] - center[0]) / h;
                let eta = (x[1] - center[1]) / h;
                let mut val = [0.0; 2];
                let mut div = 0.0;
                for j in 0..8 {
                    let c = coeffs[(j, i)];
                    if c != 0.0 {
                        let mv = rt1_monomial(xi, eta, j);
                        val[0] += c * mv[0];
                        val[1] += c * mv[1];
                        div += c * rt1_monomial_div(xi, eta, j) / h;
                    }
                }
                (val, div)
            }
        }
    }
}
