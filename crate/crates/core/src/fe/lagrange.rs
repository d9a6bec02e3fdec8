//! Nodal Lagrange bases on triangles, evaluated directly in barycentric
//! coordinates of the physical cell. Supported degrees: 1, 2, 3.

/// Barycentric coordinates of `x` in the triangle with the given vertices.
pub fn barycentric(verts: &[[f64; 2]; 3], x: [f64; 2]) -> [f64; 3] {
    let [p0, p1, p2] = verts;
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let l1 = ((x[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (x[1] - p0[1])) / det;
    let l2 = ((p1[0] - p0[0]) * (x[1] - p0[1]) - (x[0] - p0[0]) * (p1[1] - p0[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Constant physical gradients of the three barycentric coordinates.
pub fn bary_gradients(verts: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let [p0, p1, p2] = verts;
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    [
        [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
        [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
        [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
    ]
}

/// A nodal degree of freedom of a Lagrange element, described by where its
/// node sits in the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagrangeNode {
    /// Local vertex 0..3.
    Vertex(usize),
    /// Node on the edge between local vertices `from` and `to`, at parameter
    /// `(which + 1) / degree` measured from `from`.
    Edge { from: usize, to: usize, which: usize },
    /// Cell centroid (degree 3 only).
    Interior,
}

/// Value and physical gradient of the nodal basis function of `node` for the
/// given `degree`, at barycentric position `lam` with gradients `g`.
pub fn eval_node_basis(
    degree: usize,
    node: LagrangeNode,
    lam: [f64; 3],
    g: &[[f64; 2]; 3],
) -> (f64, [f64; 2]) {
    let lin = |coeffs: [f64; 3]| {
        let mut grad = [0.0; 2];
        for k in 0..3 {
            grad[0] += coeffs[k] * g[k][0];
            grad[1] += coeffs[k] * g[k][1];
        }
        grad
    };
    match (degree, node) {
        (1, LagrangeNode::Vertex(k)) => (lam[k], g[k]),
        (2, LagrangeNode::Vertex(k)) => {
            let mut c = [0.0; 3];
            c[k] = 4.0 * lam[k] - 1.0;
            (lam[k] * (2.0 * lam[k] - 1.0), lin(c))
        }
        (2, LagrangeNode::Edge { from: i, to: j, .. }) => {
            let mut c = [0.0; 3];
            c[i] = 4.0 * lam[j];
            c[j] = 4.0 * lam[i];
            (4.0 * lam[i] * lam[j], lin(c))
        }
        (3, LagrangeNode::Vertex(k)) => {
            let l = lam[k];
            let val = 0.5 * l * (3.0 * l - 1.0) * (3.0 * l - 2.0);
            let mut c = [0.0; 3];
            c[k] = 0.5 * (27.0 * l * l - 18.0 * l + 2.0);
            (val, lin(c))
        }
        (3, LagrangeNode::Edge { from: i, to: j, which }) => {
            let (li, lj) = (lam[i], lam[j]);
            if which == 0 {
                // Node at 1/3 from vertex i: lambda_i = 2/3 there.
                let val = 4.5 * li * lj * (3.0 * li - 1.0);
                let mut c = [0.0; 3];
                c[i] = 4.5 * lj * (6.0 * li - 1.0);
                c[j] = 4.5 * li * (3.0 * li - 1.0);
                (val, lin(c))
            } else {
                let val = 4.5 * li * lj * (3.0 * lj - 1.0);
                let mut c = [0.0; 3];
                c[i] = 4.5 * lj * (3.0 * lj - 1.0);
                c[j] = 4.5 * li * (6.0 * lj - 1.0);
                (val, lin(c))
            }
        }
        (3, LagrangeNode::Interior) => {
            let val = 27.0 * lam[0] * lam[1] * lam[2];
            let c = [
                27.0 * lam[1] * lam[2],
                27.0 * lam[0] * lam[2],
                27.0 * lam[0] * lam[1],
            ];
            (val, lin(c))
        }
        _ => unreachable!("unsupported Lagrange degree/node combination"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> [[f64; 2]; 3] {
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    }

    fn nodes(degree: usize) -> Vec<(LagrangeNode, [f64; 3])> {
        let mut out = Vec::new();
        for k in 0..3 {
            let mut lam = [0.0; 3];
            lam[k] = 1.0;
            out.push((LagrangeNode::Vertex(k), lam));
        }
        if degree >= 2 {
            for k in 0..3 {
                let (i, j) = (k, (k + 1) % 3);
                for which in 0..degree - 1 {
                    let t = (which as f64 + 1.0) / degree as f64;
                    let mut lam = [0.0; 3];
                    lam[i] = 1.0 - t;
                    lam[j] = t;
                    out.push((LagrangeNode::Edge { from: i, to: j, which }, lam));
                }
            }
        }
        if degree == 3 {
            out.push((LagrangeNode::Interior, [1.0 / 3.0; 3]));
        }
        out
    }

    #[test]
    fn kronecker_property() {
        let verts = unit_triangle();
        let g = bary_gradients(&verts);
        for degree in 1..=3usize {
            let nds = nodes(degree);
            for (a, (_, lam_a)) in nds.iter().enumerate() {
                for (b, (node_b, _)) in nds.iter().enumerate() {
                    let (val, _) = eval_node_basis(degree, *node_b, *lam_a, &g);
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!(
                        (val - expect).abs() < 1e-13,
                        "degree {degree}: basis {b} at node {a} = {val}"
                    );
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_and_gradient_sum() {
        let verts = [[0.2, 0.1], [0.9, 0.3], [0.4, 0.8]];
        let g = bary_gradients(&verts);
        let pts = [[0.5, 0.4], [0.3, 0.3], [0.55, 0.35]];
        for degree in 1..=3usize {
            for p in pts {
                let lam = barycentric(&verts, p);
                let mut sum = 0.0;
                let mut gsum = [0.0; 2];
                for (node, _) in nodes(degree) {
                    let (v, gr) = eval_node_basis(degree, node, lam, &g);
                    sum += v;
                    gsum[0] += gr[0];
                    gsum[1] += gr[1];
                }
                assert!((sum - 1.0).abs() < 1e-13, "degree {degree}");
                assert!(gsum[0].abs() < 1e-12 && gsum[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn barycentric_roundtrip() {
        let verts = [[0.0, 0.0], [2.0, 0.5], [0.5, 1.5]];
        let lam = barycentric(&verts, [0.9, 0.6]);
        let x = [
            lam[0] * verts[0][0] + lam[1] * verts[1][0] + lam[2] * verts[2][0],
            lam[0] * verts[0][1] + lam[1] * verts[1][1] + lam[2] * verts[2][1],
        ];
        assert!((x[0] - 0.9).abs() < 1e-14 && (x[1] - 0.6).abs() < 1e-14);
        assert!((lam.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
