//! Structured triangulations of the unit square.
//!
//! An `n x n` grid of squares is split into triangles along the diagonal
//! from the lower-left to the upper-right corner of each square. Edges carry
//! a global orientation (from the lower to the higher vertex index) so that
//! normal-flux bookkeeping for H(div) elements reduces to an index
//! comparison.

use crate::error::{Error, Result};

pub const COORD_TOL: f64 = 1e-12;

/// Per-edge classification produced by [`classify_boundary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Interior,
    /// Essential part of the boundary (displacement, normal flux, vorticity).
    Gamma,
    /// Natural part of the boundary (normal stress, fluid normal stress).
    Sigma,
}

/// Which edges of the boundary belong to the essential part Gamma.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundarySpec {
    /// The whole boundary is essential.
    AllDirichlet,
    /// Gamma consists of the edges on x = 0 and y = 0, Sigma is the rest.
    Mixed,
}

/// Conforming triangulation of the unit square.
#[derive(Debug, Clone)]
pub struct Mesh {
    /// Grid resolution: the square is divided into `n x n` cells of two
    /// triangles each.
    pub n: usize,
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    /// Vertex pairs, oriented from the lower to the higher vertex index.
    pub edges: Vec<[usize; 2]>,
    /// Slot `k` of cell `c` is the edge from local vertex `k` to `k+1 mod 3`;
    /// the sign is +1 when that traversal agrees with the global edge
    /// orientation and -1 otherwise.
    pub cell_to_edges: Vec<[(usize, i8); 3]>,
    /// Cells incident to each edge, as `(cell, local slot)` pairs.
    pub edge_to_cells: Vec<Vec<(usize, usize)>>,
    pub boundary_tags: Vec<BoundaryTag>,
    /// Maximum cell diameter.
    pub h_max: f64,
}

/// Build the structured `n x n` triangulation with deterministic numbering.
pub fn build_unit_square_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "mesh resolution n must be at least 1".into(),
        ));
    }
    let nv = n + 1;
    let vid = |i: usize, j: usize| j * nv + i;
    let mut vertices = Vec::with_capacity(nv * nv);
    for j in 0..nv {
        for i in 0..nv {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }

    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let ll = vid(i, j);
            let lr = vid(i + 1, j);
            let ul = vid(i, j + 1);
            let ur = vid(i + 1, j + 1);
            cells.push([ll, lr, ur]);
            cells.push([ll, ur, ul]);
        }
    }

    // Edges are numbered in first-encounter order over cells and slots.
    let mut edges: Vec<[usize; 2]> = Vec::new();
    let mut edge_of = std::collections::HashMap::new();
    let mut cell_to_edges = Vec::with_capacity(cells.len());
    for cell in &cells {
        let mut slots = [(0usize, 0i8); 3];
        for k in 0..3 {
            let a = cell[k];
            let b = cell[(k + 1) % 3];
            let key = (a.min(b), a.max(b));
            let id = *edge_of.entry(key).or_insert_with(|| {
                edges.push([key.0, key.1]);
                edges.len() - 1
            });
            slots[k] = (id, if a < b { 1 } else { -1 });
        }
        cell_to_edges.push(slots);
    }

    let mut edge_to_cells = vec![Vec::new(); edges.len()];
    for (c, slots) in cell_to_edges.iter().enumerate() {
        for (k, &(e, _)) in slots.iter().enumerate() {
            edge_to_cells[e].push((c, k));
        }
    }

    let boundary_tags = edge_to_cells
        .iter()
        .map(|cells| {
            if cells.len() == 1 {
                BoundaryTag::Gamma
            } else {
                BoundaryTag::Interior
            }
        })
        .collect();

    let h_max = std::f64::consts::SQRT_2 / n as f64;

    Ok(Mesh {
        n,
        vertices,
        cells,
        edges,
        cell_to_edges,
        edge_to_cells,
        boundary_tags,
        h_max,
    })
}

/// Uniform refinement; produces the same mesh as `build_unit_square_mesh(2n)`.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    build_unit_square_mesh(2 * mesh.n).expect("refinement of a valid mesh")
}

/// Re-tag the boundary edges of `mesh` according to `spec`.
pub fn classify_boundary(mesh: &mut Mesh, spec: BoundarySpec) {
    for e in 0..mesh.edges.len() {
        if mesh.edge_to_cells[e].len() != 1 {
            mesh.boundary_tags[e] = BoundaryTag::Interior;
            continue;
        }
        mesh.boundary_tags[e] = match spec {
            BoundarySpec::AllDirichlet => BoundaryTag::Gamma,
            BoundarySpec::Mixed => {
                let [a, b] = mesh.edges[e];
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                let on_x0 = pa[0].abs() < COORD_TOL && pb[0].abs() < COORD_TOL;
                let on_y0 = pa[1].abs() < COORD_TOL && pb[1].abs() < COORD_TOL;
                if on_x0 || on_y0 {
                    BoundaryTag::Gamma
                } else {
                    BoundaryTag::Sigma
                }
            }
        };
    }
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn signed_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cells[cell];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn area(&self, cell: usize) -> f64 {
        self.signed_area(cell).abs()
    }

    pub fn cell_vertices(&self, cell: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.cells[cell];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let [a, b] = self.edges[edge];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
    }

    /// Unit tangent along the global edge orientation (low to high index).
    pub fn edge_tangent(&self, edge: usize) -> [f64; 2] {
        let [a, b] = self.edges[edge];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let len = self.edge_length(edge);
        [(pb[0] - pa[0]) / len, (pb[1] - pa[1]) / len]
    }

    /// Unit normal fixed by the global edge orientation (tangent rotated by
    /// -90 degrees).
    pub fn edge_normal(&self, edge: usize) -> [f64; 2] {
        let t = self.edge_tangent(edge);
        [t[1], -t[0]]
    }

    /// Outward unit normal of `cell` on its edge slot `k`.
    pub fn outward_normal(&self, cell: usize, slot: usize) -> [f64; 2] {
        let (edge, sign) = self.cell_to_edges[cell][slot];
        let n = self.edge_normal(edge);
        let s = sign as f64;
        [s * n[0], s * n[1]]
    }

    /// Points on `edge` at parameters `ts` measured along the global
    /// orientation.
    pub fn edge_points(&self, edge: usize, ts: &[f64]) -> Vec<[f64; 2]> {
        let [a, b] = self.edges[edge];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        ts.iter()
            .map(|&t| [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])])
            .collect()
    }

    pub fn is_boundary_edge(&self, edge: usize) -> bool {
        self.edge_to_cells[edge].len() == 1
    }

    /// Plain-text dump of vertices and cells, for debugging.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "# vertices {}", self.vertices.len()).unwrap();
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(out, "v {i} {:.17e} {:.17e}", v[0], v[1]).unwrap();
        }
        writeln!(out, "# cells {}", self.cells.len()).unwrap();
        for (i, c) in self.cells.iter().enumerate() {
            writeln!(out, "c {i} {} {} {}", c[0], c[1], c[2]).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_resolution() {
        assert!(build_unit_square_mesh(0).is_err());
    }

    #[test]
    fn counts_n1() {
        let m = build_unit_square_mesh(1).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_edges(), 5);
        assert_eq!(m.n_cells(), 2);
        let interior = m
            .boundary_tags
            .iter()
            .filter(|t| **t == BoundaryTag::Interior)
            .count();
        assert_eq!(interior, 1);
    }

    #[test]
    fn counts_n2() {
        let m = build_unit_square_mesh(2).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_edges(), 16);
        assert_eq!(m.n_cells(), 8);
        assert!((m.h_max - 0.7071).abs() < 5e-5);
    }

    #[test]
    fn euler_relation_and_area() {
        for n in [1, 2, 3, 4, 7] {
            let m = build_unit_square_mesh(n).unwrap();
            let v = m.n_vertices() as i64;
            let e = m.n_edges() as i64;
            let c = m.n_cells() as i64;
            assert_eq!(v - e + c, 1, "Euler relation at n={n}");
            let total: f64 = (0..m.n_cells()).map(|c| m.signed_area(c)).sum();
            assert!((total - 1.0).abs() < 1e-13, "area sum at n={n}: {total}");
            assert!((0..m.n_cells()).all(|c| m.signed_area(c) > 0.0));
        }
    }

    #[test]
    fn refine_matches_double_resolution() {
        let m = build_unit_square_mesh(2).unwrap();
        let r = refine_uniform(&m);
        assert_eq!(r.n_vertices(), 25);
        assert_eq!(r.h_max / m.h_max, 0.5);
        // Five refinements of the coarsest tabulated mesh (n=2) reach
        // h ~ 0.0221, the finest tabulated resolution.
        let mut m = build_unit_square_mesh(2).unwrap();
        for _ in 0..5 {
            m = refine_uniform(&m);
        }
        assert!((m.h_max - 0.0221).abs() < 5e-5, "h={}", m.h_max);
    }

    #[test]
    fn interior_edges_shared_with_opposite_signs() {
        let m = build_unit_square_mesh(3).unwrap();
        for e in 0..m.n_edges() {
            let incident = &m.edge_to_cells[e];
            match incident.len() {
                1 => assert!(m.is_boundary_edge(e)),
                2 => {
                    let s0 = m.cell_to_edges[incident[0].0][incident[0].1].1;
                    let s1 = m.cell_to_edges[incident[1].0][incident[1].1].1;
                    assert_eq!(s0 + s1, 0, "edge {e} signs must oppose");
                }
                k => panic!("edge {e} shared by {k} cells"),
            }
        }
    }

    #[test]
    fn classify_all_dirichlet_and_mixed() {
        let mut m = build_unit_square_mesh(2).unwrap();
        classify_boundary(&mut m, BoundarySpec::AllDirichlet);
        let gamma = m
            .boundary_tags
            .iter()
            .filter(|t| **t == BoundaryTag::Gamma)
            .count();
        assert_eq!(gamma, 8);

        classify_boundary(&mut m, BoundarySpec::Mixed);
        let gamma = m
            .boundary_tags
            .iter()
            .filter(|t| **t == BoundaryTag::Gamma)
            .count();
        let sigma = m
            .boundary_tags
            .iter()
            .filter(|t| **t == BoundaryTag::Sigma)
            .count();
        assert_eq!((gamma, sigma), (4, 4));

        let mut m4 = build_unit_square_mesh(4).unwrap();
        classify_boundary(&mut m4, BoundarySpec::Mixed);
        let gamma = m4
            .boundary_tags
            .iter()
            .filter(|t| **t == BoundaryTag::Gamma)
            .count();
        let sigma = m4
            .boundary_tags
            .iter()
            .filter(|t| **t == BoundaryTag::Sigma)
            .count();
        assert_eq!((gamma, sigma), (8, 8));
    }

    #[test]
    fn outward_normals_point_outward() {
        let m = build_unit_square_mesh(2).unwrap();
        for c in 0..m.n_cells() {
            let verts = m.cell_vertices(c);
            let centroid = [
                (verts[0][0] + verts[1][0] + verts[2][0]) / 3.0,
                (verts[0][1] + verts[1][1] + verts[2][1]) / 3.0,
            ];
            for slot in 0..3 {
                let (e, _) = m.cell_to_edges[c][slot];
                let mid = m.edge_points(e, &[0.5])[0];
                let n = m.outward_normal(c, slot);
                let d = (mid[0] - centroid[0]) * n[0] + (mid[1] - centroid[1]) * n[1];
                assert!(d > 0.0, "normal of cell {c} slot {slot} points inward");
            }
        }
    }

    #[test]
    fn uniform_shape_regularity() {
        let m = build_unit_square_mesh(5).unwrap();
        // All cells are congruent right triangles: identical area and
        // identical minimum edge length.
        let areas: Vec<f64> = (0..m.n_cells()).map(|c| m.area(c)).collect();
        for a in &areas {
            assert!((a - areas[0]).abs() < 1e-15);
        }
    }
}
