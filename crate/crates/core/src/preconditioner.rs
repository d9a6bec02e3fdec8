//! Parameter-weighted block-diagonal preconditioners for the Biot-Brinkman
//! system.
//!
//! Every operator block is realized as the inverse of the assembled Galerkin
//! matrix of the corresponding weighted bilinear form on the same space with
//! the same essential boundary conditions:
//!
//! * displacement: 2 mu (eps(u), eps(gamma));
//! * flux: (1/kappa)(v, zeta) + w (div v, div zeta), with w = nu/kappa for
//!   the first two variants and 1 + nu/kappa for the third;
//! * vorticity: (w, theta) + nu (grad w, grad theta) (the 2D curl of a
//!   scalar has |curl w| = |grad w|);
//! * pressures: weighted mass matrices, a discrete interior-penalty
//!   Laplacian acting on the discontinuous pressure, and for the third
//!   variant the coupled two-pressure block applied as the sum of two
//!   inverses (Brezzi-Braess form).
//!
//! Mean-value multiplier entries, when present, are passed through
//! unchanged.

use crate::assembly::{
    elastic_stiffness, flux_mass_graddiv, scalar_mass, scalar_stiffness, BlockSystem, FieldId,
    SpaceSet,
};
use crate::error::{Error, Result};
use crate::fe::{Family, FeSpace};
use crate::params::ParameterSet;
use crate::quadrature::edge_rule;
use crate::solver::{LinOp, Factorization};
use crate::sparse::{SparseMatrix, TripletMatrix};
use std::ops::Range;

/// The three block-diagonal variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    B1,
    B2,
    B3,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::B1 => "B1",
            Variant::B2 => "B2",
            Variant::B3 => "B3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "b1" => Ok(Variant::B1),
            "b2" => Ok(Variant::B2),
            "b3" => Ok(Variant::B3),
            other => Err(Error::InvalidInput(format!(
                "unknown preconditioner variant '{other}' (expected b1, b2 or b3)"
            ))),
        }
    }
}

/// Interior-penalty discrete Laplacian on a discontinuous pressure space
/// with a cellwise weight `eta`:
/// `sum_K (eta grad p, grad q)_K
///  + sum_{interior e} <(avg eta / h_e) [p], [q]>_e
///  + sum_{boundary e} <(eta / h_e) p, q>_e`.
/// For the lowest order only the edge sums contribute (broken gradients of
/// P0 vanish). The facet measure h_e is the edge length itself.
pub fn dg_laplacian(space: &FeSpace, eta: &[f64]) -> Result<TripletMatrix> {
    if space.family != Family::LagrangeDisc {
        return Err(Error::InvalidInput(
            "dg_laplacian requires a discontinuous pressure space".into(),
        ));
    }
    let mesh = space.mesh;
    if eta.len() != mesh.n_cells() {
        return Err(Error::InvalidInput(
            "dg_laplacian: eta must have one value per cell".into(),
        ));
    }
    let mut out = TripletMatrix::new(space.n_dofs, space.n_dofs);

    if space.degree > 0 {
        let vol = scalar_stiffness(space, 1.0, 2 * space.degree)?;
        for &(r, c, v) in vol.entries() {
            // Weight by the cell of the (cell-local) dofs.
            let cell = r / 3;
            out.push(r, c, eta[cell] * v);
        }
    }

    let erule = edge_rule((2 * space.degree).max(1) + 2)?;
    for e in 0..mesh.n_edges() {
        let len = mesh.edge_length(e);
        let pts = mesh.edge_points(e, &erule.points);
        let incident = &mesh.edge_to_cells[e];
        if incident.len() == 2 {
            let (ca, _) = incident[0];
            let (cb, _) = incident[1];
            let coeff = 0.5 * (eta[ca] + eta[cb]) / len;
            if coeff == 0.0 {
                continue;
            }
            let ea = space.eval_scalar(ca, &pts);
            let eb = space.eval_scalar(cb, &pts);
            // Jump [w] = w_a - w_b; assemble (coeff * [p], [q]) over the
            // union of both cells' dofs.
            let mut dofs = ea.dofs.clone();
            dofs.extend_from_slice(&eb.dofs);
            let nloc = dofs.len();
            let na = ea.dofs.len();
            let mut local = vec![0.0; nloc * nloc];
            for (q, w) in erule.weights.iter().map(|w| w * len).enumerate() {
                let jump: Vec<f64> = (0..nloc)
                    .map(|i| {
                        if i < na {
                            ea.vals[q][i]
                        } else {
                            -eb.vals[q][i - na]
                        }
                    })
                    .collect();
                for i in 0..nloc {
                    for j in 0..nloc {
                        local[i * nloc + j] += coeff * w * jump[i] * jump[j];
                    }
                }
            }
            for i in 0..nloc {
                for j in 0..nloc {
                    let v = local[i * nloc + j];
                    if v != 0.0 {
                        out.push(dofs[i], dofs[j], v);
                    }
                }
            }
        } else {
            let (c0, _) = incident[0];
            let coeff = eta[c0] / len;
            if coeff == 0.0 {
                continue;
            }
            let ev = space.eval_scalar(c0, &pts);
            for (q, w) in erule.weights.iter().map(|w| w * len).enumerate() {
                for (i, &di) in ev.dofs.iter().enumerate() {
                    for (j, &dj) in ev.dofs.iter().enumerate() {
                        let v = coeff * w * ev.vals[q][i] * ev.vals[q][j];
                        if v != 0.0 {
                            out.push(di, dj, v);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Coupled two-pressure block applied as `M1^{-1} + M2^{-1}`.
struct PressurePair {
    range: Range<usize>,
    m1: Factorization,
    m2: Factorization,
}

/// Assembled and factorized block-diagonal preconditioner.
pub struct BlockPreconditioner {
    n: usize,
    variant: Variant,
    diag_blocks: Vec<(Range<usize>, Factorization)>,
    pressure_pair: Option<PressurePair>,
    multipliers: Range<usize>,
}

/// Stack two scalar-space matrices into the coupled (phi, p) block
/// [[a*M, b*M], [b*M, C]] where C is supplied separately.
fn stacked_pressure_block(
    mass: &SparseMatrix,
    a: f64,
    b: f64,
    corner: &SparseMatrix,
) -> SparseMatrix {
    let n = mass.n_rows;
    let mut entries = Vec::new();
    for r in 0..n {
        let (cols, vals) = mass.row(r);
        for (c, v) in cols.iter().zip(vals) {
            entries.push((r, *c, a * v));
            entries.push((r, n + *c, b * v));
            entries.push((n + r, *c, b * v));
        }
        let (ccols, cvals) = corner.row(r);
        for (c, v) in ccols.iter().zip(cvals) {
            entries.push((n + r, n + *c, *v));
        }
    }
    SparseMatrix::from_triplets(2 * n, 2 * n, &entries)
}

/// Assemble and factorize the requested variant for an assembled system.
pub fn build_preconditioner(
    variant: Variant,
    spaces: &SpaceSet,
    params: &ParameterSet,
    system: &BlockSystem,
) -> Result<BlockPreconditioner> {
    let qd = spaces.form_quad_degree();
    let mesh = spaces.mesh();
    let factor = |m: &SparseMatrix, name: &str| -> Result<Factorization> {
        crate::solver::factorize_named(m, true, name)
    };

    let mut diag_blocks = Vec::new();

    let a_u = elastic_stiffness(&spaces.displacement, 2.0 * params.mu, qd)?;
    let a_u = system.reduce_field_block(FieldId::Displacement, &a_u);
    diag_blocks.push((
        system.field_range(FieldId::Displacement),
        factor(&a_u, "displacement block")?,
    ));

    let div_weight = match variant {
        Variant::B1 | Variant::B2 => params.nu / params.kappa,
        Variant::B3 => 1.0 + params.nu / params.kappa,
    };
    let a_v = flux_mass_graddiv(&spaces.flux, 1.0 / params.kappa, div_weight, qd)?;
    let a_v = system.reduce_field_block(FieldId::Flux, &a_v);
    diag_blocks.push((
        system.field_range(FieldId::Flux),
        factor(&a_v, "flux block")?,
    ));

    let mut a_w = scalar_mass(&spaces.vorticity, 1.0, qd)?;
    let stiff = scalar_stiffness(&spaces.vorticity, params.nu, qd)?;
    a_w.extend_from(&stiff, 0, 0);
    let a_w = system.reduce_field_block(FieldId::Vorticity, &a_w);
    diag_blocks.push((
        system.field_range(FieldId::Vorticity),
        factor(&a_w, "vorticity block")?,
    ));

    let phi_weight = 1.0 / params.lambda + 0.5 / params.mu;
    let p_mass_weight = params.pressure_mass_weight();
    let eta: Vec<f64> = vec![params.kappa; mesh.n_cells()];

    let mut pressure_pair = None;
    match variant {
        Variant::B1 => {
            let m_phi = scalar_mass(&spaces.total_pressure, phi_weight, qd)?;
            let m_phi = system.reduce_field_block(FieldId::TotalPressure, &m_phi);
            diag_blocks.push((
                system.field_range(FieldId::TotalPressure),
                factor(&m_phi, "total pressure block")?,
            ));
            let m_p = scalar_mass(&spaces.pressure, p_mass_weight + params.kappa, qd)?;
            let m_p = system.reduce_field_block(FieldId::Pressure, &m_p);
            diag_blocks.push((
                system.field_range(FieldId::Pressure),
                factor(&m_p, "pressure block")?,
            ));
        }
        Variant::B2 => {
            let m_phi = scalar_mass(&spaces.total_pressure, phi_weight, qd)?;
            let m_phi = system.reduce_field_block(FieldId::TotalPressure, &m_phi);
            diag_blocks.push((
                system.field_range(FieldId::TotalPressure),
                factor(&m_phi, "total pressure block")?,
            ));
            let mut m_p = scalar_mass(&spaces.pressure, p_mass_weight, qd)?;
            let lap = dg_laplacian(&spaces.pressure, &eta)?;
            m_p.extend_from(&lap, 0, 0);
            let m_p = system.reduce_field_block(FieldId::Pressure, &m_p);
            diag_blocks.push((
                system.field_range(FieldId::Pressure),
                factor(&m_p, "pressure block")?,
            ));
        }
        Variant::B3 => {
            let mass = scalar_mass(&spaces.pressure, 1.0, qd)?;
            let mass = system.reduce_field_block(FieldId::Pressure, &mass);
            let b = params.alpha / params.lambda;
            let l2_route_weight = params.kappa / (params.kappa + params.nu);

            let corner1 = {
                let mut t = TripletMatrix::new(mass.n_rows, mass.n_cols);
                for r in 0..mass.n_rows {
                    let (cols, vals) = mass.row(r);
                    for (c, v) in cols.iter().zip(vals) {
                        t.push(r, *c, (l2_route_weight + p_mass_weight) * v);
                    }
                }
                t.to_csr()
            };
            let m1 = stacked_pressure_block(&mass, phi_weight, b, &corner1);

            let mut corner2 = scalar_mass(&spaces.pressure, p_mass_weight, qd)?;
            let lap = dg_laplacian(&spaces.pressure, &eta)?;
            corner2.extend_from(&lap, 0, 0);
            let corner2 =
                system.reduce_field_block(FieldId::Pressure, &corner2);
            let m2 = stacked_pressure_block(&mass, phi_weight, b, &corner2);

            let phi_range = system.field_range(FieldId::TotalPressure);
            let p_range = system.field_range(FieldId::Pressure);
            assert_eq!(phi_range.end, p_range.start, "pressure blocks adjacent");
            pressure_pair = Some(PressurePair {
                range: phi_range.start..p_range.end,
                m1: factor(&m1, "coupled pressure block M1")?,
                m2: factor(&m2, "coupled pressure block M2")?,
            });
        }
    }

    Ok(BlockPreconditioner {
        n: system.n_reduced(),
        variant,
        diag_blocks,
        pressure_pair,
        multipliers: system.blocks.multipliers.clone(),
    })
}

impl BlockPreconditioner {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Apply the preconditioner: blockwise solves, the Brezzi-Braess sum for
    /// the coupled pressure pair, identity on multiplier entries.
    pub fn apply_vec(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply(r, &mut out);
        out
    }
}

impl LinOp for BlockPreconditioner {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, r: &[f64], out: &mut [f64]) {
        assert_eq!(r.len(), self.n);
        for (range, fact) in &self.diag_blocks {
            let sol = fact.solve(&r[range.clone()]);
            out[range.clone()].copy_from_slice(&sol);
        }
        if let Some(pair) = &self.pressure_pair {
            let rr = &r[pair.range.clone()];
            let mut sol = pair.m1.solve(rr);
            let sol2 = pair.m2.solve(rr);
            for (a, b) in sol.iter_mut().zip(&sol2) {
                *a += b;
            }
            out[pair.range.clone()].copy_from_slice(&sol);
        }
        for i in self.multipliers.clone() {
            out[i] = r[i];
        }
    }
}

/// Assemble the symmetric positive definite norm matrix whose inverse the
/// preconditioner applies (the Riesz map of the weighted norm). For the
/// third variant the coupled pressure block is (M1^{-1} + M2^{-1})^{-1},
/// computed densely; intended for the coarse-mesh spectrum diagnostics.
pub fn riesz_norm_matrix(
    variant: Variant,
    spaces: &SpaceSet,
    params: &ParameterSet,
    system: &BlockSystem,
) -> Result<SparseMatrix> {
    let qd = spaces.form_quad_degree();
    let mesh = spaces.mesh();
    let n = system.n_reduced();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut place = |m: &SparseMatrix, range: &Range<usize>| {
        for r in 0..m.n_rows {
            let (cols, vals) = m.row(r);
            for (c, v) in cols.iter().zip(vals) {
                entries.push((range.start + r, range.start + c, *v));
            }
        }
    };

    let a_u = elastic_stiffness(&spaces.displacement, 2.0 * params.mu, qd)?;
    let a_u = system.reduce_field_block(FieldId::Displacement, &a_u);
    place(&a_u, &system.field_range(FieldId::Displacement));

    let div_weight = match variant {
        Variant::B1 | Variant::B2 => params.nu / params.kappa,
        Variant::B3 => 1.0 + params.nu / params.kappa,
    };
    let a_v = flux_mass_graddiv(&spaces.flux, 1.0 / params.kappa, div_weight, qd)?;
    let a_v = system.reduce_field_block(FieldId::Flux, &a_v);
    place(&a_v, &system.field_range(FieldId::Flux));

    let mut a_w = scalar_mass(&spaces.vorticity, 1.0, qd)?;
    let stiff = scalar_stiffness(&spaces.vorticity, params.nu, qd)?;
    a_w.extend_from(&stiff, 0, 0);
    let a_w = system.reduce_field_block(FieldId::Vorticity, &a_w);
    place(&a_w, &system.field_range(FieldId::Vorticity));

    let phi_weight = 1.0 / params.lambda + 0.5 / params.mu;
    let p_mass_weight = params.pressure_mass_weight();
    let eta: Vec<f64> = vec![params.kappa; mesh.n_cells()];

    match variant {
        Variant::B1 | Variant::B2 => {
            let m_phi = scalar_mass(&spaces.total_pressure, phi_weight, qd)?;
            let m_phi = system.reduce_field_block(FieldId::TotalPressure, &m_phi);
            place(&m_phi, &system.field_range(FieldId::TotalPressure));
            let mut m_p = scalar_mass(&spaces.pressure, p_mass_weight, qd)?;
            if variant == Variant::B1 {
                let extra = scalar_mass(&spaces.pressure, params.kappa, qd)?;
                m_p.extend_from(&extra, 0, 0);
            } else {
                let lap = dg_laplacian(&spaces.pressure, &eta)?;
                m_p.extend_from(&lap, 0, 0);
            }
            let m_p = system.reduce_field_block(FieldId::Pressure, &m_p);
            place(&m_p, &system.field_range(FieldId::Pressure));
        }
        Variant::B3 => {
            let mass = scalar_mass(&spaces.pressure, 1.0, qd)?;
            let mass = system.reduce_field_block(FieldId::Pressure, &mass);
            let b = params.alpha / params.lambda;
            let l2_route_weight = params.kappa / (params.kappa + params.nu);
            let corner1 = {
                let mut t = TripletMatrix::new(mass.n_rows, mass.n_cols);
                for r in 0..mass.n_rows {
                    let (cols, vals) = mass.row(r);
                    for (c, v) in cols.iter().zip(vals) {
                        t.push(r, *c, (l2_route_weight + p_mass_weight) * v);
                    }
                }
                t.to_csr()
            };
            let m1 = stacked_pressure_block(&mass, phi_weight, b, &corner1);
            let mut corner2 = scalar_mass(&spaces.pressure, p_mass_weight, qd)?;
            let lap = dg_laplacian(&spaces.pressure, &eta)?;
            corner2.extend_from(&lap, 0, 0);
            let corner2 =
                system.reduce_field_block(FieldId::Pressure, &corner2);
            let m2 = stacked_pressure_block(&mass, phi_weight, b, &corner2);

            // Dense inverse of (M1^{-1} + M2^{-1}).
            let size = m1.n_rows;
            if size > crate::solver::DENSE_EIGEN_CAP {
                return Err(Error::DimensionCap {
                    size,
                    cap: crate::solver::DENSE_EIGEN_CAP,
                });
            }
            let d1 = m1.to_dense();
            let d2 = m2.to_dense();
            let i1 = d1.try_inverse().ok_or(Error::Singular { index: 0 })?;
            let i2 = d2.try_inverse().ok_or(Error::Singular { index: 0 })?;
            let sum = i1 + i2;
            let norm = sum.try_inverse().ok_or(Error::Singular { index: 0 })?;
            let start = system.field_range(FieldId::TotalPressure).start;
            for r in 0..size {
                for c in 0..size {
                    let v = 0.5 * (norm[(r, c)] + norm[(c, r)]);
                    if v != 0.0 {
                        entries.push((start + r, start + c, v));
                    }
                }
            }
        }
    }

    for i in system.blocks.multipliers.clone() {
        entries.push((i, i, 1.0));
    }
    Ok(SparseMatrix::from_triplets(n, n, &entries))
}
