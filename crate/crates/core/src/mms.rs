//! Manufactured solutions, analytic forcing terms, weighted and per-field
//! error norms, and convergence rates.
//!
//! The displacement, flux and fluid pressure are smooth trigonometric
//! fields; the total pressure and vorticity are derived from them together
//! with the model coefficients, and the loads follow by substituting into
//! the strong equations. All derivatives are hand-coded and cross-checked
//! against finite differences in the tests.

use crate::assembly::{loss_of_mass, ProblemData, SolutionFields};
use crate::error::Result;
use crate::fe::{map_rule_points, DATA_QUAD_DEGREE};
use crate::mesh::Mesh;
use crate::params::ParameterSet;
use crate::quadrature::triangle_rule;

use std::f64::consts::PI;

/// Quadrature degree for error integrals of the trigonometric solutions.
pub const ERROR_QUAD_DEGREE: usize = 10;

/// Closed-form solution fields and all derived quantities.
#[derive(Debug, Clone, Copy)]
pub struct ExactSolution {
    pub params: ParameterSet,
    /// sqrt(nu/kappa), the vorticity rescaling.
    curl_weight: f64,
}

/// Build the manufactured case for the given coefficients.
pub fn manufactured_case(params: ParameterSet) -> Result<ExactSolution> {
    params.validate()?;
    Ok(ExactSolution {
        params,
        curl_weight: params.curl_weight(),
    })
}

impl ExactSolution {
    pub fn displacement(&self, x: f64, y: f64) -> [f64; 2] {
        [(PI * (x + y)).sin(), (PI * (x * x + y * y)).cos()]
    }

    /// Jacobian of the displacement: `grad[i][j] = d u_i / d x_j`.
    pub fn displacement_gradient(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let c = PI * (PI * (x + y)).cos();
        let s = (PI * (x * x + y * y)).sin();
        [[c, c], [-2.0 * PI * x * s, -2.0 * PI * y * s]]
    }

    pub fn displacement_divergence(&self, x: f64, y: f64) -> f64 {
        let g = self.displacement_gradient(x, y);
        g[0][0] + g[1][1]
    }

    fn displacement_divergence_gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let s1 = (PI * (x + y)).sin();
        let r = PI * (x * x + y * y);
        let (sr, cr) = (r.sin(), r.cos());
        [
            -PI * PI * s1 - 4.0 * PI * PI * x * y * cr,
            -PI * PI * s1 - 2.0 * PI * sr - 4.0 * PI * PI * y * y * cr,
        ]
    }

    /// Second derivatives of the displacement components, as
    /// (u1_xx, u1_xy, u1_yy, u2_xx, u2_xy, u2_yy).
    fn displacement_hessian(&self, x: f64, y: f64) -> [f64; 6] {
        let s1 = (PI * (x + y)).sin();
        let r = PI * (x * x + y * y);
        let (sr, cr) = (r.sin(), r.cos());
        let pp = PI * PI;
        [
            -pp * s1,
            -pp * s1,
            -pp * s1,
            -2.0 * PI * sr - 4.0 * pp * x * x * cr,
            -4.0 * pp * x * y * cr,
            -2.0 * PI * sr - 4.0 * pp * y * y * cr,
        ]
    }

    pub fn pressure(&self, x: f64, y: f64) -> f64 {
        (PI * x + y).sin() * (PI * y).sin()
    }

    pub fn pressure_gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let (sa, ca) = (PI * x + y).sin_cos();
        let (sb, cb) = (PI * y).sin_cos();
        [PI * ca * sb, ca * sb + PI * sa * cb]
    }

    pub fn total_pressure(&self, x: f64, y: f64) -> f64 {
        -self.params.lambda * self.displacement_divergence(x, y)
            + self.params.alpha * self.pressure(x, y)
    }

    pub fn total_pressure_gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let gd = self.displacement_divergence_gradient(x, y);
        let gp = self.pressure_gradient(x, y);
        [
            -self.params.lambda * gd[0] + self.params.alpha * gp[0],
            -self.params.lambda * gd[1] + self.params.alpha * gp[1],
        ]
    }

    pub fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        [
            (PI * x).sin() * (PI * y).sin(),
            (PI * x).cos() * (2.0 * PI * y).cos(),
        ]
    }

    pub fn velocity_divergence(&self, x: f64, y: f64) -> f64 {
        PI * (PI * x).cos() * (PI * y).sin() - 2.0 * PI * (PI * x).cos() * (2.0 * PI * y).sin()
    }

    fn velocity_divergence_gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let (sx, cx) = (PI * x).sin_cos();
        let (sy, cy) = (PI * y).sin_cos();
        let (s2y, c2y) = (2.0 * PI * y).sin_cos();
        let pp = PI * PI;
        [
            -pp * sx * sy + 2.0 * pp * sx * s2y,
            pp * cx * cy - 4.0 * pp * cx * c2y,
        ]
    }

    /// Scalar curl of the velocity, dv2/dx - dv1/dy.
    pub fn velocity_curl(&self, x: f64, y: f64) -> f64 {
        let sx = (PI * x).sin();
        -PI * sx * ((2.0 * PI * y).cos() + (PI * y).cos())
    }

    fn velocity_curl_gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let (sx, cx) = (PI * x).sin_cos();
        let cy = (PI * y).cos();
        let c2y = (2.0 * PI * y).cos();
        let sy = (PI * y).sin();
        let s2y = (2.0 * PI * y).sin();
        [
            -PI * PI * cx * (c2y + cy),
            PI * sx * (2.0 * PI * s2y + PI * sy),
        ]
    }

    /// Rescaled scalar vorticity sqrt(nu/kappa) curl v.
    pub fn vorticity(&self, x: f64, y: f64) -> f64 {
        self.curl_weight * self.velocity_curl(x, y)
    }

    pub fn vorticity_gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let g = self.velocity_curl_gradient(x, y);
        [self.curl_weight * g[0], self.curl_weight * g[1]]
    }

    /// Body load of the mixture momentum equation,
    /// b = -div(2 mu eps(u) - phi I).
    pub fn body_load(&self, x: f64, y: f64) -> [f64; 2] {
        let h = self.displacement_hessian(x, y);
        let (u1xx, u1xy, u1yy, u2xx, u2xy, u2yy) = (h[0], h[1], h[2], h[3], h[4], h[5]);
        let gphi = self.total_pressure_gradient(x, y);
        let mu = self.params.mu;
        [
            -2.0 * mu * (u1xx + 0.5 * (u1yy + u2xy)) + gphi[0],
            -2.0 * mu * (0.5 * (u2xx + u1xy) + u2yy) + gphi[1],
        ]
    }

    /// Fluid load f = (1/kappa) v + sqrt(nu/kappa) curl omega
    /// - (nu/kappa) grad(div v) + grad p.
    pub fn fluid_load(&self, x: f64, y: f64) -> [f64; 2] {
        let v = self.velocity(x, y);
        let gw = self.vorticity_gradient(x, y);
        let gdv = self.velocity_divergence_gradient(x, y);
        let gp = self.pressure_gradient(x, y);
        let k = self.params.kappa;
        let nu_k = self.params.nu / k;
        let sw = self.curl_weight;
        [
            v[0] / k + sw * gw[1] - nu_k * gdv[0] + gp[0],
            v[1] / k - sw * gw[0] - nu_k * gdv[1] + gp[1],
        ]
    }

    /// Mass source g = -(c0 + alpha^2/lambda) p + (alpha/lambda) phi - div v.
    pub fn mass_source(&self, x: f64, y: f64) -> f64 {
        -self.params.pressure_mass_weight() * self.pressure(x, y)
            + self.params.alpha / self.params.lambda * self.total_pressure(x, y)
            - self.velocity_divergence(x, y)
    }

    /// Total stress times a unit normal, (2 mu eps(u) - phi I) n.
    pub fn stress_normal(&self, x: f64, y: f64, n: [f64; 2]) -> [f64; 2] {
        let g = self.displacement_gradient(x, y);
        let mu = self.params.mu;
        let phi = self.total_pressure(x, y);
        let e11 = g[0][0];
        let e22 = g[1][1];
        let e12 = 0.5 * (g[0][1] + g[1][0]);
        [
            (2.0 * mu * e11 - phi) * n[0] + 2.0 * mu * e12 * n[1],
            2.0 * mu * e12 * n[0] + (2.0 * mu * e22 - phi) * n[1],
        ]
    }

    /// Fluid normal stress (nu/kappa) div v - p.
    pub fn fluid_stress_normal(&self, x: f64, y: f64) -> f64 {
        self.params.nu / self.params.kappa * self.velocity_divergence(x, y)
            - self.pressure(x, y)
    }

    /// Bundle the analytic data for the assembler. `pressure_means` enables
    /// the mean-value multiplier rows (all-Dirichlet runs).
    pub fn problem_data(&self, pressure_means: Option<(f64, f64)>) -> ProblemData<'_> {
        ProblemData {
            body: Box::new(move |x, y| self.body_load(x, y)),
            fluid: Box::new(move |x, y| self.fluid_load(x, y)),
            source: Box::new(move |x, y| self.mass_source(x, y)),
            disp_bc: Box::new(move |x, y| self.displacement(x, y)),
            flux_bc: Box::new(move |x, y| self.velocity(x, y)),
            vort_bc: Box::new(move |x, y| self.vorticity(x, y)),
            stress_normal: Box::new(move |x, y, n| self.stress_normal(x, y, n)),
            fluid_stress_normal: Box::new(move |x, y| self.fluid_stress_normal(x, y)),
            velocity: Box::new(move |x, y| self.velocity(x, y)),
            pressure_means,
        }
    }

    /// Mean values (integrals over the unit square) of the exact total and
    /// fluid pressures, by quadrature on the given mesh.
    pub fn pressure_means(&self, mesh: &Mesh) -> Result<(f64, f64)> {
        let phi = integrate(mesh, &|x, y| self.total_pressure(x, y))?;
        let p = integrate(mesh, &|x, y| self.pressure(x, y))?;
        Ok((phi, p))
    }
}

/// Integral of a scalar field over the meshed domain.
pub fn integrate(mesh: &Mesh, f: &dyn Fn(f64, f64) -> f64) -> Result<f64> {
    let rule = triangle_rule(DATA_QUAD_DEGREE)?;
    let mut total = 0.0;
    for c in 0..mesh.n_cells() {
        let pts = map_rule_points(mesh, c, &rule);
        let scale = 2.0 * mesh.area(c);
        for (p, w) in pts.iter().zip(&rule.weights) {
            total += w * scale * f(p[0], p[1]);
        }
    }
    Ok(total)
}

/// Per-field errors of one solve, the weighted total error, and bookkeeping
/// for the convergence tables.
#[derive(Debug, Clone, Copy)]
pub struct ErrorReport {
    pub h: f64,
    pub dofs: usize,
    /// H1 seminorm of the displacement error.
    pub e1_u: f64,
    /// H(div) norm of the flux error.
    pub ediv_v: f64,
    /// H(curl) norm of the vorticity error (the H1 norm of the scalar field
    /// in 2D).
    pub ecurl_w: f64,
    /// L2 norms of the pressure errors.
    pub e0_phi: f64,
    pub e0_p: f64,
    /// Parameter-weighted total error.
    pub total_weighted: f64,
    pub loss_of_mass: f64,
}

/// Integrate the per-field and weighted errors of a solved state against the
/// exact solution.
pub fn compute_errors(
    fields: &SolutionFields,
    exact: &ExactSolution,
    quad_degree: usize,
    h: f64,
    dofs: usize,
) -> Result<ErrorReport> {
    let mesh = fields.displacement.space.mesh;
    let rule = triangle_rule(quad_degree)?;
    let params = &exact.params;

    let mut e1_u_sq = 0.0;
    let mut e0_v_sq = 0.0;
    let mut ediv_v_sq = 0.0;
    let mut e0_w_sq = 0.0;
    let mut ecurl_w_sq = 0.0;
    let mut e0_phi_sq = 0.0;
    let mut e0_p_sq = 0.0;
    let mut e0_mix_sq = 0.0; // ||(phi - phi_h) + alpha (p - p_h)||^2

    for c in 0..mesh.n_cells() {
        let pts = map_rule_points(mesh, c, &rule);
        let scale = 2.0 * mesh.area(c);
        let (_, ugrads) = fields.displacement.eval_vector_grad_on(c, &pts);
        let (vvals, vdivs) = fields.flux.eval_vector_on(c, &pts);
        let (wvals, wgrads) = fields.vorticity.eval_scalar_on(c, &pts);
        let (phivals, _) = fields.total_pressure.eval_scalar_on(c, &pts);
        let (pvals, _) = fields.pressure.eval_scalar_on(c, &pts);
        for (q, w) in rule.weights.iter().map(|w| w * scale).enumerate() {
            let [x, y] = pts[q];
            let gu = exact.displacement_gradient(x, y);
            for i in 0..2 {
                for j in 0..2 {
                    let d = gu[i][j] - ugrads[q][i][j];
                    e1_u_sq += w * d * d;
                }
            }
            let ve = exact.velocity(x, y);
            let dv = exact.velocity_divergence(x, y) - vdivs[q];
            let d0 = ve[0] - vvals[q][0];
            let d1 = ve[1] - vvals[q][1];
            e0_v_sq += w * (d0 * d0 + d1 * d1);
            ediv_v_sq += w * dv * dv;

            let dw = exact.vorticity(x, y) - wvals[q];
            let gwe = exact.vorticity_gradient(x, y);
            let dgx = gwe[0] - wgrads[q][0];
            let dgy = gwe[1] - wgrads[q][1];
            e0_w_sq += w * dw * dw;
            ecurl_w_sq += w * (dgx * dgx + dgy * dgy);

            let dphi = exact.total_pressure(x, y) - phivals[q];
            let dp = exact.pressure(x, y) - pvals[q];
            e0_phi_sq += w * dphi * dphi;
            e0_p_sq += w * dp * dp;
            let mix = dphi + params.alpha * dp;
            e0_mix_sq += w * mix * mix;
        }
    }

    // Weighted total; the norm-r infimum is replaced by its computable
    // upper bound (kappa/nu + c0), skipped in the non-viscous limit.
    let mut total = 2.0 * params.mu * e1_u_sq
        + e0_v_sq / params.kappa
        + params.nu / params.kappa * ediv_v_sq
        + e0_w_sq
        + params.nu * ecurl_w_sq
        + 0.5 / params.mu * e0_phi_sq
        + e0_mix_sq / params.lambda
        + params.c0 * e0_p_sq;
    if params.nu > 0.0 {
        total += (params.kappa / params.nu + params.c0) * e0_p_sq;
    }

    Ok(ErrorReport {
        h,
        dofs,
        e1_u: e1_u_sq.sqrt(),
        ediv_v: (e0_v_sq + ediv_v_sq).sqrt(),
        ecurl_w: (e0_w_sq + ecurl_w_sq).sqrt(),
        e0_phi: e0_phi_sq.sqrt(),
        e0_p: e0_p_sq.sqrt(),
        total_weighted: total.sqrt(),
        loss_of_mass: f64::NAN,
    })
}

/// Attach the mass-balance residual to a report.
pub fn attach_loss_of_mass(
    report: &mut ErrorReport,
    fields: &SolutionFields,
    exact: &ExactSolution,
    form_quad_degree: usize,
) -> Result<()> {
    report.loss_of_mass = loss_of_mass(
        fields,
        &exact.params,
        &|x, y| exact.mass_source(x, y),
        form_quad_degree,
    )?;
    Ok(())
}

/// Per-field convergence rates between consecutive refinement levels.
#[derive(Debug, Clone, Copy, Default)]
pub struct RateRow {
    pub u: Option<f64>,
    pub v: Option<f64>,
    pub w: Option<f64>,
    pub phi: Option<f64>,
    pub p: Option<f64>,
    pub total: Option<f64>,
}

/// rate = log2(e_coarse / e_fine) for each adjacent pair (h halves between
/// levels). The first level carries no rate; zero errors yield None.
pub fn convergence_rates(reports: &[ErrorReport]) -> Vec<RateRow> {
    let rate = |coarse: f64, fine: f64| -> Option<f64> {
        if coarse > 0.0 && fine > 0.0 {
            Some((coarse / fine).log2())
        } else {
            None
        }
    };
    let mut rows = vec![RateRow::default(); reports.len()];
    for i in 1..reports.len() {
        let (a, b) = (&reports[i - 1], &reports[i]);
        rows[i] = RateRow {
            u: rate(a.e1_u, b.e1_u),
            v: rate(a.ediv_v, b.ediv_v),
            w: rate(a.ecurl_w, b.ecurl_w),
            phi: rate(a.e0_phi, b.e0_phi),
            p: rate(a.e0_p, b.e0_p),
            total: rate(a.total_weighted, b.total_weighted),
        };
    }
    rows
}
