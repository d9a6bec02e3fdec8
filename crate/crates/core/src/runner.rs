//! Study drivers: convergence tables, preconditioner robustness sweeps,
//! single solves and spectrum diagnostics, with CSV reporting.

use crate::assembly::{assemble_system, SpaceSet};
use crate::config::{Mode, RunConfig, SolverKind};
use crate::error::{Error, Result};
use crate::mesh::{build_unit_square_mesh, classify_boundary, BoundarySpec};
use crate::mms::{
    attach_loss_of_mass, compute_errors, convergence_rates, manufactured_case, ErrorReport,
    RateRow, ERROR_QUAD_DEGREE,
};
use crate::params::ParameterSet;
use crate::preconditioner::{build_preconditioner, riesz_norm_matrix, Variant};
use crate::solver::{estimate_spectrum, minres, DirectSolver, SolverReport};
use rayon::prelude::*;
use std::fmt::Write as _;

/// Outcome of one solve at one refinement level.
pub struct LevelOutcome {
    pub level: usize,
    pub n: usize,
    pub dofs: usize,
    pub report: ErrorReport,
    pub iterations: usize,
    pub converged: bool,
    pub minres: Option<SolverReport>,
}

fn nan_report(h: f64) -> ErrorReport {
    ErrorReport {
        h,
        dofs: 0,
        e1_u: f64::NAN,
        ediv_v: f64::NAN,
        ecurl_w: f64::NAN,
        e0_phi: f64::NAN,
        e0_p: f64::NAN,
        total_weighted: f64::NAN,
        loss_of_mass: f64::NAN,
    }
}

/// Solve the manufactured problem at one level with explicit parameters and
/// preconditioner choice; optionally skip the error integration.
pub fn solve_level(
    cfg: &RunConfig,
    level: usize,
    params: &ParameterSet,
    precond: Variant,
    bc: BoundarySpec,
    with_errors: bool,
) -> Result<LevelOutcome> {
    let n = cfg.resolution(level);
    let mut mesh = build_unit_square_mesh(n)?;
    classify_boundary(&mut mesh, bc);
    let exact = manufactured_case(*params)?;
    let mut spaces = SpaceSet::build(&mesh, cfg.k)?;
    let means = match bc {
        BoundarySpec::AllDirichlet => Some(exact.pressure_means(&mesh)?),
        BoundarySpec::Mixed => None,
    };
    let data = exact.problem_data(means);
    let system = assemble_system(&mut spaces, params, &data)?;

    let (x, iterations, converged, minres_report) = match cfg.solver {
        SolverKind::Direct => {
            let solver = DirectSolver::new(&system.matrix, system.n_multipliers, false)?;
            (solver.solve(&system.rhs), 0, true, None)
        }
        SolverKind::Minres => {
            let pc = build_preconditioner(precond, &spaces, params, &system)?;
            let (x, rep) = minres(
                &system.matrix,
                Some(&pc),
                &system.rhs,
                cfg.rel_tol,
                cfg.max_iter,
            )?;
            (x, rep.iterations, rep.converged, Some(rep))
        }
    };

    let fields = system.expand(&spaces, &x);
    let report = if with_errors {
        let mut report = compute_errors(
            &fields,
            &exact,
            ERROR_QUAD_DEGREE,
            mesh.h_max,
            system.reported_dofs,
        )?;
        attach_loss_of_mass(&mut report, &fields, &exact, spaces.form_quad_degree())?;
        report
    } else {
        let mut r = nan_report(mesh.h_max);
        r.dofs = system.reported_dofs;
        r
    };

    Ok(LevelOutcome {
        level,
        n,
        dofs: system.reported_dofs,
        report,
        iterations,
        converged,
        minres: minres_report,
    })
}

/// A full refinement study: rows plus rates between consecutive levels.
pub struct ConvergenceStudy {
    pub k: usize,
    pub nu_zero: bool,
    pub rows: Vec<LevelOutcome>,
    pub rates: Vec<RateRow>,
}

/// Convergence study over `cfg.levels` uniform refinements.
pub fn run_convergence(cfg: &RunConfig) -> Result<ConvergenceStudy> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for level in 1..=cfg.levels {
        match solve_level(cfg, level, &cfg.params, cfg.precond, cfg.bc, true) {
            Ok(outcome) => rows.push(outcome),
            Err(err) => {
                // Record the failure and continue with the next level.
                eprintln!("level {level}: solver failed: {err}");
                rows.push(LevelOutcome {
                    level,
                    n: cfg.resolution(level),
                    dofs: 0,
                    report: nan_report(f64::NAN),
                    iterations: 0,
                    converged: false,
                    minres: None,
                });
            }
        }
    }
    let reports: Vec<ErrorReport> = rows.iter().map(|r| r.report).collect();
    let rates = convergence_rates(&reports);
    Ok(ConvergenceStudy {
        k: cfg.k,
        nu_zero: cfg.params.nu == 0.0,
        rows,
        rates,
    })
}

fn fmt_rate(r: Option<f64>) -> String {
    match r {
        // The first refinement level carries no rate.
        None => "*".to_string(),
        Some(v) => format!("{v:.3}"),
    }
}

impl ConvergenceStudy {
    /// CSV with one row per level; the vorticity columns are omitted in the
    /// non-viscous regime.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.nu_zero {
            out.push_str(
                "level,dofs,h,e1_u,r_u,ediv_v,r_v,e0_phi,r_phi,e0_p,r_p,e_total,r_total,loss_mass,iters,converged\n",
            );
        } else {
            out.push_str(
                "level,dofs,h,e1_u,r_u,ediv_v,r_v,ecurl_w,r_w,e0_phi,r_phi,e0_p,r_p,e_total,r_total,loss_mass,iters,converged\n",
            );
        }
        for (row, rate) in self.rows.iter().zip(&self.rates) {
            let r = &row.report;
            write!(out, "{},{},{:.6e}", row.level, row.dofs, r.h).unwrap();
            write!(out, ",{:.6e},{}", r.e1_u, fmt_rate(rate.u)).unwrap();
            write!(out, ",{:.6e},{}", r.ediv_v, fmt_rate(rate.v)).unwrap();
            if !self.nu_zero {
                write!(out, ",{:.6e},{}", r.ecurl_w, fmt_rate(rate.w)).unwrap();
            }
            write!(out, ",{:.6e},{}", r.e0_phi, fmt_rate(rate.phi)).unwrap();
            write!(out, ",{:.6e},{}", r.e0_p, fmt_rate(rate.p)).unwrap();
            write!(out, ",{:.6e},{}", r.total_weighted, fmt_rate(rate.total)).unwrap();
            writeln!(
                out,
                ",{:.6e},{},{}",
                r.loss_of_mass, row.iterations, row.converged
            )
            .unwrap();
        }
        out
    }
}

/// One cell of the robustness sweep.
#[derive(Debug, Clone)]
pub struct RobustnessRow {
    pub params: ParameterSet,
    pub level: usize,
    pub dofs: usize,
    pub precond: Variant,
    pub iters: usize,
    pub converged: bool,
}

pub struct RobustnessTable {
    pub rows: Vec<RobustnessRow>,
}

/// MINRES iteration counts over the parameter grid x levels x the three
/// preconditioner variants, with mixed boundary conditions (the multiplier
/// rows are outside the preconditioner derivation). Cells run concurrently;
/// output order is deterministic.
pub fn run_robustness(cfg: &RunConfig) -> Result<RobustnessTable> {
    cfg.validate()?;
    let mut combos = Vec::new();
    for &lambda in &cfg.lambda_list {
        for &nu in &cfg.nu_list {
            for &kappa in &cfg.kappa_list {
                for &c0 in &cfg.c0_list {
                    let mut p = cfg.params;
                    p.lambda = lambda;
                    p.nu = nu;
                    p.kappa = kappa;
                    p.c0 = c0;
                    combos.push(p);
                }
            }
        }
    }

    let variants = [Variant::B1, Variant::B2, Variant::B3];
    let results: Vec<Vec<RobustnessRow>> = combos
        .par_iter()
        .map(|params| {
            let mut rows = Vec::new();
            for level in 1..=cfg.levels {
                let n = cfg.resolution(level);
                let mut mesh = match build_unit_square_mesh(n) {
                    Ok(m) => m,
                    Err(err) => {
                        eprintln!("robustness mesh: {err}");
                        continue;
                    }
                };
                classify_boundary(&mut mesh, BoundarySpec::Mixed);
                let exact = match manufactured_case(*params) {
                    Ok(e) => e,
                    Err(err) => {
                        eprintln!("robustness case: {err}");
                        continue;
                    }
                };
                let mut spaces = match SpaceSet::build(&mesh, cfg.k) {
                    Ok(s) => s,
                    Err(err) => {
                        eprintln!("robustness spaces: {err}");
                        continue;
                    }
                };
                let data = exact.problem_data(None);
                let system = match assemble_system(&mut spaces, params, &data) {
                    Ok(s) => s,
                    Err(err) => {
                        eprintln!("robustness assembly: {err}");
                        continue;
                    }
                };
                for variant in variants {
                    let cell = (|| -> Result<(usize, bool)> {
                        let pc = build_preconditioner(variant, &spaces, params, &system)?;
                        let (_, rep) = minres(
                            &system.matrix,
                            Some(&pc),
                            &system.rhs,
                            cfg.rel_tol,
                            cfg.max_iter,
                        )?;
                        Ok((rep.iterations, rep.converged))
                    })();
                    let (iters, converged) = match cell {
                        Ok(v) => v,
                        Err(err) => {
                            eprintln!(
                                "robustness {} level {level} {:?}: {err}",
                                variant.name(),
                                params
                            );
                            (0, false)
                        }
                    };
                    rows.push(RobustnessRow {
                        params: *params,
                        level,
                        dofs: system.reported_dofs,
                        precond: variant,
                        iters,
                        converged,
                    });
                }
            }
            rows
        })
        .collect();

    let mut rows: Vec<RobustnessRow> = results.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        let ka = (
            a.params.lambda.to_bits(),
            a.params.nu.to_bits(),
            a.params.kappa.to_bits(),
            a.params.c0.to_bits(),
            a.level,
            a.precond.name(),
        );
        let kb = (
            b.params.lambda.to_bits(),
            b.params.nu.to_bits(),
            b.params.kappa.to_bits(),
            b.params.c0.to_bits(),
            b.level,
            b.precond.name(),
        );
        ka.cmp(&kb)
    });
    Ok(RobustnessTable { rows })
}

impl RobustnessTable {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("mu,lambda,nu,kappa,c0,alpha,level,dofs,precond,iters,converged\n");
        for r in &self.rows {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{},{},{},{},{}",
                r.params.mu,
                r.params.lambda,
                r.params.nu,
                r.params.kappa,
                r.params.c0,
                r.params.alpha,
                r.level,
                r.dofs,
                r.precond.name(),
                r.iters,
                r.converged
            )
            .unwrap();
        }
        out
    }
}

/// Extremal generalized eigenvalues of (A, B-norm) for one parameter set.
#[derive(Debug, Clone)]
pub struct SpectrumRow {
    pub params: ParameterSet,
    pub n: usize,
    pub dofs: usize,
    pub min_abs: f64,
    pub max_abs: f64,
}

pub struct SpectrumTable {
    pub rows: Vec<SpectrumRow>,
}

/// Generalized eigenvalue diagnostic over the parameter grid on one coarse
/// mesh (resolution taken from `cfg.levels`), mixed boundary conditions.
pub fn run_spectrum(cfg: &RunConfig) -> Result<SpectrumTable> {
    cfg.validate()?;
    let n = cfg.resolution(cfg.levels);
    let mut rows = Vec::new();
    for &lambda in &cfg.lambda_list {
        for &nu in &cfg.nu_list {
            for &kappa in &cfg.kappa_list {
                for &c0 in &cfg.c0_list {
                    let mut params = cfg.params;
                    params.lambda = lambda;
                    params.nu = nu;
                    params.kappa = kappa;
                    params.c0 = c0;
                    let mut mesh = build_unit_square_mesh(n)?;
                    classify_boundary(&mut mesh, BoundarySpec::Mixed);
                    let exact = manufactured_case(params)?;
                    let mut spaces = SpaceSet::build(&mesh, cfg.k)?;
                    let data = exact.problem_data(None);
                    let system = assemble_system(&mut spaces, &params, &data)?;
                    let norm = riesz_norm_matrix(cfg.precond, &spaces, &params, &system)?;
                    let spec = estimate_spectrum(&system.matrix, &norm)?;
                    rows.push(SpectrumRow {
                        params,
                        n,
                        dofs: system.n_reduced(),
                        min_abs: spec.min_abs,
                        max_abs: spec.max_abs,
                    });
                }
            }
        }
    }
    Ok(SpectrumTable { rows })
}

impl SpectrumTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mu,lambda,nu,kappa,c0,alpha,n,dofs,min_eig_abs,max_eig_abs\n");
        for r in &self.rows {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{},{},{:.6e},{:.6e}",
                r.params.mu,
                r.params.lambda,
                r.params.nu,
                r.params.kappa,
                r.params.c0,
                r.params.alpha,
                r.n,
                r.dofs,
                r.min_abs,
                r.max_abs
            )
            .unwrap();
        }
        out
    }
}

/// One solve at the resolution given by `cfg.levels`, reported as a
/// single-row convergence CSV; optionally exports the assembled system.
pub fn run_single(cfg: &RunConfig) -> Result<ConvergenceStudy> {
    cfg.validate()?;
    if let Some(stem) = &cfg.export_system {
        let n = cfg.resolution(cfg.levels);
        let mut mesh = build_unit_square_mesh(n)?;
        classify_boundary(&mut mesh, cfg.bc);
        let exact = manufactured_case(cfg.params)?;
        let mut spaces = SpaceSet::build(&mesh, cfg.k)?;
        let means = match cfg.bc {
            BoundarySpec::AllDirichlet => Some(exact.pressure_means(&mesh)?),
            BoundarySpec::Mixed => None,
        };
        let data = exact.problem_data(means);
        let system = assemble_system(&mut spaces, &cfg.params, &data)?;
        let matrix_path = stem.with_extension("mtx");
        let rhs_path = stem.with_extension("rhs.txt");
        system.export(&matrix_path, &rhs_path)?;
    }
    let row = solve_level(cfg, cfg.levels, &cfg.params, cfg.precond, cfg.bc, true)?;
    let reports = vec![row.report];
    Ok(ConvergenceStudy {
        k: cfg.k,
        nu_zero: cfg.params.nu == 0.0,
        rates: convergence_rates(&reports),
        rows: vec![row],
    })
}

/// Dispatch on the configured mode and return the CSV text.
pub fn run(cfg: &RunConfig) -> Result<String> {
    match cfg.mode {
        Mode::Convergence => Ok(run_convergence(cfg)?.to_csv()),
        Mode::Robustness => Ok(run_robustness(cfg)?.to_csv()),
        Mode::SingleSolve => Ok(run_single(cfg)?.to_csv()),
        Mode::Spectrum => Ok(run_spectrum(cfg)?.to_csv()),
    }
}

/// Write the CSV to `cfg.out` or return it for stdout printing.
pub fn run_to_output(cfg: &RunConfig) -> Result<Option<String>> {
    let csv = run(cfg)?;
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, csv).map_err(Error::Io)?;
            Ok(None)
        }
        None => Ok(Some(csv)),
    }
}
