//! Run configuration: plain `key=value` files plus programmatic defaults.

use crate::error::{Error, Result};
use crate::mesh::BoundarySpec;
use crate::params::ParameterSet;
use crate::preconditioner::Variant;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Convergence,
    Robustness,
    SingleSolve,
    Spectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Direct,
    Minres,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub k: usize,
    pub levels: usize,
    pub params: ParameterSet,
    pub bc: BoundarySpec,
    pub solver: SolverKind,
    pub precond: Variant,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub out: Option<PathBuf>,
    /// Parameter sweep lists for robustness and spectrum runs.
    pub lambda_list: Vec<f64>,
    pub nu_list: Vec<f64>,
    pub kappa_list: Vec<f64>,
    pub c0_list: Vec<f64>,
    /// `solve` mode: write matrix/rhs next to this path stem.
    pub export_system: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Convergence,
            k: 0,
            levels: 4,
            params: ParameterSet::default(),
            bc: BoundarySpec::AllDirichlet,
            solver: SolverKind::Direct,
            precond: Variant::B3,
            rel_tol: 1e-6,
            max_iter: 500,
            out: None,
            lambda_list: vec![1.0, 1e8],
            nu_list: vec![1e-8, 1.0],
            kappa_list: vec![1e-8, 1.0],
            c0_list: vec![1e-8, 1.0],
            export_system: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k > 1 {
            return Err(Error::InvalidInput(format!(
                "unsupported degree k={} (only 0 and 1)",
                self.k
            )));
        }
        if self.levels < 1 {
            return Err(Error::InvalidInput("levels must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidInput("rel_tol must be positive".into()));
        }
        self.params.validate()
    }

    /// Mesh resolution for a 1-based refinement level. Convergence and
    /// single-solve studies follow the accuracy tables and start at n = 2;
    /// robustness and spectrum sweeps start from the two-triangle mesh
    /// (n = 1).
    pub fn resolution(&self, level: usize) -> usize {
        match self.mode {
            Mode::Convergence | Mode::SingleSolve => 2 << (level - 1),
            Mode::Robustness | Mode::Spectrum => 1 << (level - 1),
        }
    }
}

fn parse_f64(key: &str, value: &str, line: usize) -> Result<f64> {
    value.parse::<f64>().map_err(|_| Error::Config {
        line,
        msg: format!("key '{key}': expected a number, got '{value}'"),
    })
}

fn parse_list(key: &str, value: &str, line: usize) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|t| parse_f64(key, t.trim(), line))
        .collect()
}

/// Parse a `key=value` configuration text ('#' starts a comment, blank lines
/// ignored, unknown keys rejected). Later keys override earlier ones.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config {
                line,
                msg: format!("expected key=value, got '{content}'"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "mode" => {
                cfg.mode = match value {
                    "convergence" => Mode::Convergence,
                    "robustness" => Mode::Robustness,
                    "solve" | "single_solve" => Mode::SingleSolve,
                    "spectrum" => Mode::Spectrum,
                    other => {
                        return Err(Error::Config {
                            line,
                            msg: format!("unknown mode '{other}'"),
                        })
                    }
                }
            }
            "k" => {
                let k = value.parse::<usize>().map_err(|_| Error::Config {
                    line,
                    msg: format!("key 'k': expected an integer, got '{value}'"),
                })?;
                if k > 1 {
                    return Err(Error::Config {
                        line,
                        msg: format!("unsupported degree k={k} (only 0 and 1)"),
                    });
                }
                cfg.k = k;
            }
            "levels" => {
                cfg.levels = value.parse::<usize>().map_err(|_| Error::Config {
                    line,
                    msg: format!("key 'levels': expected an integer, got '{value}'"),
                })?;
            }
            "mu" => cfg.params.mu = parse_f64(key, value, line)?,
            "lambda" => cfg.params.lambda = parse_f64(key, value, line)?,
            "nu" => cfg.params.nu = parse_f64(key, value, line)?,
            "kappa" => cfg.params.kappa = parse_f64(key, value, line)?,
            "c0" => cfg.params.c0 = parse_f64(key, value, line)?,
            "alpha" => cfg.params.alpha = parse_f64(key, value, line)?,
            "bc" => {
                cfg.bc = match value {
                    "all_dirichlet" => BoundarySpec::AllDirichlet,
                    "mixed" => BoundarySpec::Mixed,
                    other => {
                        return Err(Error::Config {
                            line,
                            msg: format!("unknown bc '{other}'"),
                        })
                    }
                }
            }
            "solver" => {
                cfg.solver = match value {
                    "direct" => SolverKind::Direct,
                    "minres" => SolverKind::Minres,
                    other => {
                        return Err(Error::Config {
                            line,
                            msg: format!("unknown solver '{other}'"),
                        })
                    }
                }
            }
            "precond" => {
                cfg.precond = Variant::parse(value).map_err(|e| Error::Config {
                    line,
                    msg: e.to_string(),
                })?;
            }
            "rel_tol" => cfg.rel_tol = parse_f64(key, value, line)?,
            "max_iter" => {
                cfg.max_iter = value.parse::<usize>().map_err(|_| Error::Config {
                    line,
                    msg: format!("key 'max_iter': expected an integer, got '{value}'"),
                })?;
            }
            "out" => cfg.out = Some(PathBuf::from(value)),
            "lambda_list" => cfg.lambda_list = parse_list(key, value, line)?,
            "nu_list" => cfg.nu_list = parse_list(key, value, line)?,
            "kappa_list" => cfg.kappa_list = parse_list(key, value, line)?,
            "c0_list" => cfg.c0_list = parse_list(key, value, line)?,
            "export_system" => cfg.export_system = Some(PathBuf::from(value)),
            other => {
                return Err(Error::Config {
                    line,
                    msg: format!("unknown key '{other}'"),
                });
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.k, 0);
        assert_eq!(cfg.levels, 4);
        assert_eq!(cfg.params, ParameterSet::default());
        assert_eq!(cfg.solver, SolverKind::Direct);
        assert_eq!(cfg.rel_tol, 1e-6);
        assert_eq!(cfg.max_iter, 500);
    }

    #[test]
    fn parses_values_and_comments() {
        let cfg = parse_config("# comment\nlambda=1e8\nk = 1 # inline\nprecond=b2\n").unwrap();
        assert_eq!(cfg.params.lambda, 1e8);
        assert_eq!(cfg.k, 1);
        assert_eq!(cfg.precond, Variant::B2);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_degree() {
        match parse_config("speed=11\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected config error, got {other:?}"),
        }
        match parse_config("\nk=3\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_sweep_lists() {
        let cfg = parse_config("nu_list = 1e-6, 0.5, 1\n").unwrap();
        assert_eq!(cfg.nu_list, vec![1e-6, 0.5, 1.0]);
    }

    #[test]
    fn resolution_per_mode() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.resolution(1), 2);
        assert_eq!(cfg.resolution(3), 8);
        cfg.mode = Mode::Robustness;
        assert_eq!(cfg.resolution(1), 1);
        assert_eq!(cfg.resolution(5), 16);
    }
}
