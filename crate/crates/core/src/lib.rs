//! Mixed finite element solver for the steady Biot-Brinkman equations in
//! vorticity form on the unit square.
//!
//! The five unknown fields are the solid displacement, the filtration flux,
//! the (rescaled, scalar in 2D) filtration vorticity, the total pressure and
//! the fluid pressure. They are discretized with a generalized Taylor-Hood
//! pair for displacement / total pressure, Raviart-Thomas elements for the
//! flux, continuous Lagrange elements for the vorticity, and discontinuous
//! polynomials for both pressures. The resulting symmetric indefinite block
//! system is solved either with a sparse direct factorization or with MINRES
//! accelerated by one of three parameter-weighted block-diagonal
//! preconditioners.
//!
//! The crate ships a verification harness: manufactured solutions with
//! analytic forcing terms, per-field error norms and convergence rates,
//! a mass-conservation residual, a preconditioner robustness sweep and a
//! generalized eigenvalue diagnostic. See the `examples/` directory for
//! runnable entry points to each capability, or the `biot-brinkman` binary
//! for the batch CLI.

pub mod assembly;
pub mod config;
pub mod error;
pub mod fe;
pub mod mesh;
pub mod mms;
pub mod params;
pub mod preconditioner;
pub mod quadrature;
pub mod runner;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use params::ParameterSet;
