//! Sparse symmetric linear algebra: direct LDL^T factorization, MINRES and
//! a dense generalized-eigenvalue diagnostic.

mod eigen;
mod ldl;
mod minres;

pub use eigen::{estimate_spectrum, SpectrumReport, DENSE_EIGEN_CAP};
pub use ldl::{factorize, DirectSolver, Factorization};
pub(crate) use ldl::factorize_named;
pub use minres::{minres, LinOp, SolverReport, StopReason};
