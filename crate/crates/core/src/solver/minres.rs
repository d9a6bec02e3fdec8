//! Preconditioned MINRES for symmetric (indefinite) systems.

use crate::error::{Error, Result};
use crate::sparse::{axpy, dot, norm2, SparseMatrix};

/// A symmetric linear operator applied to vectors.
pub trait LinOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinOp for SparseMatrix {
    fn dim(&self) -> usize {
        self.n_rows
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Euclidean norm of the unpreconditioned residual reduced by `rel_tol`.
    Converged,
    /// Iteration cap reached first.
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub iterations: usize,
    /// Residual norms in the preconditioner-induced norm, one entry per
    /// iteration including the initial residual; non-increasing.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Final true relative residual in the Euclidean norm.
    pub relative_residual: f64,
}

/// Solve `A x = rhs` with MINRES, preconditioned by the symmetric positive
/// definite operator `precond` (identity when `None`).
///
/// The stopping test uses the Euclidean norm of the unpreconditioned
/// residual, recomputed from `x` every iteration; the Lanczos recurrence
/// itself runs in the preconditioner inner product.
pub fn minres(
    a: &dyn LinOp,
    precond: Option<&dyn LinOp>,
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolverReport)> {
    let n = a.dim();
    if rhs.len() != n {
        return Err(Error::InvalidInput(format!(
            "minres: rhs length {} does not match operator dimension {n}",
            rhs.len()
        )));
    }
    let apply_b = |v: &[f64], out: &mut [f64]| match precond {
        Some(b) => b.apply(v, out),
        None => out.copy_from_slice(v),
    };

    let mut x = vec![0.0; n];
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Ok((
            x,
            SolverReport {
                iterations: 0,
                residual_history: vec![0.0],
                converged: true,
                stop_reason: StopReason::Converged,
                relative_residual: 0.0,
            },
        ));
    }

    let mut v_prev = vec![0.0; n];
    let mut v = rhs.to_vec();
    let mut z = vec![0.0; n];
    apply_b(&v, &mut z);
    let gamma_sq = dot(&z, &v);
    if !(gamma_sq > 0.0) {
        return Err(Error::Breakdown(format!(
            "preconditioner is not positive definite: <Br, r> = {gamma_sq:.3e}"
        )));
    }
    let mut gamma = gamma_sq.sqrt();
    let mut gamma_prev = 1.0;
    let mut eta = gamma;
    let (mut s_prev, mut s) = (0.0f64, 0.0f64);
    let (mut c_prev, mut c) = (1.0f64, 1.0f64);
    let mut w_prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut history = vec![gamma];

    let mut work = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut relative_residual = 1.0;

    for _ in 0..max_iter {
        iterations += 1;
        // Normalized Lanczos vector in the preconditioned inner product.
        for zi in z.iter_mut() {
            *zi /= gamma;
        }
        a.apply(&z, &mut work);
        let delta = dot(&work, &z);
        let mut v_next = work.clone();
        axpy(-delta / gamma, &v, &mut v_next);
        axpy(-gamma / gamma_prev, &v_prev, &mut v_next);
        let mut z_next = vec![0.0; n];
        apply_b(&v_next, &mut z_next);
        let gn_sq = dot(&z_next, &v_next);
        if gn_sq.is_nan() || gn_sq.is_infinite() {
            return Err(Error::Breakdown("NaN/Inf in Lanczos recurrence".into()));
        }
        let gamma_next = gn_sq.max(0.0).sqrt();

        let alpha0 = c * delta - c_prev * s * gamma;
        let alpha1 = (alpha0 * alpha0 + gamma_next * gamma_next).sqrt();
        let alpha2 = s * delta + c_prev * c * gamma;
        let alpha3 = s_prev * gamma;
        if alpha1 == 0.0 || !alpha1.is_finite() {
            return Err(Error::Breakdown("zero Givens denominator".into()));
        }
        let c_next = alpha0 / alpha1;
        let s_next = gamma_next / alpha1;

        let mut w_next = z.clone();
        axpy(-alpha3, &w_prev, &mut w_next);
        axpy(-alpha2, &w, &mut w_next);
        for wi in w_next.iter_mut() {
            *wi /= alpha1;
        }
        axpy(c_next * eta, &w_next, &mut x);
        eta = -s_next * eta;
        history.push(eta.abs());
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Breakdown("NaN/Inf in solution update".into()));
        }

        // True residual for the stopping test.
        a.apply(&x, &mut work);
        let mut res_sq = 0.0;
        for i in 0..n {
            let r = rhs[i] - work[i];
            res_sq += r * r;
        }
        relative_residual = res_sq.sqrt() / rhs_norm;
        if relative_residual <= rel_tol {
            converged = true;
            break;
        }
        if gamma_next < f64::EPSILON * rhs_norm.max(1.0) {
            // Krylov space exhausted; the residual test above has the last
            // word on convergence.
            break;
        }

        std::mem::swap(&mut v_prev, &mut v);
        std::mem::swap(&mut v, &mut v_next);
        z = z_next;
        gamma_prev = gamma;
        gamma = gamma_next;
        c_prev = c;
        c = c_next;
        s_prev = s;
        s = s_next;
        std::mem::swap(&mut w_prev, &mut w);
        std::mem::swap(&mut w, &mut w_next);
    }

    let stop_reason = if converged {
        StopReason::Converged
    } else {
        StopReason::IterationLimit
    };
    Ok((
        x,
        SolverReport {
            iterations,
            residual_history: history,
            converged,
            stop_reason,
            relative_residual,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;

    #[test]
    fn identity_converges_in_one_iteration() {
        let a = SparseMatrix::identity(5);
        let rhs = vec![1.0, -2.0, 3.0, 0.5, 4.0];
        let (x, report) = minres(&a, None, &rhs, 1e-10, 100).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 1);
        for (xi, bi) in x.iter().zip(&rhs) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_diagonal_terminates_at_dimension() {
        let a = SparseMatrix::from_triplets(
            4,
            4,
            &[(0, 0, 1.0), (1, 1, -1.0), (2, 2, 2.0), (3, 3, -2.0)],
        );
        let rhs = vec![1.0; 4];
        let (x, report) = minres(&a, None, &rhs, 1e-8, 50).unwrap();
        assert!(report.converged);
        assert!(report.iterations <= 4, "iters {}", report.iterations);
        let expect = [1.0, -1.0, 0.5, -0.5];
        for (xi, ei) in x.iter().zip(&expect) {
            assert!((xi - ei).abs() < 1e-8);
        }
    }

    #[test]
    fn history_is_monotone() {
        // Random-ish symmetric indefinite matrix.
        let mut entries = Vec::new();
        let n = 30;
        for i in 0..n {
            entries.push((i, i, if i % 2 == 0 { 2.0 + i as f64 } else { -1.5 - i as f64 }));
            if i + 1 < n {
                entries.push((i, i + 1, 0.7));
                entries.push((i + 1, i, 0.7));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &entries);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let (_, report) = minres(&a, None, &rhs, 1e-12, 200).unwrap();
        assert!(report.converged);
        for pair in report.residual_history.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "history must not increase");
        }
    }

    #[test]
    fn jacobi_preconditioner_helps() {
        let n = 40;
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i, i, (i + 1) as f64));
        }
        let a = SparseMatrix::from_triplets(n, n, &entries);
        let mut inv_entries = Vec::new();
        for i in 0..n {
            inv_entries.push((i, i, 1.0 / (i + 1) as f64));
        }
        let b = SparseMatrix::from_triplets(n, n, &inv_entries);
        let rhs = vec![1.0; n];
        let (x, report) = minres(&a, Some(&b), &rhs, 1e-12, 10).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 1);
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - 1.0 / (i + 1) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_short_circuits() {
        let a = SparseMatrix::identity(3);
        let (x, report) = minres(&a, None, &[0.0; 3], 1e-6, 10).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 0);
        assert_eq!(x, vec![0.0; 3]);
    }
}
