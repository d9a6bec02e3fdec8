//! Sparse LDL^T factorization without pivoting.
//!
//! The factorization is the classic up-looking algorithm driven by the
//! elimination tree, applied to the matrix permuted by reverse Cuthill-McKee.
//! No pivoting is performed: the assembled Biot-Brinkman systems are
//! symmetric quasi-definite after boundary reduction (positive diagonal
//! blocks for displacement and flux, negative ones for vorticity and the
//! pressures), so every leading Schur complement stays definite and the
//! pivots cannot vanish. Dense mean-value multiplier rows would destroy both
//! sparsity and quasi-definiteness, so [`DirectSolver`] keeps them out of
//! the factorization and eliminates them with a small Schur complement.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// LDL^T factors of a permuted symmetric matrix.
#[derive(Debug, Clone)]
pub struct Factorization {
    n: usize,
    /// perm[new] = old index.
    perm: Vec<usize>,
    /// Columns of L (unit diagonal omitted), CSC.
    l_colptr: Vec<usize>,
    l_rows: Vec<usize>,
    l_vals: Vec<f64>,
    d: Vec<f64>,
}

/// Upper triangle of P A P^T in compressed sparse column form.
struct PermutedUpper {
    colptr: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<f64>,
}

fn permuted_upper(a: &SparseMatrix, iperm: &[usize]) -> PermutedUpper {
    let n = a.n_rows;
    let mut counts = vec![0usize; n + 1];
    for r in 0..n {
        let (cols, _) = a.row(r);
        for &c in cols {
            if r <= c {
                let (pr, pc) = (iperm[r], iperm[c]);
                counts[pr.max(pc) + 1] += 1;
            }
        }
    }
    for k in 0..n {
        counts[k + 1] += counts[k];
    }
    let nnz = counts[n];
    let mut next = counts.clone();
    let mut rows = vec![0usize; nnz];
    let mut vals = vec![0.0; nnz];
    for r in 0..n {
        let (cols, values) = a.row(r);
        for (&c, &v) in cols.iter().zip(values) {
            if r <= c {
                let (pr, pc) = (iperm[r], iperm[c]);
                let (lo, hi) = (pr.min(pc), pr.max(pc));
                let k = next[hi];
                rows[k] = lo;
                vals[k] = v;
                next[hi] += 1;
            }
        }
    }
    // Sort rows within each column.
    for k in 0..n {
        let lo = counts[k];
        let hi = counts[k + 1];
        let mut pairs: Vec<(usize, f64)> =
            rows[lo..hi].iter().copied().zip(vals[lo..hi].iter().copied()).collect();
        pairs.sort_unstable_by_key(|p| p.0);
        for (idx, (r, v)) in pairs.into_iter().enumerate() {
            rows[lo + idx] = r;
            vals[lo + idx] = v;
        }
    }
    PermutedUpper {
        colptr: counts,
        rows,
        vals,
    }
}

/// Adjacency lists of the symmetric sparsity pattern, diagonal excluded.
fn adjacency(a: &SparseMatrix) -> Vec<Vec<usize>> {
    let n = a.n_rows;
    let mut adj = vec![Vec::new(); n];
    for r in 0..n {
        let (cols, _) = a.row(r);
        for &c in cols {
            if c != r {
                adj[r].push(c);
            }
        }
    }
    adj
}

/// Reverse Cuthill-McKee ordering; returns perm with perm[new] = old.
fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level_buf = Vec::new();

    let bfs_levels = |start: usize, visited: &[bool], out: &mut Vec<Vec<usize>>| {
        out.clear();
        let mut seen = visited.to_vec();
        seen[start] = true;
        let mut current = vec![start];
        while !current.is_empty() {
            let mut next = Vec::new();
            for &u in &current {
                for &w in &adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        next.push(w);
                    }
                }
            }
            out.push(std::mem::replace(&mut current, next));
        }
    };

    while order.len() < n {
        // Min-degree unvisited node, then sharpen to a pseudo-peripheral one.
        let mut start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .unwrap();
        let mut levels: Vec<Vec<usize>> = Vec::new();
        let mut ecc = 0usize;
        loop {
            bfs_levels(start, &visited, &mut levels);
            if levels.len() <= ecc + 1 {
                break;
            }
            ecc = levels.len() - 1;
            let last = levels.last().unwrap();
            start = *last.iter().min_by_key(|&&i| degree[i]).unwrap();
        }

        // Cuthill-McKee traversal from the chosen start.
        level_buf.clear();
        level_buf.push(start);
        visited[start] = true;
        let mut head = 0;
        let base = order.len();
        order.push(start);
        while head < order.len() - base {
            let u = order[base + head];
            head += 1;
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_unstable_by_key(|&w| (degree[w], w));
            for w in nbrs {
                if !visited[w] {
                    visited[w] = true;
                    order.push(w);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Factor a sparse symmetric matrix. With `spd_hint` any nonpositive pivot
/// is reported as an error, which doubles as a positive-definiteness test.
pub fn factorize(a: &SparseMatrix, spd_hint: bool) -> Result<Factorization> {
    factorize_named(a, spd_hint, "matrix")
}

pub(crate) fn factorize_named(
    a: &SparseMatrix,
    spd_hint: bool,
    name: &str,
) -> Result<Factorization> {
    if a.n_rows != a.n_cols {
        return Err(Error::InvalidInput(format!(
            "{name}: expected a square matrix, got {}x{}",
            a.n_rows, a.n_cols
        )));
    }
    let n = a.n_rows;
    let scale = a.max_abs();
    if n > 0 && a.max_asymmetry() > 1e-10 * scale.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "{name}: matrix is not symmetric"
        )));
    }

    let adj = adjacency(a);
    let perm = reverse_cuthill_mckee(&adj);
    let mut iperm = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        iperm[old] = new;
    }
    let upper = permuted_upper(a, &iperm);

    // Symbolic: elimination tree and column counts.
    let mut parent = vec![usize::MAX; n];
    let mut flag = vec![usize::MAX; n];
    let mut l_nz = vec![0usize; n];
    for k in 0..n {
        flag[k] = k;
        for p in upper.colptr[k]..upper.colptr[k + 1] {
            let mut i = upper.rows[p];
            while i < k && flag[i] != k {
                if parent[i] == usize::MAX {
                    parent[i] = k;
                }
                l_nz[i] += 1;
                flag[i] = k;
                i = parent[i];
                if i == usize::MAX {
                    break;
                }
            }
        }
    }
    let mut l_colptr = vec![0usize; n + 1];
    for k in 0..n {
        l_colptr[k + 1] = l_colptr[k] + l_nz[k];
    }
    let nnz_l = l_colptr[n];
    let mut l_rows = vec![0usize; nnz_l];
    let mut l_vals = vec![0.0f64; nnz_l];
    let mut l_next = l_colptr.clone();
    let mut d = vec![0.0f64; n];

    // Numeric: up-looking factorization with a sparse triangular solve per
    // row, visiting the pattern in topological order.
    let mut y = vec![0.0f64; n];
    let mut pattern = vec![0usize; n];
    for f in flag.iter_mut() {
        *f = usize::MAX;
    }
    for k in 0..n {
        let mut top = n;
        flag[k] = k;
        d[k] = 0.0;
        for p in upper.colptr[k]..upper.colptr[k + 1] {
            let i0 = upper.rows[p];
            let v = upper.vals[p];
            if i0 == k {
                d[k] += v;
                continue;
            }
            y[i0] += v;
            let mut len = 0usize;
            let mut i = i0;
            while flag[i] != k {
                pattern[len] = i;
                len += 1;
                flag[i] = k;
                i = parent[i];
            }
            // Prepend this path so the final order is topological.
            for l in (0..len).rev() {
                top -= 1;
                pattern[top] = pattern[l];
            }
        }
        for &i in &pattern[top..n] {
            let yi = y[i];
            y[i] = 0.0;
            let l_ki = yi / d[i];
            for p in l_colptr[i]..l_next[i] {
                y[l_rows[p]] -= l_vals[p] * yi;
            }
            d[k] -= l_ki * yi;
            l_rows[l_next[i]] = k;
            l_vals[l_next[i]] = l_ki;
            l_next[i] += 1;
        }
        let dk = d[k];
        if dk == 0.0 || !dk.is_finite() || dk.abs() < 1e-250 {
            return Err(Error::Singular { index: perm[k] });
        }
        if spd_hint && dk <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                block: name.to_string(),
                index: perm[k],
                pivot: dk,
            });
        }
    }

    Ok(Factorization {
        n,
        perm,
        l_colptr,
        l_rows,
        l_vals,
        d,
    })
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// All pivots positive, i.e. the factored matrix is positive definite.
    pub fn is_positive_definite(&self) -> bool {
        self.d.iter().all(|&d| d > 0.0)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        x
    }

    pub fn solve_into(&self, b: &[f64], out: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..self.n {
            let xk = x[k];
            if xk != 0.0 {
                for p in self.l_colptr[k]..self.l_colptr[k + 1] {
                    x[self.l_rows[p]] -= self.l_vals[p] * xk;
                }
            }
        }
        for k in 0..self.n {
            x[k] /= self.d[k];
        }
        for k in (0..self.n).rev() {
            let mut acc = x[k];
            for p in self.l_colptr[k]..self.l_colptr[k + 1] {
                acc -= self.l_vals[p] * x[self.l_rows[p]];
            }
            x[k] = acc;
        }
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
    }
}

/// Direct solver for a symmetric system whose last `n_border` rows/columns
/// are dense coupling rows (mean-value multipliers). The leading block is
/// factored sparsely and the border is eliminated with a dense Schur
/// complement.
pub struct DirectSolver {
    base: Factorization,
    border: Option<Border>,
}

struct Border {
    /// Columns of the border block M (leading-block rows only).
    cols: Vec<Vec<f64>>,
    /// A^{-1} M.
    z: Vec<Vec<f64>>,
    schur: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    k: usize,
}

impl DirectSolver {
    pub fn new(a: &SparseMatrix, n_border: usize, spd_hint: bool) -> Result<Self> {
        Self::new_named(a, n_border, spd_hint, "system")
    }

    pub(crate) fn new_named(
        a: &SparseMatrix,
        n_border: usize,
        spd_hint: bool,
        name: &str,
    ) -> Result<Self> {
        if a.n_rows != a.n_cols {
            return Err(Error::InvalidInput(format!(
                "{name}: expected a square matrix"
            )));
        }
        let n = a.n_rows;
        if n_border > n {
            return Err(Error::InvalidInput(format!(
                "{name}: border larger than the matrix"
            )));
        }
        let m = n - n_border;
        if n_border == 0 {
            return Ok(Self {
                base: factorize_named(a, spd_hint, name)?,
                border: None,
            });
        }
        let lead = a.diagonal_block(0..m);
        let base = factorize_named(&lead, spd_hint, name)?;
        let mut cols = vec![vec![0.0; m]; n_border];
        let mut corner = nalgebra::DMatrix::zeros(n_border, n_border);
        for r in 0..n {
            let (row_cols, vals) = a.row(r);
            for (&c, &v) in row_cols.iter().zip(vals) {
                if r < m && c >= m {
                    cols[c - m][r] = v;
                } else if r >= m && c >= m {
                    corner[(r - m, c - m)] = v;
                }
            }
        }
        let z: Vec<Vec<f64>> = cols.iter().map(|col| base.solve(col)).collect();
        let mut schur = corner;
        for (j, zj) in z.iter().enumerate() {
            for (i, mi) in cols.iter().enumerate() {
                let dot: f64 = mi.iter().zip(zj).map(|(a, b)| a * b).sum();
                schur[(i, j)] -= dot;
            }
        }
        let schur = schur.lu();
        if schur.determinant().abs() < 1e-300 {
            return Err(Error::Singular { index: m });
        }
        Ok(Self {
            base,
            border: Some(Border {
                cols,
                z,
                schur,
                k: n_border,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.base.n + self.border.as_ref().map_or(0, |b| b.k)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.border.is_none() && self.base.is_positive_definite()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match &self.border {
            None => self.base.solve(b),
            Some(border) => {
                let m = self.base.n;
                let x0 = self.base.solve(&b[..m]);
                let mut rhs_s = nalgebra::DVector::zeros(border.k);
                for i in 0..border.k {
                    let dot: f64 = border.cols[i].iter().zip(&x0).map(|(a, b)| a * b).sum();
                    rhs_s[i] = b[m + i] - dot;
                }
                let y = border.schur.solve(&rhs_s).expect("factored Schur block");
                let mut x = x0;
                for (j, zj) in border.z.iter().enumerate() {
                    let yj = y[j];
                    for (xi, zi) in x.iter_mut().zip(zj) {
                        *xi -= yj * zi;
                    }
                }
                x.extend(y.iter().copied());
                x
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::norm2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn diag2() -> SparseMatrix {
        SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 1.0)])
    }

    #[test]
    fn solves_diagonal() {
        let f = factorize(&diag2(), true).unwrap();
        assert_eq!(f.solve(&[2.0, 1.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn detects_singular() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        match factorize(&a, false) {
            Err(Error::Singular { .. }) => {}
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn spd_hint_rejects_indefinite() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        match factorize(&a, true) {
            Err(Error::NotPositiveDefinite { .. }) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
        assert!(factorize(&a, false).unwrap().solve(&[1.0, 1.0]) == vec![1.0, -1.0]);
    }

    #[test]
    fn random_spd_backward_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        // A = G^T G + I, dense-ish random.
        let mut g = vec![vec![0.0; n]; n];
        for row in &mut g {
            for v in row.iter_mut() {
                if rng.gen::<f64>() < 0.2 {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
        }
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += g[k][i] * g[k][j];
                }
                if i == j {
                    acc += 1.0;
                }
                if acc != 0.0 {
                    entries.push((i, j, acc));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &entries);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = factorize(&a, true).unwrap();
        assert!(f.is_positive_definite());
        let x = f.solve(&b);
        let r: Vec<f64> = a
            .matvec_alloc(&x)
            .iter()
            .zip(&b)
            .map(|(ax, bi)| ax - bi)
            .collect();
        assert!(norm2(&r) / norm2(&b) < 1e-12);
    }

    #[test]
    fn indefinite_quasidefinite_solve() {
        // [K  B^T; B  -M] style block system.
        let entries = vec![
            (0, 0, 4.0),
            (1, 1, 3.0),
            (0, 2, 1.0),
            (2, 0, 1.0),
            (1, 2, -2.0),
            (2, 1, -2.0),
            (2, 2, -1.0),
        ];
        let a = SparseMatrix::from_triplets(3, 3, &entries);
        let f = factorize(&a, false).unwrap();
        assert!(!f.is_positive_definite());
        let b = vec![1.0, 2.0, 3.0];
        let x = f.solve(&b);
        let ax = a.matvec_alloc(&x);
        for (ai, bi) in ax.iter().zip(&b) {
            assert!((ai - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn bordered_solver_matches_dense() {
        // 4x4 base + 1 dense border row/col.
        let mut entries = vec![
            (0, 0, 5.0),
            (1, 1, 4.0),
            (2, 2, 3.0),
            (3, 3, 2.0),
            (0, 1, 1.0),
            (1, 0, 1.0),
        ];
        let border = [1.0, 2.0, -1.0, 0.5];
        for (i, v) in border.iter().enumerate() {
            entries.push((i, 4, *v));
            entries.push((4, i, *v));
        }
        let a = SparseMatrix::from_triplets(5, 5, &entries);
        let solver = DirectSolver::new(&a, 1, false).unwrap();
        let b = vec![1.0, -1.0, 2.0, 0.0, 3.0];
        let x = solver.solve(&b);
        let dense = a.to_dense();
        let xd = dense.lu().solve(&nalgebra::DVector::from_vec(b.clone())).unwrap();
        for i in 0..5 {
            assert!((x[i] - xd[i]).abs() < 1e-11, "{} vs {}", x[i], xd[i]);
        }
        let ax = a.matvec_alloc(&x);
        for (ai, bi) in ax.iter().zip(&b) {
            assert!((ai - bi).abs() < 1e-11);
        }
    }

    #[test]
    fn rcm_reduces_grid_solve() {
        // 2D Laplacian on a 20x20 grid, sanity for ordering + solve accuracy.
        let n = 20usize;
        let id = |i: usize, j: usize| j * n + i;
        let mut entries = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let v = id(i, j);
                entries.push((v, v, 4.0));
                if i > 0 {
                    entries.push((v, id(i - 1, j), -1.0));
                }
                if i + 1 < n {
                    entries.push((v, id(i + 1, j), -1.0));
                }
                if j > 0 {
                    entries.push((v, id(i, j - 1), -1.0));
                }
                if j + 1 < n {
                    entries.push((v, id(i, j + 1), -1.0));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n * n, n * n, &entries);
        let b = vec![1.0; n * n];
        let f = factorize(&a, true).unwrap();
        let x = f.solve(&b);
        let r: Vec<f64> = a.matvec_alloc(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) < 1e-10);
    }
}
