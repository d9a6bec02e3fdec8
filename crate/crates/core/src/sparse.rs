//! Compressed sparse row storage with triplet assembly and Matrix Market
//! import/export.

use crate::error::{Error, Result};
use std::io::{BufRead, Write};
use std::ops::Range;

/// Triplet (COO) accumulator used during finite element assembly.
#[derive(Debug, Clone)]
pub struct TripletMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.entries.push((row, col, value));
    }

    pub fn extend_from(&mut self, other: &TripletMatrix, row_offset: usize, col_offset: usize) {
        for &(r, c, v) in &other.entries {
            self.push(r + row_offset, c + col_offset, v);
        }
    }

    /// Add the transpose of `other` at the given offsets.
    pub fn extend_transposed(
        &mut self,
        other: &TripletMatrix,
        row_offset: usize,
        col_offset: usize,
    ) {
        for &(r, c, v) in &other.entries {
            self.push(c + row_offset, r + col_offset, v);
        }
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn scale(&mut self, factor: f64) {
        for e in &mut self.entries {
            e.2 *= factor;
        }
    }

    pub fn to_csr(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.n_rows, self.n_cols, &self.entries)
    }
}

/// Sparse matrix in CSR format; column indices are sorted within each row
/// and duplicates are summed at construction.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(n_rows: usize, n_cols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, _, _) in entries {
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut order = counts.clone();
        let mut cols = vec![0usize; entries.len()];
        let mut vals = vec![0.0; entries.len()];
        for &(r, c, v) in entries {
            let k = order[r];
            cols[k] = c;
            vals[k] = v;
            order[r] += 1;
        }
        // Sort each row and merge duplicates.
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut out_cols = Vec::with_capacity(entries.len());
        let mut out_vals = Vec::with_capacity(entries.len());
        for r in 0..n_rows {
            let lo = counts[r];
            let hi = counts[r + 1];
            let mut row: Vec<(usize, f64)> =
                cols[lo..hi].iter().copied().zip(vals[lo..hi].iter().copied()).collect();
            // Stable sort keeps duplicate entries in push order, so equal
            // triplet streams sum to bitwise-equal values.
            row.sort_by_key(|e| e.0);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 == c {
                        v += v2;
                        iter.next();
                    } else {
                        break;
                    }
                }
                out_cols.push(c);
                out_vals.push(v);
            }
            row_ptr[r + 1] = out_cols.len();
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx: out_cols,
            values: out_vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[r] = acc;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    /// Largest absolute deviation from symmetry.
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.n_rows, self.n_cols);
        let mut worst: f64 = 0.0;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(*c, r)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Number of stored entries inside a block of rows x cols.
    pub fn nnz_in_block(&self, rows: Range<usize>, cols: Range<usize>) -> usize {
        let mut count = 0;
        for r in rows {
            let (row_cols, _) = self.row(r);
            count += row_cols.iter().filter(|c| cols.contains(c)).count();
        }
        count
    }

    /// Extract the square diagonal sub-block with the given index range.
    pub fn diagonal_block(&self, range: Range<usize>) -> SparseMatrix {
        let mut entries = Vec::new();
        for r in range.clone() {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                if range.contains(c) {
                    entries.push((r - range.start, c - range.start, *v));
                }
            }
        }
        SparseMatrix::from_triplets(range.len(), range.len(), &entries)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                m[(r, *c)] = *v;
            }
        }
        m
    }

    /// Scaled sum of two matrices with identical shape.
    pub fn add_scaled(&self, a: f64, other: &SparseMatrix, b: f64) -> SparseMatrix {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        let mut entries = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                entries.push((r, *c, a * v));
            }
            let (cols, vals) = other.row(r);
            for (c, v) in cols.iter().zip(vals) {
                entries.push((r, *c, b * v));
            }
        }
        SparseMatrix::from_triplets(self.n_rows, self.n_cols, &entries)
    }

    /// Write in Matrix Market coordinate format (general symmetry, 1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }

    /// Read a Matrix Market coordinate file (real, general or symmetric).
    pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MatrixMarket("empty file".into()))??;
        let header = header.to_lowercase();
        if !header.starts_with("%%matrixmarket matrix coordinate real") {
            return Err(Error::MatrixMarket(format!(
                "unsupported header: {header}"
            )));
        }
        let symmetric = header.contains("symmetric");
        let mut size_line = None;
        for line in lines.by_ref() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') {
                continue;
            }
            size_line = Some(trimmed.to_string());
            break;
        }
        let size_line =
            size_line.ok_or_else(|| Error::MatrixMarket("missing size line".into()))?;
        let dims: Vec<usize> = size_line
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::MatrixMarket(format!("bad size token {t}")))
            })
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(Error::MatrixMarket("size line needs 3 tokens".into()));
        }
        let (n_rows, n_cols, nnz) = (dims[0], dims[1], dims[2]);
        let mut entries = Vec::with_capacity(nnz);
        for line in lines {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') {
                continue;
            }
            let toks: Vec<&str> = trimmed.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(Error::MatrixMarket(format!("bad entry line: {trimmed}")));
            }
            let r: usize = toks[0]
                .parse()
                .map_err(|_| Error::MatrixMarket(format!("bad row index {}", toks[0])))?;
            let c: usize = toks[1]
                .parse()
                .map_err(|_| Error::MatrixMarket(format!("bad col index {}", toks[1])))?;
            let v: f64 = toks[2]
                .parse()
                .map_err(|_| Error::MatrixMarket(format!("bad value {}", toks[2])))?;
            entries.push((r - 1, c - 1, v));
            if symmetric && r != c {
                entries.push((c - 1, r - 1, v));
            }
        }
        Ok(SparseMatrix::from_triplets(n_rows, n_cols, &entries))
    }
}

/// Dot product of two vectors.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha * x.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
