//! Compressed sparse row storage and the symmetric [`AffinityMatrix`].

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Absolute tolerance for symmetry checks on affinities.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Row-major sparse matrix. Column indices are strictly increasing within a row
/// and explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from per-row entry lists. Entries within a row may come in
    /// any order but columns must be unique; zeros are dropped.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let nrows = rows.len();
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for (r, mut row) in rows.into_iter().enumerate() {
            row.sort_unstable_by_key(|&(c, _)| c);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::data(format!("duplicate entry ({r}, {})", w[0].0)));
                }
            }
            for (c, v) in row {
                if c >= ncols {
                    return Err(Error::dims(format!("column {c} out of range for {ncols} columns")));
                }
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets with unique positions.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            if r >= nrows {
                return Err(Error::dims(format!("row {r} out of range for {nrows} rows")));
            }
            rows[r].push((c, v));
        }
        Self::from_rows(ncols, rows)
    }

    pub fn from_dense(dense: &Array2<f64>) -> Self {
        let rows = dense
            .outer_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(c, &v)| (c, v))
                    .collect()
            })
            .collect();
        Self::from_rows(dense.ncols(), rows).expect("dense rows are well formed")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn row_iter(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (cols, vals) = self.row(i);
        cols.iter().copied().zip(vals.iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row_iter(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().sum())
            .collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for (c, v) in self.row_iter(r) {
                let slot = next[c];
                indices[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for (r, c, v) in self.triplets() {
            out[[r, c]] = v;
        }
        out
    }

    pub fn scale(&self, factor: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Maximum absolute asymmetry `|a_ij - a_ji|`; `None` when not square.
    pub fn max_asymmetry(&self) -> Option<f64> {
        if self.nrows != self.ncols {
            return None;
        }
        let mut worst = 0.0f64;
        for (r, c, v) in self.triplets() {
            worst = worst.max((v - self.get(c, r)).abs());
        }
        Some(worst)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Writes `row,col,value` triplets sorted lexicographically by `(row, col)`.
    pub fn write_triplets(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "row,col,value").map_err(io)?;
        for (r, c, v) in self.triplets() {
            writeln!(out, "{r},{c},{v:e}").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    /// Reads a triplet file written by [`CsrMatrix::write_triplets`].
    pub fn read_triplets(path: &Path, nrows: usize, ncols: usize) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut triplets = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let bad = || Error::data(format!("{}: malformed triplet on line {}", path.display(), lineno + 1));
            let r: usize = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
            let c: usize = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
            let v: f64 = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
            triplets.push((r, c, v));
        }
        Self::from_triplets(nrows, ncols, &triplets)
    }
}

/// A square, symmetric, nonnegative, finite sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix(CsrMatrix);

impl AffinityMatrix {
    pub fn new(matrix: CsrMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::dims(format!(
                "affinity must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if let Some(v) = matrix.values().iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::data(format!("affinity entry {v} is negative or non-finite")));
        }
        let asym = matrix.max_asymmetry().unwrap_or(0.0);
        if asym > SYMMETRY_TOL {
            return Err(Error::data(format!("affinity asymmetry {asym:e} exceeds {SYMMETRY_TOL:e}")));
        }
        Ok(Self(matrix))
    }

    pub fn identity(n: usize) -> Self {
        Self(CsrMatrix::identity(n))
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CsrMatrix {
        self.0
    }
}

impl std::ops::Deref for AffinityMatrix {
    type Target = CsrMatrix;

    fn deref(&self) -> &CsrMatrix {
        &self.0
    }
}

/// Joint block matrix `[[W_A, W_AB], [W_AB^T, W_B]]`.
pub fn assemble_joint(w_a: &AffinityMatrix, w_b: &AffinityMatrix, w_ab: &CsrMatrix) -> Result<AffinityMatrix> {
    let (n, m) = (w_a.size(), w_b.size());
    if w_ab.shape() != (n, m) {
        return Err(Error::dims(format!(
            "cross block is {}x{}, expected {n}x{m}",
            w_ab.nrows(),
            w_ab.ncols()
        )));
    }
    if w_ab.values().iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::data("cross block has negative or non-finite entries"));
    }
    let w_ba = w_ab.transpose();
    let mut rows = Vec::with_capacity(n + m);
    for i in 0..n {
        let mut row: Vec<(usize, f64)> = w_a.row_iter(i).collect();
        row.extend(w_ab.row_iter(i).map(|(j, v)| (n + j, v)));
        rows.push(row);
    }
    for j in 0..m {
        let mut row: Vec<(usize, f64)> = w_ba.row_iter(j).collect();
        row.extend(w_b.row_iter(j).map(|(k, v)| (n + k, v)));
        rows.push(row);
    }
    AffinityMatrix::new(CsrMatrix::from_rows(n + m, rows)?)
}
