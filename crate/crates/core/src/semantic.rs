//! Class-semantic profiles: prior-weighted affinity mass per class, projected
//! onto the unit sphere.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;

use crate::domain::LabeledDomain;
use crate::error::{Error, Result};
use crate::sparse::AffinityMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticProfile {
    matrix: Array2<f64>,
    normalized: bool,
    /// Rows that were identically zero before normalization.
    zero_rows: usize,
}

impl SemanticProfile {
    pub fn from_matrix(matrix: Array2<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::data("profile entries must be finite and nonnegative"));
        }
        Ok(Self {
            matrix,
            normalized: false,
            zero_rows: 0,
        })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn zero_rows(&self) -> usize {
        self.zero_rows
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn n_classes(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(i)
    }

    /// Header `class_0,...`, one row per sample.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let header: Vec<String> = (0..self.n_classes()).map(|c| format!("class_{c}")).collect();
        writeln!(out, "{}", header.join(",")).map_err(io)?;
        for row in self.matrix.outer_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", cells.join(",")).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// `S(i, c) = (1 / p_c) * sum_{j labeled c} W_ij`, `p_c = |I^c| / |I^l|`.
pub fn profiles(w: &AffinityMatrix, domain: &LabeledDomain) -> Result<SemanticProfile> {
    if w.size() != domain.len() {
        return Err(Error::dims(format!(
            "affinity is {0}x{0} but the domain has {1} samples",
            w.size(),
            domain.len()
        )));
    }
    let c = domain.class_count();
    let mut counts = vec![0usize; c];
    for l in domain.labels().iter().flatten() {
        counts[*l] += 1;
    }
    let n_labeled: usize = counts.iter().sum();
    if let Some(empty) = counts.iter().position(|&k| k == 0) {
        return Err(Error::data(format!("class {empty} has no labeled sample")));
    }
    let inv_prior: Vec<f64> = counts.iter().map(|&k| n_labeled as f64 / k as f64).collect();
    let labels = domain.labels();
    let mut matrix = Array2::zeros((domain.len(), c));
    matrix
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            for (j, v) in w.row_iter(i) {
                if let Some(l) = labels[j] {
                    row[l] += v;
                }
            }
            for (k, x) in row.iter_mut().enumerate() {
                *x *= inv_prior[k];
            }
        });
    SemanticProfile::from_matrix(matrix)
}

/// Unit-normalizes every row; all-zero rows become `1/sqrt(C)` everywhere.
pub fn normalize(profile: &SemanticProfile) -> SemanticProfile {
    let c = profile.n_classes();
    let uniform = 1.0 / (c as f64).sqrt();
    let mut matrix = profile.matrix.clone();
    let mut zero_rows = 0;
    for mut row in matrix.outer_iter_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        } else {
            row.fill(uniform);
            zero_rows += 1;
        }
    }
    if zero_rows > 0 {
        log::warn!("{zero_rows} samples have no affinity to any labeled sample; using a uniform profile");
    }
    SemanticProfile {
        matrix,
        normalized: true,
        zero_rows: profile.zero_rows + zero_rows,
    }
}

/// `2 - 2 <a, b>`, the squared distance between unit vectors, floored at 0.
pub fn semantic_cost(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    (2.0 - 2.0 * a.dot(&b)).max(0.0)
}

/// Lazy cost between two normalized profiles; nothing of size n x m is stored.
#[derive(Debug, Clone, Copy)]
pub struct SemanticCost<'a> {
    src: &'a SemanticProfile,
    dst: &'a SemanticProfile,
}

impl<'a> SemanticCost<'a> {
    pub fn new(src: &'a SemanticProfile, dst: &'a SemanticProfile) -> Result<Self> {
        if !src.normalized || !dst.normalized {
            return Err(Error::param("semantic cost needs normalized profiles"));
        }
        if src.n_classes() != dst.n_classes() {
            return Err(Error::dims(format!(
                "profiles have {} and {} classes",
                src.n_classes(),
                dst.n_classes()
            )));
        }
        Ok(Self { src, dst })
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        semantic_cost(self.src.row(i), self.dst.row(j))
    }

    pub fn src(&self) -> &'a SemanticProfile {
        self.src
    }

    pub fn dst(&self) -> &'a SemanticProfile {
        self.dst
    }
}
