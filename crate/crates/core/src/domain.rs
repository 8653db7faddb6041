//! Partially labeled datasets and their CSV ingestion.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{streams, RngConfig};

/// Cell values treated as missing.
const MISSING: [&str; 3] = ["", "?", "NA"];

/// Feature matrix with a partial label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDomain {
    pub name: String,
    features: Array2<f64>,
    labels: Vec<Option<usize>>,
    class_count: usize,
    class_names: Vec<String>,
    feature_names: Vec<String>,
}

impl LabeledDomain {
    /// Validates and builds a domain. Every class in `0..class_count` must have
    /// at least one labeled sample and all features must be finite.
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<Option<usize>>,
        class_count: usize,
    ) -> Result<Self> {
        let class_names = (0..class_count).map(|c| c.to_string()).collect();
        let feature_names = (0..features.ncols()).map(|j| format!("f{j}")).collect();
        Self::with_names(name, features, labels, class_names, feature_names)
    }

    pub fn with_names(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<Option<usize>>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let class_count = class_names.len();
        if class_count == 0 {
            return Err(Error::data("a domain needs at least one class"));
        }
        if labels.len() != features.nrows() {
            return Err(Error::dims(format!(
                "{} labels for {} rows",
                labels.len(),
                features.nrows()
            )));
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::dims("feature name count differs from column count"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("features contain NaN or infinite values"));
        }
        let mut per_class = vec![0usize; class_count];
        for label in labels.iter().flatten() {
            if *label >= class_count {
                return Err(Error::data(format!("label {label} outside 0..{class_count}")));
            }
            per_class[*label] += 1;
        }
        if let Some(c) = per_class.iter().position(|&k| k == 0) {
            return Err(Error::data(format!(
                "class '{}' has no labeled sample",
                class_names[c]
            )));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            class_count,
            class_names,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i].is_some()).collect()
    }

    pub fn unlabeled_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i].is_none()).collect()
    }

    /// Labeled sample indices per class.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count];
        for (i, label) in self.labels.iter().enumerate() {
            if let Some(c) = label {
                out[*c].push(i);
            }
        }
        out
    }

    /// Rows `rows`, in that order.
    pub fn subset(&self, rows: &[usize]) -> Result<LabeledDomain> {
        let features = self.features.select(Axis(0), rows);
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        Self::with_names(
            self.name.clone(),
            features,
            labels,
            self.class_names.clone(),
            self.feature_names.clone(),
        )
    }

    /// Same rows and labels with a different feature matrix.
    pub fn with_features(&self, features: Array2<f64>, feature_names: Vec<String>) -> Result<LabeledDomain> {
        Self::with_names(
            self.name.clone(),
            features,
            self.labels.clone(),
            self.class_names.clone(),
            feature_names,
        )
    }

    pub fn with_labels(&self, labels: Vec<Option<usize>>) -> Result<LabeledDomain> {
        Self::with_names(
            self.name.clone(),
            self.features.clone(),
            labels,
            self.class_names.clone(),
            self.feature_names.clone(),
        )
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Writes the features plus a trailing `label` column; unlabeled rows get an
    /// empty label cell.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let mut header = self.feature_names.join(",");
        if !header.is_empty() {
            header.push(',');
        }
        header.push_str("label");
        writeln!(out, "{header}").map_err(io)?;
        let mut line = String::new();
        for (row, label) in self.features.outer_iter().zip(&self.labels) {
            line.clear();
            for v in row.iter() {
                line.push_str(&format!("{v},"));
            }
            if let Some(c) = label {
                line.push_str(&self.class_names[*c]);
            }
            writeln!(out, "{line}").map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Reads a CSV without masking. Rows with a missing feature value are dropped;
/// an empty label cell marks the row as unlabeled.
pub fn read_labeled_csv(path: &Path, label_column: &str) -> Result<LabeledDomain> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::data(format!("{}: no label column '{label_column}'", path.display())))?;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&j| j != label_idx).collect();

    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record?;
        let row: Vec<String> = feature_cols
            .iter()
            .map(|&j| record.get(j).unwrap_or("").to_string())
            .collect();
        if row.iter().any(|c| MISSING.contains(&c.as_str())) {
            dropped += 1;
            continue;
        }
        let label = record.get(label_idx).unwrap_or("");
        raw_labels.push((!MISSING.contains(&label)).then(|| label.to_string()));
        cells.push(row);
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} rows with missing feature values", path.display());
    }
    if cells.is_empty() {
        return Err(Error::data(format!("{}: no usable rows", path.display())));
    }

    let n = cells.len();
    let d = feature_cols.len();
    let mut features = Array2::zeros((n, d));
    for j in 0..d {
        let parsed: Option<Vec<f64>> = cells.iter().map(|row| row[j].parse::<f64>().ok()).collect();
        match parsed {
            Some(values) => {
                for (i, v) in values.into_iter().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::data(format!(
                            "{}: non-finite value in column '{}' row {}",
                            path.display(),
                            headers[feature_cols[j]],
                            i + 1
                        )));
                    }
                    features[[i, j]] = v;
                }
            }
            None => {
                // categorical: codes in order of first appearance
                let mut codes: HashMap<&str, usize> = HashMap::new();
                for (i, row) in cells.iter().enumerate() {
                    let next = codes.len();
                    let code = *codes.entry(row[j].as_str()).or_insert(next);
                    features[[i, j]] = code as f64;
                }
            }
        }
    }

    let mut distinct: Vec<&String> = raw_labels.iter().flatten().collect();
    distinct.sort_by(|a, b| match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    });
    distinct.dedup();
    if distinct.is_empty() {
        return Err(Error::data(format!("{}: no labeled rows", path.display())));
    }
    let class_names: Vec<String> = distinct.into_iter().cloned().collect();
    let ids: HashMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(c, s)| (s.as_str(), c))
        .collect();
    let labels = raw_labels
        .iter()
        .map(|l| l.as_ref().map(|s| ids[s.as_str()]))
        .collect();
    let feature_names = feature_cols.iter().map(|&j| headers[j].clone()).collect();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    LabeledDomain::with_names(name, features, labels, class_names, feature_names)
}

/// Loads a CSV and hides `mask_fraction` of its labels.
pub fn load_domain(path: &Path, label_column: &str, mask_fraction: f64, rng: &RngConfig) -> Result<LabeledDomain> {
    let domain = read_labeled_csv(path, label_column)?;
    mask_labels(&domain, mask_fraction, rng)
}

/// Removes a uniformly random `fraction` of the present labels, stratified per
/// class. Every class keeps at least one labeled sample; the total number
/// masked is `round(fraction * labeled)` unless that would empty a class.
pub fn mask_labels(domain: &LabeledDomain, fraction: f64, rng: &RngConfig) -> Result<LabeledDomain> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::param(format!("mask fraction {fraction} outside [0, 1]")));
    }
    let members = domain.class_members();
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let counts = masked_counts(&sizes, fraction);
    let mut rng = rng.stream(streams::MASK);
    let mut labels = domain.labels().to_vec();
    for (class, mut idx) in members.into_iter().enumerate() {
        idx.shuffle(&mut rng);
        for &i in &idx[..counts[class]] {
            labels[i] = None;
        }
    }
    domain.with_labels(labels)
}

/// Per-class mask counts by largest remainder with a cap of `size - 1`.
fn masked_counts(sizes: &[usize], fraction: f64) -> Vec<usize> {
    let total_labeled: usize = sizes.iter().sum();
    let target = (fraction * total_labeled as f64).round() as usize;
    let quotas: Vec<f64> = sizes.iter().map(|&s| fraction * s as f64).collect();
    let caps: Vec<usize> = sizes.iter().map(|&s| s.saturating_sub(1)).collect();
    let mut counts: Vec<usize> = quotas
        .iter()
        .zip(&caps)
        .map(|(q, &cap)| (q.floor() as usize).min(cap))
        .collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut assigned: usize = counts.iter().sum();
    while assigned < target {
        let mut progressed = false;
        for &c in &order {
            if assigned == target {
                break;
            }
            if counts[c] < caps[c] {
                counts[c] += 1;
                assigned += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    counts
}
