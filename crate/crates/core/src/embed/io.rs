//! Embedding CSV: `domain,index,label,dim_0,...`; the label cell is empty for
//! samples whose label was hidden.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddedSample {
    pub domain: String,
    pub index: usize,
    pub label: Option<String>,
}

pub fn write_embedding_csv(path: &Path, samples: &[EmbeddedSample], coords: &Array2<f64>) -> Result<()> {
    if samples.len() != coords.nrows() {
        return Err(Error::dims(format!("{} samples for {} coordinate rows", samples.len(), coords.nrows())));
    }
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let mut header = String::from("domain,index,label");
    for k in 0..coords.ncols() {
        header.push_str(&format!(",dim_{k}"));
    }
    writeln!(out, "{header}").map_err(io)?;
    for (s, row) in samples.iter().zip(coords.rows()) {
        write!(out, "{},{},{}", s.domain, s.index, s.label.as_deref().unwrap_or("")).map_err(io)?;
        for v in row {
            write!(out, ",{v}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_embedding_csv(path: &Path) -> Result<(Vec<EmbeddedSample>, Array2<f64>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let dims = headers.len().saturating_sub(3);
    if headers.iter().take(3).ne(["domain", "index", "label"]) || dims == 0 {
        return Err(Error::data(format!("{}: not an embedding file", path.display())));
    }
    let mut samples = Vec::new();
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let bad = || Error::data(format!("{}: malformed row {}", path.display(), line + 2));
        let index = record[1].parse().map_err(|_| bad())?;
        let label = (!record[2].is_empty()).then(|| record[2].to_string());
        samples.push(EmbeddedSample { domain: record[0].to_string(), index, label });
        for k in 0..dims {
            values.push(record[3 + k].parse::<f64>().map_err(|_| bad())?);
        }
    }
    let coords = Array2::from_shape_vec((samples.len(), dims), values).expect("row-major fill");
    Ok((samples, coords))
}
