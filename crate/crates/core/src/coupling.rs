use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// A bijection between two index sets of equal size: `forward[i]` is the
/// target matched to source `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coupling {
    forward: Vec<usize>,
}

impl Coupling {
    pub fn new(forward: Vec<usize>) -> Result<Self> {
        let n = forward.len();
        let mut seen = vec![false; n];
        for &t in &forward {
            if t >= n || seen[t] {
                return Err(Error::data(format!("coupling is not a permutation of 0..{n}")));
            }
            seen[t] = true;
        }
        Ok(Self { forward })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            forward: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn target_of(&self, source: usize) -> usize {
        self.forward[source]
    }

    pub fn inverse(&self) -> Coupling {
        let mut back = vec![0; self.len()];
        for (s, &t) in self.forward.iter().enumerate() {
            back[t] = s;
        }
        Coupling { forward: back }
    }

    pub fn fixed_points(&self) -> usize {
        self.forward.iter().enumerate().filter(|(s, &t)| *s == t).count()
    }

    /// Binary permutation matrix with `T[i, forward[i]] = 1`.
    pub fn to_matrix(&self) -> CsrMatrix {
        let rows = self.forward.iter().map(|&t| vec![(t, 1.0)]).collect();
        CsrMatrix::from_rows(self.len(), rows).expect("permutation rows are valid")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(out, "source_index,target_index").map_err(io)?;
        for (s, t) in self.forward.iter().enumerate() {
            writeln!(out, "{s},{t}").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut pairs = Vec::new();
        for record in reader.records() {
            let record = record?;
            let parse = |k: usize| -> Result<usize> {
                record
                    .get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::data(format!("{}: malformed coupling row", path.display())))
            };
            pairs.push((parse(0)?, parse(1)?));
        }
        pairs.sort_unstable();
        if pairs.iter().enumerate().any(|(i, &(s, _))| i != s) {
            return Err(Error::data(format!("{}: source indices are not 0..n", path.display())));
        }
        Coupling::new(pairs.into_iter().map(|(_, t)| t).collect())
    }
}
