//! Semi-supervised RF-GAP proximities.
//!
//! For a query `i` and a labeled target `j != i`:
//!
//! ```text
//! p_l(i, j) = 1/|S_i| * sum_{t in S_i} c_j(t) * [leaf_i(t) == leaf_j(t)] / |M_i(t)|
//! p_l(i, i) = 1/|Sbar_i| * sum_{t in Sbar_i} c_i(t) / |M_i(t)|
//! ```
//!
//! where `S_i` are the trees in which `i` is out of bag (every tree for an
//! unlabeled query), `Sbar_i` the trees in which it is in bag, `c_j(t)` the
//! bootstrap multiplicity and `|M_i(t)|` the total in-bag multiplicity of the
//! query's leaf. Unlabeled targets enter as pseudo-training points with unit
//! multiplicity:
//!
//! ```text
//! p_u(i, j) = 1/|S_i| * sum_{t in S_i} [leaf_i(t) == leaf_j(t)] / |M_i(t)|
//! ```
//!
//! Per query, contributions are accumulated in ascending tree order so the
//! result is bit-identical to a straightforward triple loop.

use rayon::prelude::*;

use crate::domain::LabeledDomain;
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::sparse::{AffinityMatrix, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Labeled,
    Unlabeled,
}

/// Directed proximities from every query (rows, domain indices) to the targets
/// of one kind (columns, domain indices; other columns are empty).
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedProximity {
    pub target_kind: TargetKind,
    pub matrix: CsrMatrix,
}

impl DirectedProximity {
    pub fn get(&self, query: usize, target: usize) -> f64 {
        self.matrix.get(query, target)
    }
}

/// Per-tree leaf membership of every sample of a domain.
struct LeafIndex {
    n: usize,
    n_trees: usize,
    /// `leaf[t][i]` for every domain index `i`.
    leaf: Vec<Vec<u32>>,
    /// `inbag[t][leaf]`: (domain index, multiplicity), ascending index.
    inbag: Vec<Vec<Vec<(usize, u32)>>>,
    /// `mass[t][leaf]`: total in-bag multiplicity.
    mass: Vec<Vec<u32>>,
    /// `unlabeled[t][leaf]`: unlabeled domain indices, ascending.
    unlabeled: Vec<Vec<Vec<usize>>>,
    /// Training position of each domain index, if labeled.
    position: Vec<Option<usize>>,
}

impl LeafIndex {
    fn build(forest: &Forest, domain: &LabeledDomain) -> Result<Self> {
        if forest.train_index() != domain.labeled_indices().as_slice() {
            return Err(Error::data(
                "forest was not trained on this domain's labeled samples",
            ));
        }
        let n = domain.len();
        let n_trees = forest.n_trees();
        let unl = domain.unlabeled_indices();
        let unl_leaves = forest.apply(domain.features().select(ndarray::Axis(0), &unl).view())?;
        let mut position = vec![None; n];
        for (p, &i) in forest.train_index().iter().enumerate() {
            position[i] = Some(p);
        }

        let mut leaf = Vec::with_capacity(n_trees);
        let mut inbag = Vec::with_capacity(n_trees);
        let mut mass = Vec::with_capacity(n_trees);
        let mut unlabeled = Vec::with_capacity(n_trees);
        for t in 0..n_trees {
            let n_leaves = forest.trees()[t].n_leaves();
            let mut lt = vec![0u32; n];
            let mut ib = vec![Vec::new(); n_leaves];
            let mut ms = vec![0u32; n_leaves];
            let mut un = vec![Vec::new(); n_leaves];
            for (p, &i) in forest.train_index().iter().enumerate() {
                let l = forest.train_leaves()[t][p];
                lt[i] = l;
                let c = forest.inbag()[t][p];
                if c > 0 {
                    ib[l as usize].push((i, c));
                    ms[l as usize] += c;
                }
            }
            for (k, &i) in unl.iter().enumerate() {
                let l = unl_leaves[[k, t]];
                lt[i] = l;
                un[l as usize].push(i);
            }
            leaf.push(lt);
            inbag.push(ib);
            mass.push(ms);
            unlabeled.push(un);
        }
        Ok(Self {
            n,
            n_trees,
            leaf,
            inbag,
            mass,
            unlabeled,
            position,
        })
    }

    fn is_oob(&self, forest: &Forest, t: usize, i: usize) -> bool {
        self.position[i].is_none_or(|p| forest.inbag()[t][p] == 0)
    }

    /// Size of `S_i`; errors when a labeled query is in bag in every tree.
    fn oob_count(&self, forest: &Forest, i: usize) -> Result<usize> {
        let s = (0..self.n_trees).filter(|&t| self.is_oob(forest, t, i)).count();
        if s == 0 {
            return Err(Error::Numerical(format!(
                "sample {i} is in bag in all {} trees, so its proximity row is undefined; train more trees",
                self.n_trees
            )));
        }
        Ok(s)
    }

    /// One directed row: `(target, value)` pairs sorted by target.
    fn row(&self, forest: &Forest, i: usize, kind: TargetKind, scratch: &mut Scratch) -> Result<Vec<(usize, f64)>> {
        let s = self.oob_count(forest, i)?;
        for t in 0..self.n_trees {
            if !self.is_oob(forest, t, i) {
                continue;
            }
            let l = self.leaf[t][i] as usize;
            let m = self.mass[t][l] as f64;
            match kind {
                TargetKind::Labeled => {
                    for &(j, c) in &self.inbag[t][l] {
                        scratch.add(j, c as f64 / m);
                    }
                }
                TargetKind::Unlabeled => {
                    for &j in &self.unlabeled[t][l] {
                        scratch.add(j, 1.0 / m);
                    }
                }
            }
        }
        let mut row = scratch.drain(s as f64);
        if kind == TargetKind::Labeled {
            if let Some(p) = self.position[i] {
                let mut inbag_trees = 0usize;
                let mut acc = 0.0;
                for t in 0..self.n_trees {
                    let c = forest.inbag()[t][p];
                    if c > 0 {
                        inbag_trees += 1;
                        let l = self.leaf[t][i] as usize;
                        acc += c as f64 / self.mass[t][l] as f64;
                    }
                }
                if inbag_trees > 0 {
                    let v = acc / inbag_trees as f64;
                    let at = row.partition_point(|&(j, _)| j < i);
                    row.insert(at, (i, v));
                }
            }
        }
        Ok(row)
    }

    fn directed(&self, forest: &Forest, kind: TargetKind) -> Result<DirectedProximity> {
        let rows: Vec<Vec<(usize, f64)>> = (0..self.n)
            .into_par_iter()
            .map_init(
                || Scratch::new(self.n),
                |scratch, i| self.row(forest, i, kind, scratch),
            )
            .collect::<Result<_>>()?;
        Ok(DirectedProximity {
            target_kind: kind,
            matrix: CsrMatrix::from_rows(self.n, rows)?,
        })
    }
}

/// Dense accumulator with a touched list.
struct Scratch {
    acc: Vec<f64>,
    touched: Vec<usize>,
    seen: Vec<bool>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            acc: vec![0.0; n],
            touched: Vec::new(),
            seen: vec![false; n],
        }
    }

    fn add(&mut self, j: usize, v: f64) {
        if !self.seen[j] {
            self.seen[j] = true;
            self.touched.push(j);
        }
        self.acc[j] += v;
    }

    fn drain(&mut self, divisor: f64) -> Vec<(usize, f64)> {
        self.touched.sort_unstable();
        let row = self
            .touched
            .iter()
            .map(|&j| (j, self.acc[j] / divisor))
            .collect();
        for &j in &self.touched {
            self.acc[j] = 0.0;
            self.seen[j] = false;
        }
        self.touched.clear();
        row
    }
}

/// Directed proximities to labeled targets, including the in-bag self term.
pub fn rfgap_labeled(forest: &Forest, domain: &LabeledDomain) -> Result<DirectedProximity> {
    LeafIndex::build(forest, domain)?.directed(forest, TargetKind::Labeled)
}

/// Directed proximities to unlabeled targets (empty columns when the domain is
/// fully labeled).
pub fn rfgap_unlabeled(forest: &Forest, domain: &LabeledDomain) -> Result<DirectedProximity> {
    LeafIndex::build(forest, domain)?.directed(forest, TargetKind::Unlabeled)
}

/// The symmetric intra-domain affinity `W`.
///
/// With `D[i, j]` equal to `p_l(i, j)` for labeled `j` and `p_u(i, j)` for
/// unlabeled `j`, every block is `W_ij = (D_ij + D_ji) / 2`: the labeled block
/// symmetrizes `p_l`, the mixed block pairs `p_l(i, j)` with `p_u(j, i)`, and
/// the unlabeled block symmetrizes `p_u`.
pub fn assemble_intra(forest: &Forest, domain: &LabeledDomain) -> Result<AffinityMatrix> {
    let index = LeafIndex::build(forest, domain)?;
    let pl = index.directed(forest, TargetKind::Labeled)?;
    let pu = index.directed(forest, TargetKind::Unlabeled)?;
    AffinityMatrix::new(symmetrize_directed(&pl.matrix, &pu.matrix)?)
}

/// `(D + D^T) / 2` for `D = labeled + unlabeled` (disjoint column supports).
pub(crate) fn symmetrize_directed(labeled: &CsrMatrix, unlabeled: &CsrMatrix) -> Result<CsrMatrix> {
    let n = labeled.nrows();
    let d = merge_disjoint(labeled, unlabeled)?;
    let dt = d.transpose();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (ca, va) = d.row(i);
            let (cb, vb) = dt.row(i);
            let (mut a, mut b) = (0, 0);
            let mut out = Vec::with_capacity(ca.len().max(cb.len()));
            while a < ca.len() || b < cb.len() {
                let ja = ca.get(a).copied().unwrap_or(usize::MAX);
                let jb = cb.get(b).copied().unwrap_or(usize::MAX);
                let (j, x, y) = if ja == jb {
                    a += 1;
                    b += 1;
                    (ja, va[a - 1], vb[b - 1])
                } else if ja < jb {
                    a += 1;
                    (ja, va[a - 1], 0.0)
                } else {
                    b += 1;
                    (jb, 0.0, vb[b - 1])
                };
                out.push((j, 0.5 * (x + y)));
            }
            out
        })
        .collect();
    CsrMatrix::from_rows(n, rows)
}

fn merge_disjoint(a: &CsrMatrix, b: &CsrMatrix) -> Result<CsrMatrix> {
    let rows = (0..a.nrows())
        .map(|i| a.row_iter(i).chain(b.row_iter(i)).collect())
        .collect();
    CsrMatrix::from_rows(a.ncols(), rows)
}
