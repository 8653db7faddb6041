//! Versioned little-endian binary format: magic `FSTA`, a `u32` version, the
//! forest header and then each tree with its bootstrap row.

use std::io::{Read, Write};
use std::path::Path;

use super::tree::{Node, Tree};
use super::{Forest, ForestParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FSTA";
const VERSION: u32 = 1;
const NONE: u32 = u32::MAX;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn usize(&mut self, v: usize) -> std::io::Result<()> {
        self.u32(u32::try_from(v).expect("forest sizes fit in u32"))
    }
    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.0.write_all(&v.to_bits().to_le_bytes())
    }
    fn opt(&mut self, v: Option<usize>) -> std::io::Result<()> {
        self.u32(v.map_or(NONE, |x| x as u32))
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn u32(&mut self) -> std::io::Result<u32> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn usize(&mut self) -> std::io::Result<usize> {
        self.u32().map(|v| v as usize)
    }
    fn f64(&mut self) -> std::io::Result<f64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(f64::from_bits(u64::from_le_bytes(b)))
    }
    fn opt(&mut self) -> std::io::Result<Option<usize>> {
        self.u32().map(|v| (v != NONE).then_some(v as usize))
    }
}

impl Forest {
    pub fn write_to<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = Writer(out);
        w.0.write_all(MAGIC)?;
        w.u32(VERSION)?;
        w.usize(self.params.n_trees)?;
        w.opt(self.params.max_features)?;
        w.usize(self.params.min_leaf)?;
        w.opt(self.params.max_depth)?;
        w.usize(self.n_features)?;
        w.usize(self.n_classes)?;
        w.usize(self.trees.len())?;
        w.usize(self.train_index.len())?;
        for &i in &self.train_index {
            w.usize(i)?;
        }
        for (t, tree) in self.trees.iter().enumerate() {
            w.usize(tree.nodes.len())?;
            for node in &tree.nodes {
                match *node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        w.0.write_all(&[0])?;
                        w.u32(feature)?;
                        w.f64(threshold)?;
                        w.u32(left)?;
                        w.u32(right)?;
                    }
                    Node::Leaf { leaf } => {
                        w.0.write_all(&[1])?;
                        w.u32(leaf)?;
                    }
                }
            }
            w.usize(tree.leaf_counts.len())?;
            for counts in &tree.leaf_counts {
                for &c in counts {
                    w.u32(c)?;
                }
            }
            for &v in &tree.importance {
                w.f64(v)?;
            }
            for &c in &self.inbag[t] {
                w.u32(c)?;
            }
            for &l in &self.train_leaves[t] {
                w.u32(l)?;
            }
        }
        w.0.flush()
    }

    pub fn read_from<R: Read>(input: R) -> Result<Forest> {
        let bad = |e: std::io::Error| Error::data(format!("truncated or unreadable forest: {e}"));
        let mut r = Reader(input);
        let mut magic = [0u8; 4];
        r.0.read_exact(&mut magic).map_err(bad)?;
        if &magic != MAGIC {
            return Err(Error::data("not a forest file (bad magic)"));
        }
        let version = r.u32().map_err(bad)?;
        if version != VERSION {
            return Err(Error::data(format!("unsupported forest version {version}")));
        }
        let params = ForestParams {
            n_trees: r.usize().map_err(bad)?,
            max_features: r.opt().map_err(bad)?,
            min_leaf: r.usize().map_err(bad)?,
            max_depth: r.opt().map_err(bad)?,
        };
        let n_features = r.usize().map_err(bad)?;
        let n_classes = r.usize().map_err(bad)?;
        let n_trees = r.usize().map_err(bad)?;
        let n_train = r.usize().map_err(bad)?;
        let train_index = (0..n_train).map(|_| r.usize()).collect::<std::io::Result<_>>().map_err(bad)?;
        let mut trees = Vec::with_capacity(n_trees);
        let mut inbag = Vec::with_capacity(n_trees);
        let mut train_leaves = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes = r.usize().map_err(bad)?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let mut tag = [0u8];
                r.0.read_exact(&mut tag).map_err(bad)?;
                nodes.push(match tag[0] {
                    0 => Node::Split {
                        feature: r.u32().map_err(bad)?,
                        threshold: r.f64().map_err(bad)?,
                        left: r.u32().map_err(bad)?,
                        right: r.u32().map_err(bad)?,
                    },
                    1 => Node::Leaf {
                        leaf: r.u32().map_err(bad)?,
                    },
                    other => return Err(Error::data(format!("unknown node tag {other}"))),
                });
            }
            let n_leaves = r.usize().map_err(bad)?;
            let mut leaf_counts = Vec::with_capacity(n_leaves);
            for _ in 0..n_leaves {
                leaf_counts.push((0..n_classes).map(|_| r.u32()).collect::<std::io::Result<_>>().map_err(bad)?);
            }
            let importance = (0..n_features).map(|_| r.f64()).collect::<std::io::Result<_>>().map_err(bad)?;
            trees.push(Tree {
                nodes,
                leaf_counts,
                importance,
            });
            inbag.push((0..n_train).map(|_| r.u32()).collect::<std::io::Result<_>>().map_err(bad)?);
            train_leaves.push((0..n_train).map(|_| r.u32()).collect::<std::io::Result<_>>().map_err(bad)?);
        }
        Ok(Forest {
            params,
            n_features,
            n_classes,
            trees,
            train_index,
            inbag,
            train_leaves,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Forest> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
