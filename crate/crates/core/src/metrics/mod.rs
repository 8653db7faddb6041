//! Alignment and integration scores.
//!
//! Biological conservation: NMI, ARI, label silhouette, cLISI, isolated
//! labels. Batch correction: BRAS, iLISI, kBET, graph connectivity, PCR
//! comparison. Correspondence: label transfer, alignment score, FOSCTTM.

pub mod alignment;
pub mod clustering;
pub mod connectivity;
pub mod kbet;
pub mod knn;
pub mod lisi;
pub mod pcr;
pub mod silhouette;

use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayView2, Axis};
use serde::Serialize;

pub use alignment::{alignment_score, foscttm, label_transfer_accuracy};
pub use clustering::{ari, kmeans_clusters, nmi};
pub use connectivity::graph_connectivity;
pub use kbet::{kbet, KbetParams};
pub use knn::KnnGraph;
pub use lisi::{clisi, ilisi, DEFAULT_PERPLEXITY};
pub use pcr::pcr_comparison;
pub use silhouette::{bras, isolated_labels, silhouette_label};

use crate::error::{Error, Result};
use crate::rng::{streams, RngConfig};

/// Neighborhood size for label transfer and the alignment score.
pub const DEFAULT_K: usize = 5;
/// Neighborhood size for graph connectivity.
pub const CONNECTIVITY_K: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    LabelTransfer,
    AlignmentScore,
    Foscttm,
    Nmi,
    Ari,
    SilhouetteLabel,
    Clisi,
    IsolatedLabels,
    Bras,
    Ilisi,
    Kbet,
    GraphConnectivity,
    PcrComparison,
}

impl Metric {
    pub const ALL: [Metric; 13] = [
        Metric::LabelTransfer,
        Metric::AlignmentScore,
        Metric::Foscttm,
        Metric::Nmi,
        Metric::Ari,
        Metric::SilhouetteLabel,
        Metric::Clisi,
        Metric::IsolatedLabels,
        Metric::Bras,
        Metric::Ilisi,
        Metric::Kbet,
        Metric::GraphConnectivity,
        Metric::PcrComparison,
    ];

    pub const ALIGNMENT: [Metric; 3] = [Metric::LabelTransfer, Metric::AlignmentScore, Metric::Foscttm];

    pub fn name(self) -> &'static str {
        match self {
            Metric::LabelTransfer => "label_transfer",
            Metric::AlignmentScore => "alignment_score",
            Metric::Foscttm => "foscttm",
            Metric::Nmi => "nmi",
            Metric::Ari => "ari",
            Metric::SilhouetteLabel => "silhouette_label",
            Metric::Clisi => "clisi",
            Metric::IsolatedLabels => "isolated_labels",
            Metric::Bras => "bras",
            Metric::Ilisi => "ilisi",
            Metric::Kbet => "kbet",
            Metric::GraphConnectivity => "graph_connectivity",
            Metric::PcrComparison => "pcr_comparison",
        }
    }

    pub fn is_bio(self) -> bool {
        matches!(
            self,
            Metric::Nmi | Metric::Ari | Metric::SilhouetteLabel | Metric::Clisi | Metric::IsolatedLabels
        )
    }

    pub fn is_batch(self) -> bool {
        matches!(
            self,
            Metric::Bras | Metric::Ilisi | Metric::Kbet | Metric::GraphConnectivity | Metric::PcrComparison
        )
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::param(format!("unknown metric '{s}'")))
    }
}

/// Parses a comma-separated selection; `all`, `alignment`, `bio` and `batch`
/// expand to groups.
pub fn parse_selection(spec: &str) -> Result<Vec<Metric>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part {
            "all" => out.extend(Metric::ALL),
            "alignment" => out.extend(Metric::ALIGNMENT),
            "bio" => out.extend(Metric::ALL.iter().filter(|m| m.is_bio())),
            "batch" => out.extend(Metric::ALL.iter().filter(|m| m.is_batch())),
            name => out.push(name.parse()?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Inputs shared by the integration metrics: one embedding over all cells,
/// ground-truth labels and batch (or domain) ids.
#[derive(Debug, Clone, Copy)]
pub struct IntegrationInput<'a> {
    pub embedding: ArrayView2<'a, f64>,
    pub labels: &'a [usize],
    pub batches: &'a [usize],
    /// Pre-integration features in a common space, needed by PCR.
    pub raw: Option<ArrayView2<'a, f64>>,
}

/// Computes the selected integration metrics; alignment metrics in the
/// selection are ignored here. PCR is skipped without raw features.
pub fn integration_scores(
    input: &IntegrationInput,
    selection: &[Metric],
    rng: &RngConfig,
) -> Result<Vec<(Metric, f64)>> {
    let x = input.embedding;
    let n_labels = {
        let mut l = input.labels.to_vec();
        l.sort_unstable();
        l.dedup();
        l.len()
    };
    let mut clusters: Option<Vec<usize>> = None;
    let mut out = Vec::new();
    for &metric in selection {
        let value = match metric {
            Metric::Nmi | Metric::Ari => {
                let c = clusters.get_or_insert_with(|| {
                    kmeans_clusters(x, n_labels, &mut rng.stream(streams::METRICS))
                });
                if metric == Metric::Nmi {
                    nmi(input.labels, c)?
                } else {
                    // reported on the same [0, 1] scale as the other scores
                    ari(input.labels, c)?.max(0.0)
                }
            }
            Metric::SilhouetteLabel => silhouette_label(x, input.labels)?,
            Metric::Clisi => clisi(x, input.labels, DEFAULT_PERPLEXITY)?,
            Metric::IsolatedLabels => isolated_labels(x, input.labels, input.batches)?,
            Metric::Bras => bras(x, input.batches, input.labels)?,
            Metric::Ilisi => ilisi(x, input.batches, DEFAULT_PERPLEXITY)?,
            Metric::Kbet => kbet(
                x,
                input.batches,
                input.labels,
                &KbetParams::default(),
                &mut rng.substream(streams::METRICS, 1),
            )?,
            Metric::GraphConnectivity => graph_connectivity(x, input.labels, CONNECTIVITY_K)?,
            Metric::PcrComparison => match input.raw {
                Some(raw) => pcr_comparison(raw, x, input.batches)?,
                None => {
                    log::warn!("pcr_comparison needs features in a shared space; skipped");
                    continue;
                }
            },
            Metric::LabelTransfer | Metric::AlignmentScore | Metric::Foscttm => continue,
        };
        out.push((metric, value));
    }
    Ok(out)
}

/// A joint embedding of source rows `0..n` followed by target rows, with the
/// ground truth the alignment is judged against.
#[derive(Debug, Clone, Copy)]
pub struct AlignmentInput<'a> {
    pub embedding: ArrayView2<'a, f64>,
    pub source_labels: &'a [usize],
    pub target_labels: &'a [usize],
    /// Target rows whose labels were hidden during alignment.
    pub masked_target: &'a [usize],
    /// Source row `i` truly corresponds to target row `correspondence[i]`.
    pub correspondence: Option<&'a [usize]>,
}

/// Label transfer (source to masked target), alignment score and FOSCTTM
/// from the selection; FOSCTTM needs a known correspondence.
pub fn alignment_scores(input: &AlignmentInput, selection: &[Metric], k: usize) -> Result<Vec<(Metric, f64)>> {
    let n = input.source_labels.len();
    let m = input.target_labels.len();
    if input.embedding.nrows() != n + m {
        return Err(Error::dims(format!(
            "embedding has {} rows for {n} source and {m} target samples",
            input.embedding.nrows()
        )));
    }
    let (src, dst) = input.embedding.split_at(Axis(0), n);
    let mut out = Vec::new();
    for &metric in selection {
        let value = match metric {
            Metric::LabelTransfer => {
                if input.masked_target.is_empty() {
                    log::warn!("label_transfer needs masked target samples; skipped");
                    continue;
                }
                let queries = dst.select(Axis(0), input.masked_target);
                let truth: Vec<usize> = input.masked_target.iter().map(|&i| input.target_labels[i]).collect();
                label_transfer_accuracy(src, input.source_labels, queries.view(), &truth, k)?
            }
            Metric::AlignmentScore => {
                let domain: Vec<usize> = (0..n + m).map(|i| usize::from(i >= n)).collect();
                alignment_score(input.embedding, &domain, k)?
            }
            Metric::Foscttm => match input.correspondence {
                Some(c) => foscttm(src, dst.select(Axis(0), c).view())?,
                None => {
                    log::warn!("foscttm needs a known correspondence; skipped");
                    continue;
                }
            },
            _ => continue,
        };
        out.push((metric, value));
    }
    Ok(out)
}

/// Group means of the integration scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    /// Mean over seven biological slots; the two graph-clustering slots are
    /// filled with the k-means NMI and ARI.
    pub bio: Option<f64>,
    pub batch: Option<f64>,
    pub substituted_slots: Vec<String>,
}

pub fn aggregate(scores: &[(Metric, f64)]) -> Aggregate {
    let get = |m: Metric| scores.iter().find(|(k, _)| *k == m).map(|(_, v)| *v);
    let bio_slots = [
        get(Metric::IsolatedLabels),
        get(Metric::Nmi),
        get(Metric::Ari),
        get(Metric::SilhouetteLabel),
        get(Metric::Clisi),
        get(Metric::Nmi),
        get(Metric::Ari),
    ];
    let batch_slots = [
        get(Metric::Bras),
        get(Metric::Ilisi),
        get(Metric::Kbet),
        get(Metric::GraphConnectivity),
        get(Metric::PcrComparison),
    ];
    let mean = |v: &[Option<f64>]| {
        let present: Vec<f64> = v.iter().flatten().copied().collect();
        (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
    };
    let mut substituted = Vec::new();
    if get(Metric::Nmi).is_some() {
        substituted.push("leiden_nmi <- nmi".to_string());
    }
    if get(Metric::Ari).is_some() {
        substituted.push("leiden_ari <- ari".to_string());
    }
    Aggregate {
        bio: mean(&bio_slots),
        batch: mean(&batch_slots),
        substituted_slots: substituted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_equal(v: f64) -> Vec<(Metric, f64)> {
        Metric::ALL.iter().map(|&m| (m, v)).collect()
    }

    #[test]
    fn aggregate_endpoints() {
        let a = aggregate(&all_equal(1.0));
        assert_eq!((a.bio, a.batch), (Some(1.0), Some(1.0)));
        let a = aggregate(&all_equal(0.0));
        assert_eq!((a.bio, a.batch), (Some(0.0), Some(0.0)));
        assert_eq!(a.substituted_slots.len(), 2);
    }

    #[test]
    fn aggregate_mixed_by_hand() {
        let scores = vec![
            (Metric::IsolatedLabels, 0.1),
            (Metric::Nmi, 0.2),
            (Metric::Ari, 0.3),
            (Metric::SilhouetteLabel, 0.4),
            (Metric::Clisi, 0.5),
            (Metric::Bras, 0.6),
            (Metric::Ilisi, 0.7),
            (Metric::Kbet, 0.8),
            (Metric::GraphConnectivity, 0.9),
            (Metric::PcrComparison, 1.0),
        ];
        let a = aggregate(&scores);
        assert!((a.bio.unwrap() - (0.1 + 0.2 + 0.3 + 0.4 + 0.5 + 0.2 + 0.3) / 7.0).abs() < 1e-15);
        assert!((a.batch.unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn perfect_overlay_scores() {
        // target rows are the source rows in reverse order
        let src = ndarray::array![[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]];
        let mut x = ndarray::Array2::zeros((8, 2));
        for i in 0..4 {
            x.row_mut(i).assign(&src.row(i));
            x.row_mut(4 + 3 - i).assign(&src.row(i));
        }
        let labels = [0, 1, 0, 1];
        let target_labels = [1, 0, 1, 0];
        let input = AlignmentInput {
            embedding: x.view(),
            source_labels: &labels,
            target_labels: &target_labels,
            masked_target: &[0, 2],
            correspondence: Some(&[3, 2, 1, 0]),
        };
        let s = alignment_scores(&input, &Metric::ALIGNMENT, 1).unwrap();
        assert_eq!(s[0], (Metric::LabelTransfer, 1.0));
        assert_eq!(s[2], (Metric::Foscttm, 0.0));
        // the nearest other point is the coincident twin from the other domain
        assert_eq!(s[1].1, 2.0);
    }

    #[test]
    fn selection_parsing() {
        assert_eq!(parse_selection("nmi, foscttm").unwrap(), vec![Metric::Foscttm, Metric::Nmi]);
        assert_eq!(parse_selection("all").unwrap().len(), 13);
        assert_eq!(parse_selection("batch").unwrap().len(), 5);
        assert!(parse_selection("nope").is_err());
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
    }
}
