//! The four pipeline stages. Each reads its inputs from files, writes its
//! outputs into the run directory and leaves a stage record next to them.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use ndarray::{concatenate, Array2, Axis};
use semalign::bench::{blobs, split as split_domain, subsample_larger};
use semalign::domain::{mask_labels, read_labeled_csv};
use semalign::embed::{landmark_embed, read_embedding_csv, write_embedding_csv, EmbeddedSample};
use semalign::metrics::{
    aggregate, alignment_scores, foscttm, integration_scores, Aggregate, AlignmentInput, IntegrationInput, Metric,
};
use semalign::sparse::{AffinityMatrix, CsrMatrix};
use semalign::{Coupling, LabeledDomain, RngConfig};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::record::{peak_rss_kib, record_time, StageRecord, StageTime};
use crate::svg;
use crate::UsageError;

pub const SOURCE_CSV: &str = "A.csv";
pub const TARGET_CSV: &str = "B.csv";
pub const CORRESPONDENCE_CSV: &str = "correspondence.csv";
pub const SPLIT_MANIFEST: &str = "split.toml";
pub const COUPLING_CSV: &str = "coupling.csv";
pub const JOINT_CSV: &str = "joint_affinity.csv";
pub const SAMPLES_CSV: &str = "samples.csv";
pub const EMBEDDING_CSV: &str = "embedding.csv";
pub const DOMAIN_SVG: &str = "embedding_domain.svg";
pub const LABEL_SVG: &str = "embedding_label.svg";
pub const EMBED_INFO_JSON: &str = "embed_info.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const SUMMARY_JSON: &str = "summary.json";

/// One seed's run in one directory.
pub struct Run<'a> {
    pub cfg: &'a Config,
    pub seed: u64,
    pub dir: PathBuf,
}

impl Run<'_> {
    fn rng(&self) -> RngConfig {
        RngConfig::new(self.seed)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&self, stage: &str, inputs: &[(&str, &Path)], outputs: &[&str]) -> StageRecord {
        StageRecord {
            stage: stage.into(),
            seed: self.seed,
            inputs: inputs
                .iter()
                .map(|(k, p)| (k.to_string(), p.display().to_string()))
                .collect(),
            config: self.cfg.fingerprint(self.seed),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn reuse(&self, record: &StageRecord) -> bool {
        let hit = self.cfg.resume && record.is_current(&self.dir);
        if hit {
            log::info!("{}: outputs in {} are current, skipping", record.stage, self.dir.display());
        }
        hit
    }
}

/// The dataset a split or batch simulation starts from.
pub fn load_dataset(cfg: &Config, seed: u64) -> Result<(LabeledDomain, Option<PathBuf>)> {
    if let Some(path) = &cfg.input.data {
        let d = read_labeled_csv(path, &cfg.input.label_column).with_context(|| format!("loading {}", path.display()))?;
        Ok((d, Some(path.clone())))
    } else if let Some(params) = &cfg.synthetic {
        Ok((blobs(params, &RngConfig::new(seed))?, None))
    } else {
        Err(UsageError("no dataset: set input.data (or --data) or a [synthetic] section".into()).into())
    }
}

pub fn split(run: &Run) -> Result<()> {
    let spec = run
        .cfg
        .split_spec(run.seed)?
        .ok_or_else(|| UsageError("the split stage needs a [split] section or --split".into()))?;
    let outputs = [SOURCE_CSV, TARGET_CSV, CORRESPONDENCE_CSV, SPLIT_MANIFEST];
    let data = run.cfg.input.data.clone().unwrap_or_else(|| PathBuf::from("<synthetic>"));
    let record = run.record("split", &[("data", &data)], &outputs);
    if run.reuse(&record) {
        return Ok(());
    }
    let clock = Instant::now();
    let (truth, _) = load_dataset(run.cfg, run.seed)?;
    let out = split_domain(&truth, &spec)?;
    out.a.write_csv(&run.path(SOURCE_CSV))?;
    out.b.write_csv(&run.path(TARGET_CSV))?;
    Coupling::new(out.correspondence.clone())?.write_csv(&run.path(CORRESPONDENCE_CSV))?;
    std::fs::write(run.path(SPLIT_MANIFEST), toml::to_string(&out.manifest)?)?;
    record.write(&run.dir)?;
    record_time(&run.dir, "split", timed(clock, BTreeMap::new()))
}

fn timed(clock: Instant, parts: BTreeMap<String, f64>) -> StageTime {
    StageTime {
        seconds: clock.elapsed().as_secs_f64(),
        peak_rss_kib: peak_rss_kib(),
        parts,
    }
}

/// Where the two domains come from: explicit inputs, or the split outputs in
/// the run directory.
struct DomainInputs {
    source: PathBuf,
    target: PathBuf,
    label_column: String,
    correspondence: Option<PathBuf>,
}

fn domain_inputs(run: &Run) -> Result<DomainInputs> {
    let cfg = run.cfg;
    match (&cfg.input.source, &cfg.input.target) {
        (Some(s), Some(t)) => Ok(DomainInputs {
            source: s.clone(),
            target: t.clone(),
            label_column: cfg.input.label_column.clone(),
            correspondence: cfg.input.correspondence.clone(),
        }),
        (None, None) => {
            let (s, t) = (run.path(SOURCE_CSV), run.path(TARGET_CSV));
            if !s.exists() || !t.exists() {
                return Err(UsageError(format!(
                    "no domains: set input.source and input.target, or run the split stage into {}",
                    run.dir.display()
                ))
                .into());
            }
            let corr = run.path(CORRESPONDENCE_CSV);
            Ok(DomainInputs {
                source: s,
                target: t,
                label_column: "label".into(),
                correspondence: cfg.input.correspondence.clone().or_else(|| corr.exists().then_some(corr)),
            })
        }
        _ => Err(UsageError("input.source and input.target must be given together".into()).into()),
    }
}

/// One row per aligned sample: its domain, position, row in the input file,
/// the label the method saw and the true label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub domain: String,
    pub index: usize,
    pub row: usize,
    pub label: Option<String>,
    pub true_label: Option<String>,
}

fn label_name(d: &LabeledDomain, i: usize) -> Option<String> {
    d.labels()[i].map(|c| d.class_names()[c].clone())
}

pub fn write_samples(path: &Path, rows: &[SampleRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<Vec<SampleRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn align(run: &Run) -> Result<()> {
    let inputs = domain_inputs(run)?;
    let mut outputs = vec![COUPLING_CSV, JOINT_CSV, SAMPLES_CSV];
    if run.cfg.dump_affinities {
        outputs.extend(["affinity_A.csv", "affinity_B.csv", "affinity_AB.csv", "profiles_A.csv", "profiles_B.csv"]);
    }
    let record = run.record(
        "align",
        &[("source", &inputs.source), ("target", &inputs.target)],
        &outputs,
    );
    if run.reuse(&record) {
        return Ok(());
    }
    let clock = Instant::now();
    let rng = run.rng();
    let a = read_labeled_csv(&inputs.source, &inputs.label_column)
        .with_context(|| format!("loading {}", inputs.source.display()))?
        .renamed("A");
    let truth_b = read_labeled_csv(&inputs.target, &inputs.label_column)
        .with_context(|| format!("loading {}", inputs.target.display()))?
        .renamed("B");
    let b = mask_labels(&truth_b, run.cfg.mask_fraction, &rng)?;
    if a.len() != b.len() && !run.cfg.subsample {
        return Err(semalign::Error::DimensionMismatch(format!(
            "source has {} samples and target {}; pass --subsample to subsample the larger domain, \
             class-stratified, down to the smaller size (oversampling is not supported)",
            a.len(),
            b.len()
        ))
        .into());
    }
    let sub = subsample_larger(&a, &b, &rng)?;
    let aligned = semalign::align::align(&sub.a, &sub.b, &run.cfg.align_params(), &rng)?;

    aligned.coupling.write_csv(&run.path(COUPLING_CSV))?;
    aligned.joint.write_triplets(&run.path(JOINT_CSV))?;
    let mut rows = Vec::with_capacity(sub.a.len() * 2);
    for (k, &r) in sub.rows_a.iter().enumerate() {
        rows.push(SampleRow {
            domain: "A".into(),
            index: k,
            row: r,
            label: label_name(&sub.a, k),
            true_label: label_name(&a, r),
        });
    }
    for (k, &r) in sub.rows_b.iter().enumerate() {
        rows.push(SampleRow {
            domain: "B".into(),
            index: k,
            row: r,
            label: label_name(&sub.b, k),
            true_label: label_name(&truth_b, r),
        });
    }
    write_samples(&run.path(SAMPLES_CSV), &rows)?;
    if run.cfg.dump_affinities {
        aligned.w_a.write_triplets(&run.path("affinity_A.csv"))?;
        aligned.w_b.write_triplets(&run.path("affinity_B.csv"))?;
        aligned.w_ab.write_triplets(&run.path("affinity_AB.csv"))?;
        aligned.profile_a.write_csv(&run.path("profiles_A.csv"))?;
        aligned.profile_b.write_csv(&run.path("profiles_B.csv"))?;
    }
    log::info!(
        "coupled {} pairs, transport cost {:.6}, {} fixed points",
        aligned.coupling.len(),
        aligned.transport_cost,
        aligned.coupling.fixed_points()
    );
    record.write(&run.dir)?;
    let parts = aligned.timings.iter().map(|t| (t.stage.to_string(), t.seconds)).collect();
    record_time(&run.dir, "align", timed(clock, parts))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EmbedInfo {
    diffusion_time: usize,
    landmark_mode: bool,
    degenerate: bool,
}

pub fn embed(run: &Run) -> Result<()> {
    let (samples_path, joint_path) = (run.path(SAMPLES_CSV), run.path(JOINT_CSV));
    for p in [&samples_path, &joint_path] {
        if !p.exists() {
            return Err(UsageError(format!("{} is missing; run the align stage first", p.display())).into());
        }
    }
    let record = run.record(
        "embed",
        &[("samples", &samples_path), ("joint", &joint_path)],
        &[EMBEDDING_CSV, DOMAIN_SVG, LABEL_SVG, EMBED_INFO_JSON],
    );
    if run.reuse(&record) {
        return Ok(());
    }
    let clock = Instant::now();
    let samples = read_samples(&samples_path)?;
    let n = samples.len();
    let w = AffinityMatrix::new(CsrMatrix::read_triplets(&joint_path, n, n)?)?;
    let emb = landmark_embed(&w, &run.cfg.embed, &run.rng())?;
    if emb.degenerate {
        log::warn!("degenerate potential geometry; coordinates are all zero");
    }
    let embedded: Vec<EmbeddedSample> = samples
        .iter()
        .map(|s| EmbeddedSample {
            domain: s.domain.clone(),
            index: s.index,
            label: s.label.clone(),
        })
        .collect();
    write_embedding_csv(&run.path(EMBEDDING_CSV), &embedded, &emb.coords)?;
    let domains: Vec<Option<String>> = samples.iter().map(|s| Some(s.domain.clone())).collect();
    let labels: Vec<Option<String>> = samples
        .iter()
        .map(|s| s.true_label.clone().or_else(|| s.label.clone()))
        .collect();
    svg::scatter(&run.path(DOMAIN_SVG), emb.coords.view(), &domains, "embedding by domain")?;
    svg::scatter(&run.path(LABEL_SVG), emb.coords.view(), &labels, "embedding by label")?;
    log::info!(
        "embedded {n} samples in {} dimensions (t = {}, landmarks: {})",
        emb.coords.ncols(),
        emb.t,
        emb.landmark_mode
    );
    let info = EmbedInfo {
        diffusion_time: emb.t,
        landmark_mode: emb.landmark_mode,
        degenerate: emb.degenerate,
    };
    std::fs::write(run.path(EMBED_INFO_JSON), serde_json::to_string_pretty(&info)? + "\n")?;
    record.write(&run.dir)?;
    record_time(&run.dir, "embed", timed(clock, BTreeMap::new()))
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub seed: u64,
    pub scores: Vec<(Metric, f64)>,
    pub aggregate: Aggregate,
}

pub fn evaluate(run: &Run) -> Result<Evaluation> {
    let samples = read_samples(&run.path(SAMPLES_CSV))?;
    let (embedded, coords) = read_embedding_csv(&run.path(EMBEDDING_CSV))?;
    if embedded.len() != samples.len()
        || embedded
            .iter()
            .zip(&samples)
            .any(|(e, s)| e.domain != s.domain || e.index != s.index)
    {
        bail!(semalign::Error::DimensionMismatch(
            "embedding rows do not match the aligned samples".into()
        ));
    }
    let selection = run.cfg.selection()?;
    let inputs = domain_inputs(run)?;

    let n = samples.iter().filter(|s| s.domain == "A").count();
    let (src_rows, dst_rows) = samples.split_at(n);
    let mut names: Vec<&str> = samples.iter().filter_map(|s| s.true_label.as_deref()).collect();
    names.sort_unstable();
    names.dedup();
    let id = |s: &SampleRow| s.true_label.as_deref().map(|l| names.binary_search(&l).expect("collected"));
    let truth: Vec<Option<usize>> = samples.iter().map(id).collect();
    let all_known = truth.iter().all(Option::is_some);
    let truth_or_zero: Vec<usize> = truth.iter().map(|t| t.unwrap_or(0)).collect();
    let masked: Vec<usize> = dst_rows
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label.is_none() && s.true_label.is_some())
        .map(|(k, _)| k)
        .collect();

    let mut scores = Vec::new();
    let align_sel: Vec<Metric> = selection
        .iter()
        .copied()
        .filter(|m| matches!(m, Metric::LabelTransfer | Metric::AlignmentScore))
        .collect();
    let source_known = truth[..n].iter().all(Option::is_some);
    let align_sel: Vec<Metric> = align_sel
        .into_iter()
        .filter(|&m| {
            let ok = m != Metric::LabelTransfer || source_known;
            if !ok {
                log::warn!("label_transfer needs every source label; skipped");
            }
            ok
        })
        .collect();
    let input = AlignmentInput {
        embedding: coords.view(),
        source_labels: &truth_or_zero[..n],
        target_labels: &truth_or_zero[n..],
        masked_target: &masked,
        correspondence: None,
    };
    scores.extend(alignment_scores(&input, &align_sel, run.cfg.k)?);

    if selection.contains(&Metric::Foscttm) {
        match &inputs.correspondence {
            Some(path) => {
                let corr = Coupling::read_csv(path)?;
                let pos_b: HashMap<usize, usize> = dst_rows.iter().enumerate().map(|(k, s)| (s.row, k)).collect();
                let pairs: Vec<(usize, usize)> = src_rows
                    .iter()
                    .enumerate()
                    .filter_map(|(k, s)| {
                        let t = *corr.forward().get(s.row)?;
                        pos_b.get(&t).map(|&q| (k, n + q))
                    })
                    .collect();
                if pairs.is_empty() {
                    log::warn!("no corresponding pairs survived subsampling; foscttm skipped");
                } else {
                    let a = coords.select(Axis(0), &pairs.iter().map(|p| p.0).collect::<Vec<_>>());
                    let b = coords.select(Axis(0), &pairs.iter().map(|p| p.1).collect::<Vec<_>>());
                    scores.push((Metric::Foscttm, foscttm(a.view(), b.view())?));
                }
            }
            None => log::warn!("foscttm needs a known correspondence; skipped"),
        }
    }

    let integration: Vec<Metric> = selection.iter().copied().filter(|m| m.is_bio() || m.is_batch()).collect();
    if !integration.is_empty() {
        if all_known {
            let batches: Vec<usize> = samples.iter().map(|s| usize::from(s.domain == "B")).collect();
            let raw = shared_raw_features(&inputs, &samples, n)?;
            let input = IntegrationInput {
                embedding: coords.view(),
                labels: &truth_or_zero,
                batches: &batches,
                raw: raw.as_ref().map(|r| r.view()),
            };
            scores.extend(integration_scores(&input, &integration, &run.rng())?);
        } else {
            log::warn!("integration metrics need every true label; skipped");
        }
    }
    scores.sort_by_key(|(m, _)| *m);
    let agg = aggregate(&scores);

    let mut w = csv::Writer::from_path(run.path(METRICS_CSV))?;
    w.write_record(["metric", "value"])?;
    for (m, v) in &scores {
        w.write_record([m.name().to_string(), v.to_string()])?;
    }
    w.flush()?;
    let summary = serde_json::json!({
        "seed": run.seed,
        "source_samples": n,
        "target_samples": samples.len() - n,
        "masked_target_samples": masked.len(),
        "metrics": scores.iter().map(|(m, v)| (m.name(), *v)).collect::<BTreeMap<_, _>>(),
        "aggregate": agg,
    });
    std::fs::write(run.path(SUMMARY_JSON), serde_json::to_string_pretty(&summary)? + "\n")?;
    for (m, v) in &scores {
        log::info!("{m} = {v:.4}");
    }
    Ok(Evaluation {
        seed: run.seed,
        scores,
        aggregate: agg,
    })
}

/// Input features of the aligned rows stacked source-then-target, when both
/// domains share their feature columns.
fn shared_raw_features(inputs: &DomainInputs, samples: &[SampleRow], n: usize) -> Result<Option<Array2<f64>>> {
    let a = read_labeled_csv(&inputs.source, &inputs.label_column)?;
    let b = read_labeled_csv(&inputs.target, &inputs.label_column)?;
    if a.feature_names() != b.feature_names() {
        return Ok(None);
    }
    let rows = |s: &[SampleRow]| s.iter().map(|r| r.row).collect::<Vec<_>>();
    let (sa, sb) = samples.split_at(n);
    let xa = a.features().select(Axis(0), &rows(sa));
    let xb = b.features().select(Axis(0), &rows(sb));
    concatenate(Axis(0), &[xa.view(), xb.view()])
        .map(Some)
        .map_err(|e| anyhow!("stacking features: {e}"))
}
