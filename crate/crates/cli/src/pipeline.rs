//! Whole runs: the staged pipeline, multi-seed batches and the batch-effect
//! scenario grid.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use ndarray::{concatenate, Axis};
use rayon::prelude::*;
use semalign::bench::{simulate_batches, subsample_larger};
use semalign::domain::mask_labels;
use semalign::embed::landmark_embed;
use semalign::metrics::{aggregate, alignment_scores, integration_scores, AlignmentInput, IntegrationInput, Metric};
use semalign::{LabeledDomain, RngConfig};

use crate::config::{BatchConfig, Config};
use crate::stages::{self, load_dataset, Evaluation, Run};

pub const MANIFEST_JSON: &str = "manifest.json";
pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_SUMMARY_CSV: &str = "results_summary.csv";
pub const GRID_CSV: &str = "grid_report.csv";

pub fn pipeline(cfg: &Config) -> Result<()> {
    let seeds = cfg.run_seeds()?;
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let mut stage_names = Vec::new();
    if let Some(batches) = &cfg.batches {
        grid(cfg, batches, &seeds)?;
        stage_names.push("grid");
    } else {
        let batch_mode = !cfg.seeds.is_empty();
        if cfg.split.is_some() {
            stage_names.push("split");
        }
        stage_names.extend(["align", "embed", "evaluate"]);
        let mut evaluations = Vec::new();
        for &seed in &seeds {
            let dir = if batch_mode {
                cfg.out_dir.join(format!("seed_{seed}"))
            } else {
                cfg.out_dir.clone()
            };
            std::fs::create_dir_all(&dir)?;
            let run = Run { cfg, seed, dir };
            if cfg.split.is_some() {
                stages::split(&run)?;
            }
            stages::align(&run)?;
            stages::embed(&run)?;
            evaluations.push(stages::evaluate(&run)?);
        }
        if batch_mode {
            write_batch_results(&cfg.out_dir, &evaluations)?;
        }
    }
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seeds": seeds,
        "stages": stage_names,
        "config": cfg,
    });
    std::fs::write(cfg.out_dir.join(MANIFEST_JSON), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

/// Metric columns in canonical order over everything any row reported.
fn columns<'a>(rows: impl Iterator<Item = &'a [(Metric, f64)]>) -> Vec<Metric> {
    let mut cols: Vec<Metric> = rows.flat_map(|r| r.iter().map(|(m, _)| *m)).collect();
    cols.sort_unstable();
    cols.dedup();
    cols
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_batch_results(dir: &Path, evaluations: &[Evaluation]) -> Result<()> {
    let cols = columns(evaluations.iter().map(|e| e.scores.as_slice()));
    let mut w = csv::Writer::from_path(dir.join(RESULTS_CSV))?;
    let mut header = vec!["seed".to_string()];
    header.extend(cols.iter().map(|m| m.name().to_string()));
    header.extend(["bio".into(), "batch".into()]);
    w.write_record(&header)?;
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut order = Vec::new();
    for e in evaluations {
        let get = |m: Metric| e.scores.iter().find(|(k, _)| *k == m).map(|(_, v)| *v);
        let mut row = vec![e.seed.to_string()];
        let named: Vec<(String, Option<f64>)> = cols
            .iter()
            .map(|&m| (m.name().to_string(), get(m)))
            .chain([("bio".to_string(), e.aggregate.bio), ("batch".to_string(), e.aggregate.batch)])
            .collect();
        for (name, v) in named {
            row.push(cell(v));
            if !order.contains(&name) {
                order.push(name.clone());
            }
            if let Some(v) = v {
                values.entry(name).or_default().push(v);
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(RESULTS_SUMMARY_CSV))?;
    w.write_record(["metric", "mean", "std", "runs"])?;
    for name in order {
        let Some(v) = values.get(&name) else { continue };
        let (mean, std) = mean_std(v);
        w.write_record([name, mean.to_string(), std.to_string(), v.len().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct GridRow {
    seed: u64,
    noise: f64,
    dropout: f64,
    scores: Vec<(Metric, f64)>,
    bio: Option<f64>,
    batch: Option<f64>,
}

fn grid(cfg: &Config, batches: &BatchConfig, seeds: &[u64]) -> Result<()> {
    let scenarios = batches.scenarios();
    let selection = cfg.selection()?;
    let mut rows = Vec::new();
    for &seed in seeds {
        let (truth, _) = load_dataset(cfg, seed)?;
        if !truth.unlabeled_indices().is_empty() {
            return Err(semalign::Error::InvalidData("batch simulation needs a fully labeled dataset".into()).into());
        }
        let results: Vec<Result<GridRow>> = scenarios
            .par_iter()
            .map(|&(noise, dropout)| {
                scenario(cfg, &truth, seed, noise, dropout, &selection)
                    .with_context(|| format!("scenario noise={noise} dropout={dropout} seed={seed}"))
            })
            .collect();
        for r in results {
            rows.push(r?);
        }
    }
    let cols = columns(rows.iter().map(|r| r.scores.as_slice()));
    let mut w = csv::Writer::from_path(cfg.out_dir.join(GRID_CSV))?;
    let mut header: Vec<String> = ["seed", "noise", "dropout"].map(String::from).to_vec();
    header.extend(cols.iter().map(|m| m.name().to_string()));
    header.extend(["bio".into(), "batch".into()]);
    w.write_record(&header)?;
    for r in &rows {
        let mut out = vec![r.seed.to_string(), r.noise.to_string(), r.dropout.to_string()];
        for &m in &cols {
            out.push(cell(r.scores.iter().find(|(k, _)| *k == m).map(|(_, v)| *v)));
        }
        out.push(cell(r.bio));
        out.push(cell(r.batch));
        w.write_record(&out)?;
    }
    w.flush()?;
    log::info!("wrote {} scenario rows to {}", rows.len(), cfg.out_dir.join(GRID_CSV).display());
    Ok(())
}

/// One batch-effect scenario: the clean half is the source domain and the
/// corrupted half, with hidden labels, the target.
fn scenario(
    cfg: &Config,
    truth: &LabeledDomain,
    seed: u64,
    noise: f64,
    dropout: f64,
    selection: &[Metric],
) -> Result<GridRow> {
    let rng = RngConfig::new(seed);
    let pair = simulate_batches(truth, noise, dropout, &rng)?;
    let sub = subsample_larger(&pair.first.renamed("A"), &pair.second.renamed("B"), &rng)?;
    let target = mask_labels(&sub.b, cfg.mask_fraction, &rng)?;
    let aligned = semalign::align::align(&sub.a, &target, &cfg.align_params(), &rng)?;
    let emb = landmark_embed(&aligned.joint, &cfg.embed, &rng)?;

    let n = sub.a.len();
    let labels: Vec<usize> = sub
        .a
        .labels()
        .iter()
        .chain(sub.b.labels())
        .map(|l| l.expect("fully labeled"))
        .collect();
    let batches: Vec<usize> = (0..2 * n).map(|i| usize::from(i >= n)).collect();
    let raw = concatenate(Axis(0), &[sub.a.features().view(), sub.b.features().view()])?;
    let integration: Vec<Metric> = selection.iter().copied().filter(|m| m.is_bio() || m.is_batch()).collect();
    let mut scores = integration_scores(
        &IntegrationInput {
            embedding: emb.coords.view(),
            labels: &labels,
            batches: &batches,
            raw: Some(raw.view()),
        },
        &integration,
        &rng,
    )?;
    let masked = target.unlabeled_indices();
    let transfer: Vec<Metric> = selection
        .iter()
        .copied()
        .filter(|m| matches!(m, Metric::LabelTransfer | Metric::AlignmentScore))
        .collect();
    scores.extend(alignment_scores(
        &AlignmentInput {
            embedding: emb.coords.view(),
            source_labels: &labels[..n],
            target_labels: &labels[n..],
            masked_target: &masked,
            correspondence: None,
        },
        &transfer,
        cfg.k,
    )?);
    scores.sort_by_key(|(m, _)| *m);
    let agg = aggregate(&scores);
    Ok(GridRow {
        seed,
        noise,
        dropout,
        scores,
        bio: agg.bio,
        batch: agg.batch,
    })
}
