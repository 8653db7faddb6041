//! Run configuration: a TOML file with sections, overridden by flags.

use std::path::{Path, PathBuf};

use semalign::align::{AlignParams, Solver};
use semalign::bench::{BlobParams, SplitKind, SplitSpec, DROPOUT_LEVELS, NOISE_LEVELS};
use semalign::metrics::{parse_selection, Metric, DEFAULT_K};
use semalign::{EmbedParams, ForestParams, HiRefParams};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    /// Batch mode: one full run per seed plus mean/std aggregation.
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub mask_fraction: f64,
    pub metrics: String,
    /// Neighborhood size for label transfer and the alignment score.
    pub k: usize,
    pub exact: bool,
    pub subsample: bool,
    pub resume: bool,
    pub dump_affinities: bool,
    pub shared_forest_seed: bool,
    pub threads: Option<usize>,
    pub input: InputConfig,
    pub split: Option<SplitConfig>,
    pub batches: Option<BatchConfig>,
    pub synthetic: Option<BlobParams>,
    pub forest: ForestParams,
    pub hiref: HiRefParams,
    pub embed: EmbedParams,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: None,
            seeds: Vec::new(),
            out_dir: PathBuf::from("out"),
            mask_fraction: 0.5,
            metrics: "all".into(),
            k: DEFAULT_K,
            exact: false,
            subsample: false,
            resume: false,
            dump_affinities: false,
            shared_forest_seed: false,
            threads: None,
            input: InputConfig::default(),
            split: None,
            batches: None,
            synthetic: None,
            forest: ForestParams::default(),
            hiref: HiRefParams::default(),
            embed: EmbedParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// One dataset to split into two domains or into two batches.
    pub data: Option<PathBuf>,
    /// Two prepared domains; default to the split outputs in the output directory.
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    /// Known row correspondence between source and target.
    pub correspondence: Option<PathBuf>,
    pub label_column: String,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            data: None,
            source: None,
            target: None,
            correspondence: None,
            label_column: "label".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub kind: String,
    pub noise_ratio: Option<usize>,
    pub sigma: Option<f64>,
}

impl SplitConfig {
    pub fn kind(&self) -> Result<SplitKind, UsageError> {
        let mut kind: SplitKind = self.kind.parse().map_err(|e| UsageError(format!("{e}")))?;
        match (&mut kind, self.noise_ratio, self.sigma) {
            (SplitKind::AddNoise { noise_ratio }, r, None) => {
                if let Some(r) = r {
                    *noise_ratio = r;
                }
            }
            (SplitKind::Distort { sigma }, None, s) => {
                if let Some(s) = s {
                    *sigma = s;
                }
            }
            (_, None, None) => {}
            _ => {
                return Err(UsageError(format!(
                    "split kind '{}' does not take the given parameter (noise_ratio is for add_noise, sigma for distort)",
                    self.kind
                )))
            }
        }
        Ok(kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchConfig {
    pub noise: Vec<f64>,
    pub dropout: Vec<f64>,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            noise: NOISE_LEVELS.to_vec(),
            dropout: DROPOUT_LEVELS.to_vec(),
        }
    }
}

impl BatchConfig {
    pub fn scenarios(&self) -> Vec<(f64, f64)> {
        self.noise
            .iter()
            .flat_map(|&s| self.dropout.iter().map(move |&p| (s, p)))
            .collect()
    }
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Config =
            toml::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    /// Makes relative paths relative to `base`.
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        for p in [
            &mut self.input.data,
            &mut self.input.source,
            &mut self.input.target,
            &mut self.input.correspondence,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn seed(&self) -> Result<u64, UsageError> {
        self.seed
            .ok_or_else(|| UsageError("a seed is required (--seed or `seed` in the config)".into()))
    }

    /// Seeds of a batch run, or the single seed.
    pub fn run_seeds(&self) -> Result<Vec<u64>, UsageError> {
        if self.seeds.is_empty() {
            Ok(vec![self.seed()?])
        } else {
            Ok(self.seeds.clone())
        }
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        if !(0.0..=1.0).contains(&self.mask_fraction) {
            return Err(UsageError(format!("mask_fraction {} outside [0, 1]", self.mask_fraction)));
        }
        if self.k == 0 {
            return Err(UsageError("k must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(UsageError("threads must be positive".into()));
        }
        self.selection()?;
        if let Some(s) = &self.split {
            s.kind()?;
        }
        if self.input.data.is_some() && self.synthetic.is_some() {
            return Err(UsageError("give either input.data or a [synthetic] section, not both".into()));
        }
        for p in [&self.input.data, &self.input.source, &self.input.target, &self.input.correspondence]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(UsageError(format!("input file {} does not exist", p.display())));
            }
        }
        self.forest.validate().map_err(|e| UsageError(e.to_string()))?;
        self.hiref.validate().map_err(|e| UsageError(e.to_string()))?;
        self.embed.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(())
    }

    pub fn selection(&self) -> Result<Vec<Metric>, UsageError> {
        parse_selection(&self.metrics).map_err(|e| UsageError(e.to_string()))
    }

    pub fn split_spec(&self, seed: u64) -> Result<Option<SplitSpec>, UsageError> {
        self.split
            .as_ref()
            .map(|s| Ok(SplitSpec { kind: s.kind()?, seed }))
            .transpose()
    }

    pub fn align_params(&self) -> AlignParams {
        AlignParams {
            forest: self.forest,
            hiref: self.hiref.clone(),
            solver: if self.exact { Solver::Exact } else { Solver::Hierarchical },
            shared_forest_seed: self.shared_forest_seed,
            ..AlignParams::default()
        }
    }

    /// Everything that influences results for one seed; run-control settings
    /// are left out so that they never invalidate earlier outputs.
    pub fn fingerprint(&self, seed: u64) -> serde_json::Value {
        let mut c = self.clone();
        c.seed = Some(seed);
        c.seeds.clear();
        c.out_dir = PathBuf::new();
        c.resume = false;
        c.threads = None;
        serde_json::to_value(c).expect("config serializes")
    }
}
