//! Stage manifests, timings and peak memory.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

/// What a stage was run with; a stage is re-used under `--resume` only when
/// its stored record equals the new one and all of its outputs exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

impl StageRecord {
    pub fn file_name(stage: &str) -> String {
        format!("{stage}.json")
    }

    pub fn is_current(&self, dir: &Path) -> bool {
        let Ok(text) = std::fs::read_to_string(dir.join(Self::file_name(&self.stage))) else {
            return false;
        };
        let Ok(stored) = serde_json::from_str::<StageRecord>(&text) else {
            return false;
        };
        stored == *self && self.outputs.iter().all(|o| dir.join(o).exists())
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join(Self::file_name(&self.stage));
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageTime {
    pub seconds: f64,
    /// Peak resident set size of the process so far, in KiB.
    pub peak_rss_kib: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parts: BTreeMap<String, f64>,
}

/// Adds or replaces one stage in `timings.json`.
pub fn record_time(dir: &Path, stage: &str, time: StageTime) -> anyhow::Result<()> {
    let path = dir.join("timings.json");
    let mut all: BTreeMap<String, StageTime> = std::fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    log::info!("{stage} finished in {:.3}s", time.seconds);
    all.insert(stage.to_string(), time);
    std::fs::write(&path, serde_json::to_string_pretty(&all)? + "\n").with_context(|| format!("writing {}", path.display()))
}

/// `VmHWM` from `/proc/self/status`; `None` where that file does not exist.
pub fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.split_whitespace().next())
        .and_then(|v| v.parse().ok())
}
