use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    /// Seed tree: `master`, `module`, and per-replicate or per-volume seeds.
    pub seeds: BTreeMap<String, Vec<u64>>,
    pub started_ms: u64,
    pub finished_ms: u64,
    /// SHA-256 of each output file.
    pub digests: BTreeMap<String, String>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| Error::config(format!("{}:{}", path.display(), e.path()), e.into_inner().to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileCheck {
    pub file: String,
    pub recorded: String,
    pub reproduced: String,
    pub passed: bool,
    /// 1-based line number and both versions of the first differing line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_divergence: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproduceReport {
    pub recorded_hash: String,
    pub config_hash: String,
    pub files: Vec<FileCheck>,
}

impl ReproduceReport {
    pub fn passed(&self) -> bool {
        self.files.iter().all(|f| f.passed)
    }
}

pub(super) fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

pub(super) fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(super) fn seed_tree(cfg: &ExperimentConfig) -> BTreeMap<String, Vec<u64>> {
    let module = cfg.module_seed();
    let mut t = BTreeMap::new();
    t.insert("master".to_string(), vec![cfg.seed]);
    t.insert("module".to_string(), vec![module]);
    let replicas = |n: usize, label: &str| -> Vec<u64> { (0..n as u64).map(|i| derive_seed(module, label, i)).collect() };
    match &cfg.experiment {
        Experiment::Simulate { n_paths: n, .. } | Experiment::PovCesaro { n_paths: n, .. } => {
            t.insert("env".into(), replicas(*n, "env"));
            t.insert("walk".into(), replicas(*n, "walk"));
        }
        Experiment::Zk { params, .. } => {
            t.insert("env".into(), replicas(params.n_replicates, "env"));
            t.insert("walk".into(), replicas(params.n_replicates, "walk"));
        }
        Experiment::Density1d { params, .. } => {
            t.insert("env".into(), replicas(params.n_env, "env"));
        }
        Experiment::Kalikow { family, .. } => {
            let n = match family {
                super::VolumeFamily::NestedBoxes { k } => *k as usize,
                super::VolumeFamily::Intervals { bounds } => bounds.len(),
                super::VolumeFamily::Explicit { volumes } => volumes.len(),
            };
            t.insert("volume".into(), replicas(n, "volume"));
        }
        _ => {}
    }
    t
}

fn first_divergence(a: &str, b: &str) -> Option<String> {
    let mut la = a.lines();
    let mut lb = b.lines();
    let mut n = 1;
    loop {
        match (la.next(), lb.next()) {
            (None, None) => return None,
            (x, y) if x == y => n += 1,
            (x, y) => {
                return Some(format!("line {n}: recorded {} / reproduced {}", x.unwrap_or("<eof>"), y.unwrap_or("<eof>")))
            }
        }
    }
}

/// Re-run the config embedded in a manifest inside `scratch` and compare
/// every recorded digest. A different artifact version is an error.
pub fn reproduce(manifest_path: &Path, scratch: &Path, workers: Option<usize>) -> Result<ReproduceReport> {
    let m = RunManifest::load(manifest_path)?;
    if m.artifact_version != ARTIFACT_VERSION {
        return Err(Error::VersionMismatch { recorded: m.artifact_version, running: ARTIFACT_VERSION.to_string() });
    }
    let mut cfg = m.config.clone();
    cfg.workers = workers.or(cfg.workers);
    let out = super::run_experiment(&cfg, Some(scratch))?.out_dir;
    let original_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut files = Vec::new();
    for (name, recorded) in &m.digests {
        let path = out.join(name);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let reproduced = digest(text.as_bytes());
        let passed = *recorded == reproduced;
        let first_divergence = if passed {
            None
        } else {
            match fs::read_to_string(original_dir.join(name)) {
                Ok(orig) => first_divergence(&orig, &text),
                Err(_) => Some("original file unavailable".into()),
            }
        };
        files.push(FileCheck { file: name.clone(), recorded: recorded.clone(), reproduced, passed, first_divergence });
    }
    Ok(ReproduceReport { recorded_hash: m.config_hash, config_hash: cfg.hash(), files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_is_located() {
        assert_eq!(first_divergence("a\nb\n", "a\nb\n"), None);
        assert_eq!(first_divergence("a\nb\n", "a\nc\n").unwrap(), "line 2: recorded b / reproduced c");
        assert!(first_divergence("a\n", "a\nb\n").unwrap().contains("<eof>"));
    }
}
