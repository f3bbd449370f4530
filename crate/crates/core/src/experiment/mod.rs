//! Experiment configs, runs and replay.
//!
//! A run writes four files to its output directory: `records.jsonl` (one
//! tagged record per line), `summary.txt` and `summary.json` (the same
//! table, recomputed from the records), and `manifest.json`.
//!
//! Seeds form a tree. The module seed is `derive_seed(master, kind, 0)`;
//! replicate `i` uses `derive_seed(module, "env", i)` for its environment and
//! `derive_seed(module, "walk", i)` for its walk; volume `id` of a Kalikow
//! scan uses `derive_seed(module, "volume", id)`. `derive_seed` is SplitMix64
//! over the parent, an FNV-1a hash of the label, and the index.

mod manifest;
mod run;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::environment::EnvironmentModel;
use crate::error::{Error, Result};
use crate::gibbs::GibbsSpec;
use crate::lattice::{Direction, Site};
use crate::pov::{AdmissibilityParams, DensityParams, LocalFunction};
use crate::seed::derive_seed;
use crate::walk::{MixingConstants, StopRule};

pub use manifest::{reproduce, FileCheck, ReproduceReport, RunManifest, ARTIFACT_VERSION};
pub use run::{run_experiment, summarize, Check, Record, RunOutcome, Summary, SummaryRow};

/// Volume families for Kalikow scans.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VolumeFamily {
    /// `[-n, n]^d` for `n = 1..=k`.
    NestedBoxes { k: i32 },
    /// Explicit 1-D intervals `[a, b]`.
    Intervals { bounds: Vec<(i32, i32)> },
    /// Explicit site lists.
    Explicit { volumes: Vec<Vec<Site>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationCase {
    pub volume: Vec<Site>,
    pub lambda: Vec<Site>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCase {
    pub lambda: Vec<Site>,
    pub h: i32,
}

/// What to run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Simulate {
        n_paths: usize,
        horizon: usize,
        #[serde(default = "fixed_length")]
        stop: StopRule,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ell: Option<Direction>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        tau_levels: Vec<i64>,
        /// Checked against the velocity with `tolerances.velocity`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_velocity: Option<Vec<f64>>,
    },
    Kalikow {
        ell: Direction,
        family: VolumeFamily,
        n_env: usize,
    },
    Density1d {
        params: DensityParams,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        oracle_velocity: Option<f64>,
    },
    PovCesaro {
        function: LocalFunction,
        n0: usize,
        n_max: usize,
        n_paths: usize,
    },
    Zk {
        ell: Direction,
        constants: MixingConstants,
        params: AdmissibilityParams,
        epsilon_ref: f64,
    },
    GibbsCheck {
        spec: GibbsSpec,
        /// Base set for the strong-decay family (all sub-volumes are tested).
        base: Vec<Site>,
        /// Volume for the single-site density ratio check; defaults to `base`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ratio_volume: Option<Vec<Site>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        deviation: Vec<DeviationCase>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        conditional: Vec<ConditionalCase>,
    },
    SingularNe {
        n_max: usize,
    },
    Reproduce {
        manifest: PathBuf,
    },
}

fn fixed_length() -> StopRule {
    StopRule::FixedLength
}

impl Experiment {
    pub fn label(&self) -> &'static str {
        match self {
            Experiment::Simulate { .. } => "simulate",
            Experiment::Kalikow { .. } => "kalikow",
            Experiment::Density1d { .. } => "density1d",
            Experiment::PovCesaro { .. } => "pov-cesaro",
            Experiment::Zk { .. } => "zk",
            Experiment::GibbsCheck { .. } => "gibbs-check",
            Experiment::SingularNe { .. } => "singular-ne",
            Experiment::Reproduce { .. } => "reproduce",
        }
    }

    fn needs_model(&self) -> bool {
        !matches!(self, Experiment::GibbsCheck { .. } | Experiment::SingularNe { .. } | Experiment::Reproduce { .. })
    }
}

/// Thresholds for the pass/fail checks in summaries. They never change records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Confidence multiplier.
    pub z: f64,
    pub velocity: f64,
    pub harmonicity: f64,
    pub total_variation: f64,
    /// Required `sup_a Q̃_N(Z_k ≤ a)` as a fraction of `epsilon_ref`.
    pub admissibility_factor: f64,
    /// Arithmetic slack for exact enumeration checks.
    pub enumeration: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            z: 3.0,
            velocity: 0.01,
            harmonicity: 1e-4,
            total_variation: 1e-12,
            admissibility_factor: 0.2,
            enumeration: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<EnvironmentModel>,
    pub seed: u64,
    pub experiment: Experiment,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(model: Option<EnvironmentModel>, seed: u64, experiment: Experiment) -> Self {
        ExperimentConfig { model, seed, experiment, tolerances: Tolerances::default(), out: None, workers: None }
    }

    /// Parse JSON text; errors carry the JSON path of the offending field.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(format!("{origin}:{path}"), e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Canonical text: pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.model, self.experiment.needs_model()) {
            (None, true) => return Err(Error::config("model", format!("required by {}", self.experiment.label()))),
            (Some(m), _) => m.validate().map_err(|e| Error::config("model", e.to_string()))?,
            _ => {}
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be at least 1"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical config without `tolerances`, `out` and `workers`.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            for key in ["tolerances", "out", "workers"] {
                obj.remove(key);
            }
        }
        hex::encode(Sha256::digest(serde_json::to_string(&v).expect("value serializes").as_bytes()))
    }

    /// Root of this run's seed tree.
    pub fn module_seed(&self) -> u64 {
        derive_seed(self.seed, self.experiment.label(), 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig::new(
            Some(EnvironmentModel::deterministic_ne(0)),
            42,
            Experiment::Simulate {
                n_paths: 10,
                horizon: 100,
                stop: StopRule::FixedLength,
                ell: None,
                tau_levels: vec![],
                expect_velocity: Some(vec![0.5, 0.5]),
            },
        )
    }

    #[test]
    fn canonical_round_trip() {
        let c = sample();
        let text = c.to_json();
        let back = ExperimentConfig::from_json(&text, "t").unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn hash_ignores_tolerances_and_plumbing() {
        let c = sample();
        let mut d = c.clone();
        d.tolerances.velocity = 0.5;
        d.workers = Some(8);
        d.out = Some("elsewhere".into());
        assert_eq!(c.hash(), d.hash());
        d.seed = 43;
        assert_ne!(c.hash(), d.hash());
    }

    #[test]
    fn schema_errors_name_the_field() {
        let text = sample().to_json().replace("\"horizon\": 100", "\"horizon\": \"long\"");
        match ExperimentConfig::from_json(&text, "cfg.json") {
            Err(Error::Config { path, message }) => {
                assert!(path.contains("experiment"), "{path}");
                assert!(message.contains("long"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_model_is_rejected() {
        let mut c = sample();
        c.model = None;
        assert!(matches!(c.validate(), Err(Error::Config { .. })));
    }
}
