use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{self, FileCheck, RunManifest};
use super::{Experiment, ExperimentConfig, VolumeFamily};
use crate::error::{Error, Result};
use crate::gibbs::{
    conditional_ratio_check, density_deviation_check, ds_mixing_family, fit_certificate, single_site_density_ratios,
    ConditionalRatioReport, DensityDeviationReport, DensityRatioReport, MixingSample,
};
use crate::green::FiniteVolume;
use crate::kalikow::{kalikow_epsilon, nested_boxes, VolumeScan, DENOMINATOR_GUARD};
use crate::lattice::{Direction, Site};
use crate::pov::{
    cesaro_expectation, cesaro_converged, doubling_schedule, invariant_density_1d, singular_restriction_check,
    zk_admissibility_run, CesaroPoint, EnvDensity, SingularReport,
};
use crate::stats::{MeanEstimate, RatioEstimate};
use crate::walk::{run_annealed, velocity_estimate, EnsembleSpec, PathRecord};

/// One line of `records.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
pub enum Record {
    Path(PathRecord),
    Volume(VolumeScan),
    Environment(EnvDensity),
    Cesaro(CesaroPoint),
    ZkCell { k: i64, log_a: f64, n: usize, mean: f64, std_err: f64 },
    MixingSample(MixingSample),
    DensityRatio(DensityRatioReport),
    DensityDeviation { volume: Vec<Site>, lambda: Vec<Site>, report: DensityDeviationReport },
    ConditionalRatio(ConditionalRatioReport),
    Restriction(SingularReport),
    FileCheck(FileCheck),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: String,
    pub rows: Vec<SummaryRow>,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn row(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Aligned text table.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).chain(self.checks.iter().map(|c| c.name.len())).max().unwrap_or(4);
        let mut s = String::new();
        let _ = writeln!(s, "kind: {}", self.kind);
        let _ = writeln!(s, "{:<width$}  {:>24}  {:>12}", "quantity", "value", "std_err");
        for r in &self.rows {
            let se = r.std_err.map_or_else(|| "-".to_string(), |e| format!("{e:.6e}"));
            let _ = writeln!(s, "{:<width$}  {:>24}  {:>12}", r.name, format!("{:.12}", r.value), se);
        }
        for c in &self.checks {
            let _ = writeln!(s, "{:<width$}  {:>24}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
        }
        s
    }
}

fn row(name: impl Into<String>, value: f64, std_err: Option<f64>) -> SummaryRow {
    SummaryRow { name: name.into(), value, std_err }
}

fn check(name: impl Into<String>, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

fn family(dim: usize, range: i64, f: &VolumeFamily) -> Result<Vec<FiniteVolume>> {
    match f {
        VolumeFamily::NestedBoxes { k } => nested_boxes(dim, *k, range),
        VolumeFamily::Intervals { bounds } => bounds.iter().map(|(a, b)| FiniteVolume::interval(*a, *b, range)).collect(),
        VolumeFamily::Explicit { volumes } => volumes.iter().map(|v| FiniteVolume::new(v.clone(), range)).collect(),
    }
}

/// Produce the records of a run. Pure in `(config, artifact version)`.
pub(super) fn execute(cfg: &ExperimentConfig, scratch: &Path) -> Result<Vec<Record>> {
    let seed = cfg.module_seed();
    let model = cfg.model.as_ref();
    let need = || model.ok_or_else(|| Error::config("model", "missing"));
    Ok(match &cfg.experiment {
        Experiment::Simulate { n_paths, horizon, stop, ell, tau_levels, .. } => {
            let m = need()?;
            let spec = EnsembleSpec {
                n_paths: *n_paths,
                horizon: *horizon,
                stop: stop.clone(),
                start: Site::origin(m.dim),
                ell: ell.unwrap_or_else(|| Direction::axis(m.dim)),
                tau_levels: tau_levels.clone(),
            };
            run_annealed(m, &spec, seed)?.records.into_iter().map(Record::Path).collect()
        }
        Experiment::Kalikow { ell, family: f, n_env } => {
            let m = need()?;
            let fam = family(m.dim, m.range as i64, f)?;
            let rep = kalikow_epsilon(m, &fam, ell, *n_env, seed, cfg.tolerances.z)?;
            rep.per_volume.into_iter().map(Record::Volume).collect()
        }
        Experiment::Density1d { params, .. } => {
            let t = invariant_density_1d(need()?, params, seed)?;
            t.envs.into_iter().map(Record::Environment).collect()
        }
        Experiment::PovCesaro { function, n0, n_max, n_paths } => {
            let s = cesaro_expectation(need()?, function, &doubling_schedule(*n0, *n_max), *n_paths, seed, cfg.tolerances.z)?;
            s.points.into_iter().map(Record::Cesaro).collect()
        }
        Experiment::Zk { ell, constants, params, epsilon_ref } => {
            let z = zk_admissibility_run(need()?, ell, constants, params, *epsilon_ref, seed)?;
            let mut out = Vec::new();
            for (ki, k) in z.k_list.iter().enumerate() {
                for (ai, a) in z.log_a_grid.iter().enumerate() {
                    for (ni, n) in z.n_list.iter().enumerate() {
                        let e = z.table[ki][ai][ni];
                        out.push(Record::ZkCell { k: *k, log_a: *a, n: *n, mean: e.mean, std_err: e.std_err });
                    }
                }
            }
            out
        }
        Experiment::GibbsCheck { spec, base, ratio_volume, deviation, conditional } => {
            let tol = cfg.tolerances.enumeration;
            let samples = ds_mixing_family(spec, base)?;
            let mut cert = fit_certificate(spec, &samples)?;
            let mut out: Vec<Record> = samples.into_iter().map(Record::MixingSample).collect();
            out.push(Record::DensityRatio(single_site_density_ratios(spec, ratio_volume.as_ref().unwrap_or(base), tol)?));
            for case in deviation {
                let report = density_deviation_check(spec, &case.volume, &case.lambda, &cert, tol)?;
                cert.record(report.max_violation);
                out.push(Record::DensityDeviation { volume: case.volume.clone(), lambda: case.lambda.clone(), report });
            }
            for case in conditional {
                out.push(Record::ConditionalRatio(conditional_ratio_check(spec, &case.lambda, case.h, &cert, tol)?));
            }
            out
        }
        Experiment::SingularNe { n_max } => {
            let mut out = Vec::new();
            for n in 0..=*n_max {
                for k in 0..=n {
                    out.push(Record::Restriction(singular_restriction_check(n, k)?));
                }
            }
            out
        }
        Experiment::Reproduce { manifest: path } => {
            let rep = manifest::reproduce(path, scratch, cfg.workers)?;
            rep.files.into_iter().map(Record::FileCheck).collect()
        }
    })
}

/// Summary table recomputed from the records alone (plus the config).
pub fn summarize(cfg: &ExperimentConfig, records: &[Record]) -> Result<Summary> {
    let tol = &cfg.tolerances;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    match &cfg.experiment {
        Experiment::Simulate { expect_velocity, .. } => {
            let paths: Vec<PathRecord> =
                records.iter().filter_map(|r| if let Record::Path(p) = r { Some(p.clone()) } else { None }).collect();
            let dim = cfg.model.as_ref().map_or(1, |m| m.dim);
            let v = velocity_estimate(&paths, Site::origin(dim))?;
            for a in 0..dim {
                rows.push(row(format!("velocity[{a}]"), v.mean[a], Some(v.std_err[a])));
            }
            rows.push(row("stopped_fraction", paths.iter().filter(|p| p.stopped).count() as f64 / paths.len() as f64, None));
            if let Some(target) = expect_velocity {
                let dev = v.mean.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                checks.push(check("velocity", dev <= tol.velocity, format!("max deviation {dev:.3e} vs {:.3e}", tol.velocity)));
            }
        }
        Experiment::Kalikow { .. } => {
            let best = records
                .iter()
                .filter_map(|r| if let Record::Volume(v) = r { Some(v) } else { None })
                .min_by(|a, b| a.min.ratio.total_cmp(&b.min.ratio))
                .ok_or(Error::EmptyEnsemble)?;
            rows.push(row("epsilon_hat", best.min.ratio, Some(best.min.std_err)));
            rows.push(row("epsilon_volume", best.id as f64, None));
            let lo = best.min.lower(tol.z);
            checks.push(check("epsilon_positive", lo > 0.0, format!("lower bound {lo:.6e}")));
        }
        Experiment::Density1d { params, oracle_velocity } => {
            let envs: Vec<&EnvDensity> =
                records.iter().filter_map(|r| if let Record::Environment(e) = r { Some(e) } else { None }).collect();
            if envs.is_empty() {
                return Err(Error::EmptyEnsemble);
            }
            let range = cfg.model.as_ref().map_or(1, |m| m.range) as f64;
            let w = (0 - params.j_lo) as usize;
            if params.j_lo <= 0 && params.j_hi >= 0 {
                let mu0 = MeanEstimate::from_samples(&envs.iter().map(|e| e.mu[w]).collect::<Vec<_>>())?;
                rows.push(row("mean_mu0", mu0.mean, Some(mu0.std_err)));
                checks.push(check(
                    "mean_mu0_lower_bound",
                    mu0.upper(tol.z) >= 1.0 / range,
                    format!("upper {:.6} vs 1/M = {:.6}", mu0.upper(tol.z), 1.0 / range),
                ));
                let num: Vec<f64> = envs.iter().map(|e| e.mu[w] * e.drift[w]).collect();
                let den: Vec<f64> = envs.iter().map(|e| e.mu[w]).collect();
                let v = RatioEstimate::from_pairs(&num, &den, DENOMINATOR_GUARD)?;
                rows.push(row("velocity", v.ratio, Some(v.std_err)));
                if let Some(o) = oracle_velocity {
                    let ok = (v.ratio - o).abs() <= tol.z * v.std_err;
                    checks.push(check("velocity_oracle", ok, format!("|{:.6} - {o:.6}| vs {:.3e}", v.ratio, tol.z * v.std_err)));
                }
            }
            let gap = envs.iter().map(|e| e.convergence_gap).fold(0.0, f64::max);
            rows.push(row("max_convergence_gap", gap, None));
            if let Some(h) = envs.iter().filter_map(|e| e.harmonicity_residual).reduce(f64::max) {
                rows.push(row("max_harmonicity_residual", h, None));
                checks.push(check("harmonicity", h <= tol.harmonicity, format!("{h:.3e} vs {:.1e}", tol.harmonicity)));
            }
        }
        Experiment::PovCesaro { .. } => {
            let pts: Vec<CesaroPoint> =
                records.iter().filter_map(|r| if let Record::Cesaro(p) = r { Some(p.clone()) } else { None }).collect();
            for p in &pts {
                rows.push(row(format!("N={}", p.n), p.estimate.mean, Some(p.estimate.std_err)));
            }
            rows.push(row("converged", if cesaro_converged(&pts, tol.z) { 1.0 } else { 0.0 }, None));
        }
        Experiment::Zk { params, epsilon_ref, .. } => {
            let n_last = *params.n_list.last().ok_or(Error::EmptyEnsemble)?;
            for k in &params.k_list {
                let best = records
                    .iter()
                    .filter_map(|r| match r {
                        Record::ZkCell { k: kk, n, mean, .. } if kk == k && *n == n_last => Some(*mean),
                        _ => None,
                    })
                    .fold(0.0, f64::max);
                rows.push(row(format!("sup_a[k={k},N={n_last}]"), best, None));
                let need = tol.admissibility_factor * epsilon_ref;
                checks.push(check(format!("admissible[k={k}]"), best >= need, format!("{best:.4} vs {need:.4}")));
            }
        }
        Experiment::GibbsCheck { spec, .. } => {
            let samples: Vec<MixingSample> = records
                .iter()
                .filter_map(|r| if let Record::MixingSample(s) = r { Some(s.clone()) } else { None })
                .collect();
            let cert = fit_certificate(spec, &samples)?;
            rows.push(row("G", cert.big_g, None));
            rows.push(row("g", cert.g, None));
            rows.push(row("C1", cert.c1, None));
            rows.push(row("C", cert.c, None));
            checks.push(check("g_positive", cert.g > 0.0, format!("g = {:.6}", cert.g)));
            for r in records {
                match r {
                    Record::DensityRatio(d) => {
                        rows.push(row("max_density_ratio", d.max_ratio, None));
                        checks.push(check("density_ratio", d.ok, format!("{:.6} vs C1 = {:.6}", d.max_ratio, d.c1)));
                    }
                    Record::DensityDeviation { report, .. } => {
                        let ok = report.max_violation <= 1.0 + tol.enumeration;
                        checks.push(check("density_deviation", ok, format!("lhs/rhs {:.6}", report.max_violation)));
                    }
                    Record::ConditionalRatio(c) => {
                        checks.push(check("conditional_ratio", c.ok, format!("{:.6} vs {:.6}", c.sup_exact, c.bound)));
                    }
                    _ => {}
                }
            }
        }
        Experiment::SingularNe { .. } => {
            let tv = records
                .iter()
                .filter_map(|r| if let Record::Restriction(s) = r { Some(s.tv) } else { None })
                .fold(0.0, f64::max);
            rows.push(row("max_tv", tv, None));
            checks.push(check("restriction_identity", tv <= tol.total_variation, format!("{tv:.3e}")));
        }
        Experiment::Reproduce { .. } => {
            for r in records {
                if let Record::FileCheck(f) = r {
                    checks.push(check(f.file.clone(), f.passed, f.first_divergence.clone().unwrap_or_default()));
                }
            }
        }
    }
    Ok(Summary { kind: cfg.experiment.label().to_string(), rows, checks })
}

/// Outcome of [`run_experiment`].
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    pub summary: Summary,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(super) fn records_text(records: &[Record]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

/// Run a config and write its outputs to `out_dir` (or `config.out`).
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    cfg.validate()?;
    let out = out_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| Error::config("out", "no output directory given"))?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let started = manifest::now_millis();
    let scratch = out.join("reproduce");
    let records = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("workers", e.to_string()))?
            .install(|| execute(cfg, &scratch))?,
        None => execute(cfg, &scratch)?,
    };
    let summary = summarize(cfg, &records)?;
    let files = [
        ("records.jsonl", records_text(&records)?),
        ("summary.json", format!("{}\n", serde_json::to_string_pretty(&summary)?)),
        ("summary.txt", summary.to_text()),
    ];
    let mut digests = std::collections::BTreeMap::new();
    for (name, text) in &files {
        write(&out.join(name), text.as_bytes())?;
        digests.insert(name.to_string(), manifest::digest(text.as_bytes()));
    }
    write(&out.join("config.json"), cfg.to_json().as_bytes())?;
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        artifact_version: super::ARTIFACT_VERSION.to_string(),
        seeds: manifest::seed_tree(cfg),
        started_ms: started,
        finished_ms: manifest::now_millis(),
        digests,
        config: cfg.clone(),
    };
    write(&out.join("manifest.json"), format!("{}\n", serde_json::to_string_pretty(&manifest)?).as_bytes())?;
    Ok(RunOutcome { out_dir: out, manifest, summary })
}
