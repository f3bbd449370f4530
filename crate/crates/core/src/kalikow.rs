//! Kalikow's functional, the effective condition, and the ballisticity and
//! slab-occupancy inequalities that follow from them.
//!
//! For a volume `U ∋ 0` and a site `x ∈ U`, the Kalikow ratio is
//!
//! ```text
//! E[ visits_0(x) · D(T^x ω)·ℓ ] / E[ visits_0(x) ]
//! ```
//!
//! with visits computed exactly per environment by the Green solver and the
//! outer expectation estimated over independent environment draws. `ε̂` is
//! the smallest ratio seen over all scanned `(U, x)`: an upper estimate of
//! the true infimum over every finite `U`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{marginal_draws, EnvironmentModel, Quenched};
use crate::error::{Error, Result};
use crate::green::{occupancy_with, FiniteVolume, OccupancyOptions, OccupancyTable};
use crate::lattice::{Direction, Site};
use crate::seed::derive_seed;
use crate::stats::{MeanEstimate, RatioEstimate};
use crate::walk::{run_annealed_map, run_quenched, telescoping_sum, vhat, StopRule, VhatRequest};

/// Standard errors used when deciding that a denominator is zero.
pub const DENOMINATOR_GUARD: f64 = 3.0;

fn check_volume(u: &FiniteVolume) -> Result<()> {
    if !u.contains_origin {
        return Err(Error::InvalidVolume("volume must contain the origin".into()));
    }
    if !u.m_connected {
        return Err(Error::InvalidVolume("volume must be M-connected".into()));
    }
    Ok(())
}

/// Per-environment `(visits_0(x), visits_0(x)·D(ω_x)·ℓ)` for every `x ∈ U`.
fn weighted_visits<E: Quenched + ?Sized>(env: &E, u: &FiniteVolume, ell: &Direction) -> Result<Vec<(f64, f64)>> {
    let opts = OccupancyOptions { escape: false, ..Default::default() };
    let t: OccupancyTable<f64> = occupancy_with(env, u, Site::origin(u.dim()), ell, opts)?;
    u.sites()
        .iter()
        .zip(&t.visits)
        .map(|(x, v)| Ok((*v, v * env.transition(x)?.drift_along(ell))))
        .collect()
}

/// Ratio estimates for every site of one volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeScan {
    pub id: usize,
    pub n_sites: usize,
    pub env_seed: u64,
    pub ratios: Vec<(Site, RatioEstimate)>,
    /// Sites whose expected visit count is indistinguishable from zero.
    pub unreachable: Vec<Site>,
    pub argmin: Site,
    pub min: RatioEstimate,
}

fn scan_volume(
    model: &EnvironmentModel,
    u: &FiniteVolume,
    ell: &Direction,
    n_env: usize,
    seed: u64,
    id: usize,
) -> Result<VolumeScan> {
    check_volume(u)?;
    if n_env == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let per_env: Vec<Vec<(f64, f64)>> = (0..n_env as u64)
        .into_par_iter()
        .map(|i| weighted_visits(&model.realize(derive_seed(seed, "env", i))?, u, ell))
        .collect::<Result<_>>()?;
    let mut ratios = Vec::new();
    let mut unreachable = Vec::new();
    for (k, x) in u.sites().iter().enumerate() {
        let den: Vec<f64> = per_env.iter().map(|row| row[k].0).collect();
        let num: Vec<f64> = per_env.iter().map(|row| row[k].1).collect();
        match RatioEstimate::from_pairs(&num, &den, DENOMINATOR_GUARD) {
            Ok(r) => ratios.push((*x, r)),
            Err(Error::DegenerateDenominator { .. }) => unreachable.push(*x),
            Err(e) => return Err(e),
        }
    }
    let (argmin, min) = ratios
        .iter()
        .min_by(|a, b| a.1.ratio.total_cmp(&b.1.ratio))
        .copied()
        .ok_or(Error::DegenerateDenominator { mean: 0.0, std_err: 0.0 })?;
    Ok(VolumeScan { id, n_sites: u.len(), env_seed: seed, ratios, unreachable, argmin, min })
}

/// Kalikow ratio at a single `(U, x)`.
pub fn kalikow_ratio(
    model: &EnvironmentModel,
    u: &FiniteVolume,
    x: Site,
    ell: &Direction,
    n_env: usize,
    seed: u64,
) -> Result<RatioEstimate> {
    if !u.contains(&x) {
        return Err(Error::InvalidVolume(format!("{x} is not in U")));
    }
    let scan = scan_volume(model, u, ell, n_env, seed, 0)?;
    if scan.unreachable.contains(&x) {
        return Err(Error::DegenerateDenominator { mean: 0.0, std_err: 0.0 });
    }
    Ok(scan.ratios.into_iter().find(|(s, _)| *s == x).expect("reachable site").1)
}

/// Result of scanning a volume family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KalikowReport {
    pub ell: Direction,
    pub per_volume: Vec<VolumeScan>,
    /// Smallest ratio over all scanned `(U, x)`.
    pub epsilon_hat: RatioEstimate,
    pub epsilon_site: (usize, Site),
    /// `ε̂` after each volume; nonincreasing.
    pub running: Vec<f64>,
    pub n_env: usize,
    /// `(volume id, site)` whose confidence interval overlaps the minimizer's.
    pub flags: Vec<(usize, Site)>,
    pub z: f64,
}

/// Scan a family of volumes, each with fresh environments, and take the infimum.
pub fn kalikow_epsilon(
    model: &EnvironmentModel,
    family: &[FiniteVolume],
    ell: &Direction,
    n_env: usize,
    seed: u64,
    z: f64,
) -> Result<KalikowReport> {
    if family.is_empty() {
        return Err(Error::InvalidParams("empty volume family".into()));
    }
    let mut per_volume = Vec::with_capacity(family.len());
    let mut running = Vec::with_capacity(family.len());
    let mut best: Option<(RatioEstimate, usize, Site)> = None;
    for (id, u) in family.iter().enumerate() {
        let scan = scan_volume(model, u, ell, n_env, derive_seed(seed, "volume", id as u64), id)?;
        if best.as_ref().is_none_or(|b| scan.min.ratio < b.0.ratio) {
            best = Some((scan.min, id, scan.argmin));
        }
        running.push(best.as_ref().expect("set above").0.ratio);
        per_volume.push(scan);
    }
    let (epsilon_hat, vid, site) = best.expect("nonempty family");
    let flags = per_volume
        .iter()
        .flat_map(|s| s.ratios.iter().map(move |(x, r)| (s.id, *x, *r)))
        .filter(|(_, _, r)| r.lower(z) <= epsilon_hat.upper(z))
        .map(|(id, x, _)| (id, x))
        .collect();
    Ok(KalikowReport { ell: *ell, per_volume, epsilon_hat, epsilon_site: (vid, site), running, n_env, flags, z })
}

/// Nested boxes `[-n, n]^d` for `n = 1..=k`, with the model's range for connectivity.
pub fn nested_boxes(dim: usize, k: i32, range: i64) -> Result<Vec<FiniteVolume>> {
    (1..=k).map(|n| FiniteVolume::from_box(&crate::lattice::LatticeBox::cube(dim, n), range)).collect()
}

/// Inputs of the effective condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveConditionParams {
    pub kappa: f64,
    /// Lower bound on the single-site conditional density.
    pub a: f64,
    /// Upper bound on the single-site conditional density.
    pub b: f64,
    /// `E[(D·ℓ)⁺]`.
    pub e_dplus: MeanEstimate,
    /// `E[(D·ℓ)⁻]`.
    pub e_dminus: MeanEstimate,
}

impl EffectiveConditionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::InvalidParams(format!("κ = {} must lie in (0, 1)", self.kappa)));
        }
        if !(self.a > 0.0 && self.a <= self.b && self.b.is_finite()) {
            return Err(Error::InvalidParams(format!("need 0 < A ≤ B < ∞, got A = {}, B = {}", self.a, self.b)));
        }
        if self.e_dplus.mean < 0.0 || self.e_dminus.mean < 0.0 {
            return Err(Error::InvalidParams("drift moments must be nonnegative".into()));
        }
        Ok(())
    }

    /// Same parameters with both drift moments multiplied by `factor` (as when `ℓ` is rescaled).
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |m: &MeanEstimate| MeanEstimate { mean: m.mean * factor, std_err: m.std_err * factor, n: m.n };
        EffectiveConditionParams { e_dplus: s(&self.e_dplus), e_dminus: s(&self.e_dminus), ..self.clone() }
    }
}

/// `E[(D·ℓ)⁺]` and `E[(D·ℓ)⁻]` by Monte Carlo over single-site marginal draws.
pub fn drift_moments(model: &EnvironmentModel, ell: &Direction, n_draws: usize, seed: u64) -> Result<(MeanEstimate, MeanEstimate)> {
    let draws = marginal_draws(model, n_draws, seed)?;
    let proj: Vec<f64> = draws.iter().map(|tv| tv.drift_along(ell)).collect();
    let plus: Vec<f64> = proj.iter().map(|p| p.max(0.0)).collect();
    let minus: Vec<f64> = proj.iter().map(|p| (-p).max(0.0)).collect();
    Ok((MeanEstimate::from_samples(&plus)?, MeanEstimate::from_samples(&minus)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveVerdict {
    pub verdict: bool,
    /// `E[(D·ℓ)⁺]`.
    pub lhs: f64,
    /// `κ⁻¹ B A⁻¹ E[(D·ℓ)⁻]`.
    pub rhs: f64,
    /// `lhs − rhs` and its standard error.
    pub margin: MeanEstimate,
    /// `ε = κ E[A (D·ℓ)⁺ − κ⁻¹ B (D·ℓ)⁻]`.
    pub implied_epsilon: MeanEstimate,
}

/// Decide `E[(D·ℓ)⁺] > κ⁻¹ B A⁻¹ E[(D·ℓ)⁻]`, requiring the margin to exceed
/// `z` standard errors.
pub fn effective_condition(params: &EffectiveConditionParams, z: f64) -> Result<EffectiveVerdict> {
    params.validate()?;
    let c = params.b / (params.a * params.kappa);
    let lhs = params.e_dplus.mean;
    let rhs = c * params.e_dminus.mean;
    let se = (params.e_dplus.std_err.powi(2) + (c * params.e_dminus.std_err).powi(2)).sqrt();
    let margin = MeanEstimate { mean: lhs - rhs, std_err: se, n: params.e_dplus.n.min(params.e_dminus.n) };
    let k = params.kappa;
    let eps = k * (params.a * params.e_dplus.mean - params.b / k * params.e_dminus.mean);
    let eps_se = k * ((params.a * params.e_dplus.std_err).powi(2) + (params.b / k * params.e_dminus.std_err).powi(2)).sqrt();
    Ok(EffectiveVerdict {
        verdict: margin.mean > 0.0 && margin.lower(z) > 0.0,
        lhs,
        rhs,
        margin,
        implied_epsilon: MeanEstimate { mean: eps, std_err: eps_se, n: margin.n },
    })
}

/// Both sides of `E₀(X_{T_U}·ℓ) ≥ ε E₀(T_U)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallisticityReport {
    pub n_sites: usize,
    pub exit_projection: MeanEstimate,
    pub exit_time: MeanEstimate,
    pub epsilon: MeanEstimate,
    /// `E₀(X_{T_U}·ℓ) − ε̂ E₀(T_U)` with the standard error of the paired
    /// differences combined with the uncertainty of `ε̂`.
    pub slack: MeanEstimate,
    pub ok: bool,
}

/// Exact exit projection and exit time per environment, averaged.
pub fn ballisticity_check(
    model: &EnvironmentModel,
    u: &FiniteVolume,
    ell: &Direction,
    epsilon: MeanEstimate,
    n_env: usize,
    seed: u64,
    z: f64,
) -> Result<BallisticityReport> {
    if !u.contains_origin {
        return Err(Error::InvalidVolume("volume must contain the origin".into()));
    }
    let opts = OccupancyOptions { escape: false, ..Default::default() };
    let pairs: Vec<(f64, f64)> = run_annealed_map(model, n_env, seed, |env, _, _| {
        let t: OccupancyTable<f64> = occupancy_with(env, u, Site::origin(u.dim()), ell, opts)?;
        Ok((t.expected_exit_projection, t.expected_exit_time))
    })?;
    let proj: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let time: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|(x, t)| x - epsilon.mean * t).collect();
    let exit_projection = MeanEstimate::from_samples(&proj)?;
    let exit_time = MeanEstimate::from_samples(&time)?;
    let d = MeanEstimate::from_samples(&diff)?;
    let se = (d.std_err.powi(2) + (exit_time.mean * epsilon.std_err).powi(2)).sqrt();
    let slack = MeanEstimate { mean: d.mean, std_err: se, n: d.n };
    Ok(BallisticityReport {
        n_sites: u.len(),
        exit_projection,
        exit_time,
        epsilon,
        ok: slack.upper(z) >= 0.0,
        slack,
    })
}

/// Empirical `E₀(V̂^j_{i,j+M})` against `1 + ε⁻¹((j − i) + M)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabReport {
    pub i: i64,
    pub j: i64,
    pub m: i64,
    pub vhat: MeanEstimate,
    pub bound: f64,
    /// Paths that did not reach level `j` within the horizon.
    pub censored: usize,
    /// Largest per-path telescoped drift `Σ (X_{n+1} − X_n)·ℓ` over counted steps.
    pub max_telescoping: f64,
    /// Every path satisfied the telescoping bound `≤ (j − i) + M`.
    pub telescoping_ok: bool,
    pub ok: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn slab_occupancy_check(
    model: &EnvironmentModel,
    ell: &Direction,
    i: i64,
    j: i64,
    epsilon: f64,
    n_paths: usize,
    horizon: usize,
    seed: u64,
    z: f64,
) -> Result<SlabReport> {
    if i >= j {
        return Err(Error::InvalidParams(format!("need i < j, got {i}, {j}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParams("ε must be positive".into()));
    }
    let m = model.range as i64;
    let stop = StopRule::HitLevel { ell: *ell, level: j as f64 };
    let start = Site::origin(model.dim);
    let req = VhatRequest { i1: i, i2: j + m, j };
    let per: Vec<Option<(usize, f64)>> = run_annealed_map(model, n_paths, seed, |env, walk_seed, _| {
        let p = run_quenched(env, start, horizon, &stop, walk_seed)?;
        let pos = p.positions();
        Ok(vhat(&pos, ell, req).zip(telescoping_sum(&pos, ell, i, j)))
    })?;
    let counted: Vec<(usize, f64)> = per.iter().flatten().copied().collect();
    let censored = per.len() - counted.len();
    let samples: Vec<f64> = counted.iter().map(|c| c.0 as f64).collect();
    let vh = MeanEstimate::from_samples(&samples)?;
    let cap = ((j - i) + m) as f64;
    let max_telescoping = counted.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let bound = 1.0 + ((j - i) + m) as f64 / epsilon;
    Ok(SlabReport {
        i,
        j,
        m,
        vhat: vh,
        bound,
        censored,
        max_telescoping,
        telescoping_ok: max_telescoping <= cap + 1e-9,
        ok: vh.lower(z) <= bound,
    })
}
