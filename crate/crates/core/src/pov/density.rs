//! The one-dimensional invariant density `μ₀` built from Green's function.
//!
//! For a quenched environment, `g_ij = E_i N_j` is the expected number of
//! visits to `j` from `i`. The Cesàro averages `G_ij = (j−i+1)⁻¹ Σ_{k=i..j} g_kj`
//! converge as `i → −∞` to `μ_j`, which is harmonic for the transposed
//! kernel and satisfies `E μ₀ ≥ 1/M`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{EnvironmentModel, Quenched, Shifted};
use crate::error::{Error, Result};
use crate::green::{green_1d, GreenColumn, green_column_1d, DEFAULT_MAX_WINDOW, TRUNCATION_TOL};
use crate::lattice::Site;
use crate::seed::derive_seed;
use crate::kalikow::DENOMINATOR_GUARD;
use crate::stats::{MeanEstimate, RatioEstimate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    pub j_lo: i32,
    pub j_hi: i32,
    /// Strictly decreasing starting points `i`; the last one is `i_min`.
    pub i_schedule: Vec<i32>,
    pub n_env: usize,
    /// Largest allowed change of `G_ij` between the last two schedule points.
    pub tol: f64,
    #[serde(default = "default_margin")]
    pub initial_margin: i64,
    /// Keep the Green's function columns in the output.
    #[serde(default)]
    pub keep_green: bool,
}

fn default_margin() -> i64 {
    16
}

impl DensityParams {
    fn validate(&self) -> Result<()> {
        if self.j_lo > self.j_hi || self.n_env == 0 || self.i_schedule.len() < 2 {
            return Err(Error::InvalidParams("need j_lo ≤ j_hi, n_env ≥ 1 and two schedule points".into()));
        }
        if self.i_schedule.windows(2).any(|w| w[1] >= w[0]) || self.i_schedule[0] > self.j_lo {
            return Err(Error::InvalidParams("i_schedule must decrease and start at or below j_lo".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParams("tol must be positive".into()));
        }
        Ok(())
    }
}

/// Density data for one environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvDensity {
    pub env_seed: u64,
    /// `cesaro[s][j − j_lo] = G_{i_s, j}` for `i_s = i_schedule[s]`.
    pub cesaro: Vec<Vec<f64>>,
    /// `μ_j`, the value at `i_min`.
    pub mu: Vec<f64>,
    /// `D(T^j ω)` along the axis.
    pub drift: Vec<f64>,
    /// `max_j |G_{i_min,j} − G_{i_prev,j}|`.
    pub convergence_gap: f64,
    /// `max |Σ_i π_ij μ_i − μ_j|` over `j` with `[j−M, j+M] ⊆ [j_lo, j_hi]`.
    pub harmonicity_residual: Option<f64>,
    /// Largest Green's function truncation gap.
    pub truncation_gap: f64,
    /// `g_kj` for `k ∈ [i_min, j]`, one column per `j`, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub green: Option<Vec<GreenColumn>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantDensityTable {
    pub params: DensityParams,
    pub range: i64,
    pub envs: Vec<EnvDensity>,
    /// `E μ_j` over environments.
    pub mean_mu: Vec<MeanEstimate>,
    pub max_convergence_gap: f64,
    pub max_harmonicity_residual: Option<f64>,
}

impl InvariantDensityTable {
    pub fn mean_mu_at(&self, j: i32) -> Option<&MeanEstimate> {
        if j < self.params.j_lo || j > self.params.j_hi {
            return None;
        }
        self.mean_mu.get((j - self.params.j_lo) as usize)
    }

    /// `E μ₀ ≥ 1/M`, tested against the upper confidence bound.
    pub fn lower_bound_ok(&self, z: f64) -> Option<bool> {
        self.mean_mu_at(0).map(|m| m.upper(z) >= 1.0 / self.range as f64)
    }
}

fn env_density<E: Quenched + ?Sized>(env: &E, p: &DensityParams, env_seed: u64) -> Result<EnvDensity> {
    let i_min = *p.i_schedule.last().expect("validated");
    let width = (p.j_hi - p.j_lo + 1) as usize;
    let mut cesaro = vec![vec![0.0; width]; p.i_schedule.len()];
    let mut truncation_gap: f64 = 0.0;
    let mut green = Vec::new();
    for j in p.j_lo..=p.j_hi {
        let col = green_column_1d(env, j, i_min, j, p.initial_margin, TRUNCATION_TOL, DEFAULT_MAX_WINDOW)?;
        truncation_gap = truncation_gap.max(col.gap);
        // suffix sums Σ_{k=i..j} g_kj
        let mut acc = 0.0;
        let mut k = j;
        let mut targets: Vec<(usize, i32)> = p.i_schedule.iter().copied().enumerate().collect();
        targets.sort_by_key(|(_, i)| std::cmp::Reverse(*i));
        for (s, i) in targets {
            while k >= i {
                acc += col.at(k);
                k -= 1;
            }
            cesaro[s][(j - p.j_lo) as usize] = acc / (j - i + 1) as f64;
        }
        if p.keep_green {
            green.push(col);
        }
    }
    let last = cesaro.len() - 1;
    let mu = cesaro[last].clone();
    let convergence_gap = mu.iter().zip(&cesaro[last - 1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let drift = (p.j_lo..=p.j_hi)
        .map(|j| env.transition(&Site::d1(j)).map(|t| t.drift()[0]))
        .collect::<Result<Vec<_>>>()?;
    let m = env.range() as i32;
    let mut residual: Option<f64> = None;
    for j in (p.j_lo + m)..=(p.j_hi - m) {
        let mut s = 0.0;
        for i in (j - m)..=(j + m) {
            s += env.transition(&Site::d1(i))?.prob(&Site::d1(j - i)) * mu[(i - p.j_lo) as usize];
        }
        let r = (s - mu[(j - p.j_lo) as usize]).abs();
        residual = Some(residual.map_or(r, |x: f64| x.max(r)));
    }
    Ok(EnvDensity { env_seed, cesaro, mu, drift, convergence_gap, harmonicity_residual: residual,
        truncation_gap,
        green: p.keep_green.then_some(green),
    })
}

/// Build `μ_j` for `j ∈ [j_lo, j_hi]` in `n_env` independent environments.
///
/// Fails with [`Error::NonConvergence`] if some environment's Cesàro
/// averages still move by more than `tol` at the end of the schedule.
pub fn invariant_density_1d(model: &EnvironmentModel, params: &DensityParams, seed: u64) -> Result<InvariantDensityTable> {
    if model.dim != 1 {
        return Err(Error::NotOneDimensional(model.dim));
    }
    params.validate()?;
    let envs: Vec<EnvDensity> = (0..params.n_env as u64)
        .into_par_iter()
        .map(|e| {
            let env_seed = derive_seed(seed, "env", e);
            let env = model.realize(env_seed)?;
            env_density(&env, params, env_seed)
        })
        .collect::<Result<_>>()?;
    let max_convergence_gap = envs.iter().map(|e| e.convergence_gap).fold(0.0, f64::max);
    if max_convergence_gap > params.tol {
        return Err(Error::NonConvergence(format!(
            "Cesàro gap {max_convergence_gap:.3e} exceeds {:.3e} at i = {}",
            params.tol,
            params.i_schedule.last().expect("validated")
        )));
    }
    let width = (params.j_hi - params.j_lo + 1) as usize;
    let mean_mu = (0..width)
        .map(|w| MeanEstimate::from_samples(&envs.iter().map(|e| e.mu[w]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let max_harmonicity_residual =
        envs.iter().filter_map(|e| e.harmonicity_residual).fold(None, |a: Option<f64>, r| Some(a.map_or(r, |x| x.max(r))));
    Ok(InvariantDensityTable {
        params: params.clone(),
        range: model.range as i64,
        envs,
        mean_mu,
        max_convergence_gap,
        max_harmonicity_residual,
    })
}

/// `v = E[μ₀ D] / E[μ₀]` from the per-environment values at `j = 0`.
pub fn lln_velocity_from_density(table: &InvariantDensityTable) -> Result<RatioEstimate> {
    if table.params.j_lo > 0 || table.params.j_hi < 0 {
        return Err(Error::InvalidParams("density table does not cover site 0".into()));
    }
    let w = (-table.params.j_lo) as usize;
    let num: Vec<f64> = table.envs.iter().map(|e| e.mu[w] * e.drift[w]).collect();
    let den: Vec<f64> = table.envs.iter().map(|e| e.mu[w]).collect();
    RatioEstimate::from_pairs(&num, &den, DENOMINATOR_GUARD)
}

/// `|g_{i,0}(Tω) − g_{i+1,1}(ω)|`.
pub fn shift_identity_gap<E: Quenched + ?Sized>(env: &E, i: i32, initial_margin: i64) -> Result<f64> {
    let shifted = Shifted { inner: env, shift: Site::d1(1) };
    let (a, _) = green_1d(&shifted, i, 0, initial_margin)?;
    let (b, _) = green_1d(env, i + 1, 1, initial_margin)?;
    Ok((a - b).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::TransitionVector;
    use crate::green::hitting_probability;

    fn solomon() -> EnvironmentModel {
        let a = vec![TransitionVector::nearest_1d(0.7).unwrap(), TransitionVector::nearest_1d(0.9).unwrap()];
        EnvironmentModel::iid_alphabet(a, vec![0.5, 0.5], 11).unwrap()
    }

    fn params(n_env: usize) -> DensityParams {
        DensityParams { j_lo: -3, j_hi: 3, i_schedule: vec![-20, -40, -80], n_env, tol: 1e-6, initial_margin: 16, keep_green: false }
    }

    #[test]
    fn nearest_neighbour_density_is_harmonic() {
        let t = invariant_density_1d(&solomon(), &params(5), 3).unwrap();
        assert!(t.max_harmonicity_residual.unwrap() < 1e-6);
        assert!(t.envs.iter().all(|e| e.mu.iter().all(|m| *m >= 1.0)));
    }

    #[test]
    fn renewal_and_shift_identities() {
        let m = solomon();
        let env = m.realize(4).unwrap();
        for i in [-6, -2, 0, 3] {
            let (gij, _) = green_1d(&env, i, 1, 16).unwrap();
            let (gjj, _) = green_1d(&env, 1, 1, 16).unwrap();
            let (h, _) = hitting_probability(&env, i, 1, 16).unwrap();
            assert!((gij - gjj * h).abs() < 1e-7);
            assert!(shift_identity_gap(&env, i, 16).unwrap() < 1e-7);
        }
    }

    #[test]
    fn velocity_from_density_matches_constant_drift() {
        let c = EnvironmentModel::constant(TransitionVector::nearest_1d(0.8).unwrap(), 1).unwrap();
        let t = invariant_density_1d(&c, &params(3), 1).unwrap();
        let v = lln_velocity_from_density(&t).unwrap();
        assert!((v.ratio - 0.6).abs() < 1e-9);
    }

    #[test]
    fn point_mass_right_has_unit_density() {
        let c = EnvironmentModel::constant(TransitionVector::nearest_1d(1.0).unwrap(), 1).unwrap();
        let t = invariant_density_1d(&c, &params(1), 1).unwrap();
        assert!(t.envs[0].mu.iter().all(|m| (m - 1.0).abs() < 1e-12));
        assert!(t.max_harmonicity_residual.unwrap() < 1e-12);
    }

    #[test]
    fn rejects_short_schedule() {
        let mut p = params(1);
        p.i_schedule = vec![-10];
        assert!(invariant_density_1d(&solomon(), &p, 1).is_err());
    }
}
