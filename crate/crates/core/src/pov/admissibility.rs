//! Empirical half-space admissibility of the bound `Z_k`.

use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentModel;
use crate::error::{Error, Result};
use crate::lattice::{Direction, Site};
use crate::stats::MeanEstimate;
use crate::walk::{recentred_log_zk_series, run_annealed_map, run_quenched, MixingConstants, StopRule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityParams {
    pub k_list: Vec<i64>,
    /// Thresholds as `ln a`, strictly increasing.
    pub log_a_grid: Vec<f64>,
    /// Values of `N`, strictly increasing.
    pub n_list: Vec<usize>,
    pub n_replicates: usize,
}

/// `table[k][a][N]`: mean over replicates of `N⁻¹ Σ_{n≤N} 1(Z̃_{k,n} ≤ a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZkAdmissibility {
    pub k_list: Vec<i64>,
    pub log_a_grid: Vec<f64>,
    pub n_list: Vec<usize>,
    pub table: Vec<Vec<Vec<MeanEstimate>>>,
    pub epsilon_ref: f64,
    /// `(k, ln a, N)` cells whose mean is below `0.25 · epsilon_ref`.
    pub flagged: Vec<(i64, f64, usize)>,
}

impl ZkAdmissibility {
    /// `max_a` of the table at `(k, N)`.
    pub fn sup_over_a(&self, k: i64, n: usize) -> Option<f64> {
        let ki = self.k_list.iter().position(|x| *x == k)?;
        let ni = self.n_list.iter().position(|x| *x == n)?;
        self.table[ki].iter().map(|row| row[ni].mean).fold(None, |m, v| Some(m.map_or(v, |x: f64| x.max(v))))
    }

    pub fn is_monotone_in_a(&self) -> bool {
        self.table.iter().all(|by_a| {
            by_a.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(lo, hi)| lo.mean <= hi.mean))
        })
    }
}

/// Fractions for one replicate: `out[k][a][N]`.
fn replicate_fractions(series: &[Vec<f64>], log_a: &[f64], n_list: &[usize]) -> Result<Vec<Vec<Vec<f64>>>> {
    series
        .iter()
        .map(|row| {
            let mut by_n = Vec::with_capacity(n_list.len());
            for &n in n_list {
                if n > row.len() {
                    return Err(Error::InvalidParams(format!("series of length {} shorter than N = {n}", row.len())));
                }
                let mut prefix = row[..n].to_vec();
                prefix.sort_by(f64::total_cmp);
                by_n.push(log_a.iter().map(|a| prefix.partition_point(|v| v <= a) as f64 / n as f64).collect::<Vec<_>>());
            }
            // transpose to [a][N]
            Ok((0..log_a.len()).map(|ai| by_n.iter().map(|r| r[ai]).collect()).collect())
        })
        .collect()
}

/// Tabulate `Q̃_N(Z_k ≤ a)` from per-replicate series `series[rep][k][n−1] = ln Z̃_{k,n}`.
pub fn zk_admissibility(
    series: &[Vec<Vec<f64>>],
    k_list: &[i64],
    log_a_grid: &[f64],
    n_list: &[usize],
    epsilon_ref: f64,
) -> Result<ZkAdmissibility> {
    if series.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if log_a_grid.windows(2).any(|w| w[0] >= w[1]) || n_list.windows(2).any(|w| w[0] >= w[1]) || n_list.first() == Some(&0)
    {
        return Err(Error::InvalidParams("a grid and N list must be strictly increasing and N positive".into()));
    }
    let per_rep: Vec<Vec<Vec<Vec<f64>>>> = series
        .iter()
        .map(|s| {
            if s.len() != k_list.len() {
                return Err(Error::InvalidParams("series rows do not match k_list".into()));
            }
            replicate_fractions(s, log_a_grid, n_list)
        })
        .collect::<Result<_>>()?;
    let mut table = Vec::with_capacity(k_list.len());
    let mut flagged = Vec::new();
    for (ki, k) in k_list.iter().enumerate() {
        let mut by_a = Vec::with_capacity(log_a_grid.len());
        for (ai, a) in log_a_grid.iter().enumerate() {
            let mut by_n = Vec::with_capacity(n_list.len());
            for (ni, n) in n_list.iter().enumerate() {
                let xs: Vec<f64> = per_rep.iter().map(|r| r[ki][ai][ni]).collect();
                let est = MeanEstimate::from_samples(&xs)?;
                if est.mean < 0.25 * epsilon_ref {
                    flagged.push((*k, *a, *n));
                }
                by_n.push(est);
            }
            by_a.push(by_n);
        }
        table.push(by_a);
    }
    Ok(ZkAdmissibility {
        k_list: k_list.to_vec(),
        log_a_grid: log_a_grid.to_vec(),
        n_list: n_list.to_vec(),
        table,
        epsilon_ref,
        flagged,
    })
}

/// Simulate annealed paths and tabulate their recentred `Z_k` fractions.
pub fn zk_admissibility_run(
    model: &EnvironmentModel,
    ell: &Direction,
    constants: &MixingConstants,
    params: &AdmissibilityParams,
    epsilon_ref: f64,
    seed: u64,
) -> Result<ZkAdmissibility> {
    let horizon = *params.n_list.last().ok_or_else(|| Error::InvalidParams("empty N list".into()))?;
    let start = Site::origin(model.dim);
    let series = run_annealed_map(model, params.n_replicates, seed, |env, walk_seed, _| {
        let path = run_quenched(env, start, horizon, &StopRule::FixedLength, walk_seed)?;
        recentred_log_zk_series(&path.positions(), ell, &params.k_list, constants)
    })?;
    zk_admissibility(&series, &params.k_list, &params.log_a_grid, &params.n_list, epsilon_ref)
}
