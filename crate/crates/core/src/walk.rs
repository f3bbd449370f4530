//! Quenched and annealed walks, stopping times, and per-path statistics.
//!
//! Walk randomness comes from a ChaCha8 stream keyed by a walk seed;
//! environment randomness from the environment seed. Replicate `i` of an
//! ensemble with seed `s` uses `derive_seed(s, "env", i)` and
//! `derive_seed(s, "walk", i)`, so results do not depend on scheduling.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_with::serde_as;

use crate::environment::{Environment, EnvironmentModel, Quenched};
use crate::error::{Error, Result};
use crate::green::FiniteVolume;
use crate::lattice::{level_floor, Direction, Site};
use crate::seed::{derive_seed, stream_rng};
use crate::stats::MeanEstimate;

/// A walk trajectory `X_0, …, X_n` stored as a start point and displacements.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    pub start: Site,
    pub steps: Vec<Site>,
}

impl Path {
    pub fn new(start: Site) -> Self {
        Path { start, steps: Vec::new() }
    }

    /// Number of steps `n`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn positions(&self) -> Vec<Site> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut x = self.start;
        out.push(x);
        for e in &self.steps {
            x = x + *e;
            out.push(x);
        }
        out
    }

    pub fn end(&self) -> Site {
        self.steps.iter().fold(self.start, |x, e| x + *e)
    }

    /// The same path translated to end at the origin.
    pub fn recentred(&self) -> Path {
        Path { start: self.start - self.end(), steps: self.steps.clone() }
    }

    pub fn is_recentred(&self) -> bool {
        self.end().is_origin()
    }

    /// First `n` steps.
    pub fn prefix(&self, n: usize) -> Path {
        Path { start: self.start, steps: self.steps[..n.min(self.steps.len())].to_vec() }
    }

    pub fn max_step_norm(&self) -> i64 {
        self.steps.iter().map(|e| e.sup_norm()).max().unwrap_or(0)
    }
}

/// When to stop a walk (besides reaching the horizon).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StopRule {
    FixedLength,
    /// Stop at `T_U`, the first time outside `U`.
    ExitVolume { volume: FiniteVolume },
    /// Stop at `τ_s = inf{n ≥ 0 : X_n·ℓ ≥ s}`.
    HitLevel { ell: Direction, level: f64 },
}

impl StopRule {
    #[inline]
    fn stops(&self, x: &Site) -> bool {
        match self {
            StopRule::FixedLength => false,
            StopRule::ExitVolume { volume } => !volume.contains(x),
            StopRule::HitLevel { ell, level } => x.dot(ell) >= *level,
        }
    }
}

/// How a walk ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkOutcome {
    pub steps: usize,
    pub end: Site,
    /// `true` if the stop rule fired before the horizon.
    pub stopped: bool,
}

/// Run one quenched walk, calling `visit(n, X_n)` for every visited time.
pub fn walk_with<E: Quenched + ?Sized>(
    env: &E,
    start: Site,
    horizon: usize,
    stop: &StopRule,
    walk_seed: u64,
    mut visit: impl FnMut(usize, &Site),
) -> Result<WalkOutcome> {
    let mut rng = stream_rng(walk_seed);
    let mut x = start;
    visit(0, &x);
    if stop.stops(&x) {
        return Ok(WalkOutcome { steps: 0, end: x, stopped: true });
    }
    for n in 1..=horizon {
        x = env.step(&x, rng.random::<f64>())?;
        visit(n, &x);
        if stop.stops(&x) {
            return Ok(WalkOutcome { steps: n, end: x, stopped: true });
        }
    }
    Ok(WalkOutcome { steps: horizon, end: x, stopped: false })
}

/// Sample a path from the quenched law `P^ω_start`.
pub fn run_quenched<E: Quenched + ?Sized>(
    env: &E,
    start: Site,
    horizon: usize,
    stop: &StopRule,
    walk_seed: u64,
) -> Result<Path> {
    let mut path = Path::new(start);
    let mut prev = start;
    walk_with(env, start, horizon, stop, walk_seed, |n, x| {
        if n > 0 {
            path.steps.push(*x - prev);
        }
        prev = *x;
    })?;
    Ok(path)
}

/// Seeds used by replicate `index` of an ensemble.
pub fn replicate_seeds(seed: u64, index: u64) -> (u64, u64) {
    (derive_seed(seed, "env", index), derive_seed(seed, "walk", index))
}

/// Run `f(env, walk_seed, index)` on `n` replicates, each in a fresh
/// environment. Results come back in replicate order.
pub fn run_annealed_map<T, F>(model: &EnvironmentModel, n: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Environment<'_>, u64, u64) -> Result<T> + Sync,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let (env_seed, walk_seed) = replicate_seeds(seed, i);
            let env = model.realize(env_seed)?;
            f(&env, walk_seed, i)
        })
        .collect()
}

/// One replicate of an annealed ensemble.
#[serde_as]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub replicate: u64,
    pub steps: usize,
    pub endpoint: Site,
    pub stopped: bool,
    /// `τ_s` per requested level; `None` means not reached within the horizon.
    #[serde_as(as = "Vec<(_, _)>")]
    pub tau: BTreeMap<i64, Option<usize>>,
}

/// Parameters shared by every path of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_paths: usize,
    pub horizon: usize,
    pub stop: StopRule,
    pub start: Site,
    /// Direction used for the `τ` table.
    pub ell: Direction,
    #[serde(default)]
    pub tau_levels: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub seed: u64,
    pub horizon: usize,
    pub records: Vec<PathRecord>,
}

/// Annealed ensemble: every path in its own environment.
pub fn run_annealed(model: &EnvironmentModel, spec: &EnsembleSpec, seed: u64) -> Result<PathEnsemble> {
    if spec.n_paths == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let records = run_annealed_map(model, spec.n_paths, seed, |env, walk_seed, i| {
        let mut tau: BTreeMap<i64, Option<usize>> = spec.tau_levels.iter().map(|s| (*s, None)).collect();
        let out = walk_with(env, spec.start, spec.horizon, &spec.stop, walk_seed, |n, x| {
            if tau.is_empty() {
                return;
            }
            let p = x.dot(&spec.ell);
            for (s, t) in tau.iter_mut() {
                if t.is_none() && p >= *s as f64 {
                    *t = Some(n);
                }
            }
        })?;
        Ok(PathRecord { replicate: i, steps: out.steps, endpoint: out.end, stopped: out.stopped, tau })
    })?;
    Ok(PathEnsemble { seed, horizon: spec.horizon, records })
}

/// Componentwise mean of `X_n / n` with standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityEstimate {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub n_paths: usize,
}

impl VelocityEstimate {
    pub fn half_width(&self, z: f64) -> Vec<f64> {
        self.std_err.iter().map(|s| z * s).collect()
    }

    pub fn component(&self, axis: usize) -> MeanEstimate {
        MeanEstimate { mean: self.mean[axis], std_err: self.std_err[axis], n: self.n_paths }
    }
}

/// Velocity from fixed-horizon records, `(X_n − X_0)/n` per path.
pub fn velocity_estimate(records: &[PathRecord], start: Site) -> Result<VelocityEstimate> {
    if records.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if records.iter().any(|r| r.steps == 0) {
        return Err(Error::InvalidParams("velocity needs paths with at least one step".into()));
    }
    let dim = start.dim();
    let mut mean = Vec::with_capacity(dim);
    let mut std_err = Vec::with_capacity(dim);
    for a in 0..dim {
        let xs: Vec<f64> =
            records.iter().map(|r| (r.endpoint.coord(a) - start.coord(a)) as f64 / r.steps as f64).collect();
        let m = MeanEstimate::from_samples(&xs)?;
        mean.push(m.mean);
        std_err.push(m.std_err);
    }
    Ok(VelocityEstimate { mean, std_err, n_paths: records.len() })
}

/// Which density bound `Z_k` uses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConstantsMode {
    /// Mixing field: `κ^{−card(w ∩ H_{k−r})} exp(C̃ Σ_{i≥r} V_{k−i} e^{−g i/2})`.
    Gibbs,
    /// `gap`-dependent field: `κ^{−card(w ∩ H_{k−gap})}`.
    LDependent { gap: u32 },
}

/// Constants entering `Z_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingConstants {
    pub kappa: f64,
    pub r: u32,
    pub g: f64,
    pub c_tilde: f64,
    pub mode: ConstantsMode,
}

impl MixingConstants {
    pub fn l_dependent(kappa: f64, gap: u32) -> Result<Self> {
        let c = MixingConstants { kappa, r: 0, g: 1.0, c_tilde: 0.0, mode: ConstantsMode::LDependent { gap } };
        c.validate()?;
        Ok(c)
    }

    pub fn gibbs(kappa: f64, r: u32, g: f64, c_tilde: f64) -> Result<Self> {
        let c = MixingConstants { kappa, r, g, c_tilde, mode: ConstantsMode::Gibbs };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::InvalidParams(format!("κ = {} must lie in (0, 1)", self.kappa)));
        }
        if !(self.g > 0.0 && self.g.is_finite()) {
            return Err(Error::InvalidParams(format!("g = {} must be positive", self.g)));
        }
        if !(self.c_tilde >= 0.0 && self.c_tilde.is_finite()) {
            return Err(Error::InvalidParams("C̃ must be finite and nonnegative".into()));
        }
        if let ConstantsMode::LDependent { gap } = self.mode {
            if gap == 0 {
                return Err(Error::InvalidParams("gap L must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// Shift from `k` to the half-space whose points are counted: `r` or `L`.
    fn shift(&self) -> i64 {
        match self.mode {
            ConstantsMode::Gibbs => self.r as i64,
            ConstantsMode::LDependent { gap } => gap as i64,
        }
    }
}

/// `V̂^j_{i₁,i₂}` request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VhatRequest {
    pub i1: i64,
    pub i2: i64,
    pub j: i64,
}

/// What [`path_stats`] should compute.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsRequest {
    pub k_list: Vec<i64>,
    pub tau_levels: Vec<i64>,
    pub vhat: Vec<VhatRequest>,
}

/// Statistics of one path.
#[serde_as]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub length: usize,
    /// `τ_s`; `None` is `∞` (not reached).
    #[serde_as(as = "Vec<(_, _)>")]
    pub tau: BTreeMap<i64, Option<usize>>,
    /// `V_j = card{i : j − 1 ≤ x_i·ℓ < j}`, counted with multiplicity.
    #[serde_as(as = "Vec<(_, _)>")]
    pub slab_counts: BTreeMap<i64, usize>,
    /// `card(w ∩ H_{k−r})` (or `H_{k−L}`) per requested `k`.
    #[serde_as(as = "Vec<(_, _)>")]
    pub hk_card: BTreeMap<i64, usize>,
    /// `ln Z_k(w)` per requested `k` (stored in log form; `κ^{−card}` overflows quickly).
    #[serde_as(as = "Vec<(_, _)>")]
    pub log_zk: BTreeMap<i64, f64>,
    /// `V̂` per request; `None` when `τ_j` was not reached.
    pub vhat: Vec<(VhatRequest, Option<usize>)>,
    pub min_ell: f64,
}

impl PathStats {
    pub fn zk(&self, k: i64) -> Option<f64> {
        self.log_zk.get(&k).map(|l| l.exp())
    }
}

/// `τ_s` on a list of positions.
pub fn hitting_time(positions: &[Site], ell: &Direction, s: f64) -> Option<usize> {
    positions.iter().position(|x| x.dot(ell) >= s)
}

/// `V̂^j_{i₁,i₂} = card{n ≤ τ_j : i₁ ≤ X_n·ℓ < i₂}`.
pub fn vhat(positions: &[Site], ell: &Direction, req: VhatRequest) -> Option<usize> {
    let tau = hitting_time(positions, ell, req.j as f64)?;
    Some(
        positions[..=tau]
            .iter()
            .filter(|x| {
                let p = x.dot(ell);
                p >= req.i1 as f64 && p < req.i2 as f64
            })
            .count(),
    )
}

/// `Σ_{n ≤ τ_j − 1, i ≤ X_n·ℓ < j} (X_{n+1} − X_n)·ℓ`, or `None` if `τ_j` is not reached.
pub fn telescoping_sum(positions: &[Site], ell: &Direction, i: i64, j: i64) -> Option<f64> {
    let tau = hitting_time(positions, ell, j as f64)?;
    Some(
        (0..tau)
            .filter(|n| {
                let p = positions[*n].dot(ell);
                p >= i as f64 && p < j as f64
            })
            .map(|n| (positions[n + 1] - positions[n]).dot(ell))
            .sum(),
    )
}

/// `ln Z_k` from its two ingredients.
fn log_zk_from(c: &MixingConstants, card: usize, weighted: f64) -> f64 {
    let base = -(card as f64) * c.kappa.ln();
    match c.mode {
        ConstantsMode::Gibbs => base + c.c_tilde * weighted,
        ConstantsMode::LDependent { .. } => base,
    }
}

/// Compute the requested statistics. `Z_k` needs a recentred path and constants.
pub fn path_stats(
    path: &Path,
    ell: &Direction,
    req: &StatsRequest,
    constants: Option<&MixingConstants>,
) -> Result<PathStats> {
    let positions = path.positions();
    let levels: Vec<f64> = positions.iter().map(|x| x.dot(ell)).collect();
    let mut slab_counts = BTreeMap::new();
    for p in &levels {
        *slab_counts.entry(level_floor(*p) + 1).or_insert(0usize) += 1;
    }
    let tau = req.tau_levels.iter().map(|s| (*s, hitting_time(&positions, ell, *s as f64))).collect();
    let vhat_out = req.vhat.iter().map(|r| (*r, vhat(&positions, ell, *r))).collect();
    let mut hk_card = BTreeMap::new();
    let mut log_zk = BTreeMap::new();
    if !req.k_list.is_empty() {
        let c = constants.ok_or_else(|| Error::MissingConstants("Z_k requested without constants".into()))?;
        c.validate()?;
        if !path.is_recentred() {
            return Err(Error::NotRecentred);
        }
        for &k in &req.k_list {
            let cut = (k - c.shift()) as f64;
            let card = levels.iter().filter(|p| **p >= cut - 1e-9).count();
            let weighted: f64 = slab_counts
                .iter()
                .filter(|(j, _)| **j <= k - c.r as i64)
                .map(|(j, v)| *v as f64 * (-0.5 * c.g * (k - j) as f64).exp())
                .sum();
            hk_card.insert(k, card);
            log_zk.insert(k, log_zk_from(c, card, weighted));
        }
    }
    Ok(PathStats {
        length: path.len(),
        tau,
        slab_counts,
        hk_card,
        log_zk,
        vhat: vhat_out,
        min_ell: levels.iter().cloned().fold(f64::INFINITY, f64::min),
    })
}

/// Integer level of `x·ℓ` when `ℓ` has integer components.
fn integer_ell(ell: &Direction) -> Option<Vec<i64>> {
    ell.comps().iter().map(|c| if c.fract() == 0.0 { Some(*c as i64) } else { None }).collect()
}

/// `ln Z̃_{k,n} = ln Z_k(X_0 − X_n, …, X_{n−1} − X_n, 0)` for `n = 1..=N`, one
/// row per `k`.
///
/// With integer `ℓ` the recentred counts come from a running histogram of
/// levels, so each `n` costs time proportional to the number of levels near
/// the walker rather than `n`. Terms of the `e^{−g i/2}` tail smaller than
/// `1e-18` relative to the path length are dropped.
pub fn recentred_log_zk_series(
    positions: &[Site],
    ell: &Direction,
    k_list: &[i64],
    constants: &MixingConstants,
) -> Result<Vec<Vec<f64>>> {
    constants.validate()?;
    let n_max = positions.len().saturating_sub(1);
    let mut out = vec![Vec::with_capacity(n_max); k_list.len()];
    let Some(il) = integer_ell(ell) else {
        // general direction: evaluate each recentred prefix directly
        for n in 1..=n_max {
            let end = positions[n];
            let pre = Path {
                start: positions[0] - end,
                steps: positions[..=n].windows(2).map(|w| w[1] - w[0]).collect(),
            };
            let st = path_stats(&pre, ell, &StatsRequest { k_list: k_list.to_vec(), ..Default::default() }, Some(constants))?;
            for (row, k) in out.iter_mut().zip(k_list) {
                row.push(st.log_zk[k]);
            }
        }
        return Ok(out);
    };
    let level = |x: &Site| -> i64 { x.coords().iter().zip(&il).map(|(a, b)| *a as i64 * b).sum() };
    let mut hist: HashMap<i64, usize> = HashMap::new();
    let mut max_level = i64::MIN;
    let shift = constants.shift();
    let r = constants.r as i64;
    let tail_cut = {
        // smallest i with e^{−g i/2} · N < 1e-18
        let rate = 0.5 * constants.g;
        (((n_max.max(1) as f64).ln() + 18.0 * std::f64::consts::LN_10) / rate).ceil() as i64 + 1
    };
    let lo_level = positions.iter().map(&level).min().unwrap_or(0);
    *hist.entry(level(&positions[0])).or_insert(0) += 1;
    max_level = max_level.max(level(&positions[0]));
    for x in &positions[1..] {
        let cur = level(x);
        *hist.entry(cur).or_insert(0) += 1;
        max_level = max_level.max(cur);
        for (row, &k) in out.iter_mut().zip(k_list) {
            // relative level t = level − cur; counted when t ≥ k − shift
            let card: usize = ((cur + k - shift)..=max_level).map(|l| hist.get(&l).copied().unwrap_or(0)).sum();
            let weighted = match constants.mode {
                ConstantsMode::LDependent { .. } => 0.0,
                ConstantsMode::Gibbs => {
                    // V_j counts t = j − 1, j ≤ k − r: levels cur + j − 1 with weight e^{−g(k−j)/2}
                    let mut acc = 0.0;
                    let mut j = k - r;
                    while k - j <= tail_cut && cur + j > lo_level {
                        if let Some(v) = hist.get(&(cur + j - 1)) {
                            acc += *v as f64 * (-0.5 * constants.g * (k - j) as f64).exp();
                        }
                        j -= 1;
                    }
                    acc
                }
            };
            row.push(log_zk_from(constants, card, weighted));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::TransitionVector;

    fn right() -> EnvironmentModel {
        EnvironmentModel::constant(TransitionVector::point(Site::d1(1)), 0).unwrap()
    }

    #[test]
    fn deterministic_right_walk() {
        let m = right();
        let env = m.realize(0).unwrap();
        let p = run_quenched(&env, Site::d1(0), 5, &StopRule::FixedLength, 1).unwrap();
        let xs: Vec<i32> = p.positions().iter().map(|s| s.coord(0)).collect();
        assert_eq!(xs, vec![0, 1, 2, 3, 4, 5]);
        let stop = StopRule::HitLevel { ell: Direction::axis(1), level: 3.0 };
        assert_eq!(run_quenched(&env, Site::d1(0), 100, &stop, 1).unwrap().len(), 3);
    }

    #[test]
    fn recentred_ends_at_origin() {
        let m = EnvironmentModel::constant(TransitionVector::nearest_1d(0.6).unwrap(), 0).unwrap();
        let env = m.realize(0).unwrap();
        let p = run_quenched(&env, Site::d1(3), 50, &StopRule::FixedLength, 7).unwrap();
        let r = p.recentred();
        assert!(r.is_recentred());
        assert_eq!(r.steps, p.steps);
    }

    #[test]
    fn slab_counts_sum_to_length_plus_one() {
        let m = EnvironmentModel::constant(TransitionVector::nearest_1d(0.6).unwrap(), 0).unwrap();
        let env = m.realize(0).unwrap();
        let p = run_quenched(&env, Site::d1(0), 40, &StopRule::FixedLength, 2).unwrap();
        let st = path_stats(&p, &Direction::axis(1), &StatsRequest::default(), None).unwrap();
        assert_eq!(st.slab_counts.values().sum::<usize>(), 41);
    }

    #[test]
    fn monotone_path_zk_closed_form() {
        let n = 60;
        let path = Path { start: Site::d1(-n), steps: vec![Site::d1(1); n as usize] };
        let c = MixingConstants::gibbs(0.2, 1, 0.8, 0.5).unwrap();
        let st = path_stats(&path, &Direction::axis(1), &StatsRequest { k_list: vec![-2], ..Default::default() }, Some(&c))
            .unwrap();
        assert_eq!(st.hk_card[&-2], 4);
        // levels −4, −5, …, −n each visited once: weights e^{−g i/2} for i = 1..=n−3
        let q = (-0.4f64).exp();
        let tail: f64 = (1..=(n - 3)).map(|i| q.powi(i)).sum();
        let expected = -4.0 * 0.2f64.ln() + 0.5 * tail;
        assert!((st.log_zk[&-2] - expected).abs() < 1e-12);
        let closed = -4.0 * 0.2f64.ln() + 0.5 * q / (1.0 - q);
        assert!((st.log_zk[&-2] - closed).abs() < 1e-8);
    }

    #[test]
    fn zk_requires_recentring_and_constants() {
        let path = Path { start: Site::d1(0), steps: vec![Site::d1(1)] };
        let req = StatsRequest { k_list: vec![0], ..Default::default() };
        let c = MixingConstants::l_dependent(0.1, 1).unwrap();
        assert!(matches!(path_stats(&path, &Direction::axis(1), &req, Some(&c)), Err(Error::NotRecentred)));
        assert!(matches!(path_stats(&path.recentred(), &Direction::axis(1), &req, None), Err(Error::MissingConstants(_))));
    }

    #[test]
    fn velocity_of_constant_right() {
        let spec = EnsembleSpec {
            n_paths: 8,
            horizon: 20,
            stop: StopRule::FixedLength,
            start: Site::d1(0),
            ell: Direction::axis(1),
            tau_levels: vec![3, 50],
        };
        let e = run_annealed(&right(), &spec, 4).unwrap();
        assert!(e.records.iter().all(|r| r.tau[&3] == Some(3) && r.tau[&50].is_none()));
        let v = velocity_estimate(&e.records, Site::d1(0)).unwrap();
        assert_eq!(v.mean, vec![1.0]);
        assert_eq!(v.std_err, vec![0.0]);
    }

    #[test]
    fn telescoping_bound_example() {
        let pos: Vec<Site> = [0, 1, 0, 1, 2, 3].iter().map(|x| Site::d1(*x)).collect();
        let ell = Direction::axis(1);
        assert_eq!(telescoping_sum(&pos, &ell, 0, 3), Some(3.0));
        assert_eq!(vhat(&pos, &ell, VhatRequest { i1: 0, i2: 4, j: 3 }), Some(6));
        assert_eq!(vhat(&pos, &ell, VhatRequest { i1: 0, i2: 4, j: 9 }), None);
    }
}
