//! The environment seen from the particle.
//!
//! `ℙ∞` is never built as an object. Instead this module estimates
//! expectations of bounded local functions under the Cesàro averages of
//! `ℙ_n`, constructs the one-dimensional invariant density `μ₀`, checks the
//! half-space admissibility of the bound `Z_k`, and verifies the restriction
//! identity of the deterministic north-east example exactly.

pub mod admissibility;
pub mod density;
pub mod singular;

use std::borrow::Cow;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::environment::{EnvironmentModel, Quenched, TransitionVector};
use crate::error::{Error, Result};
use crate::lattice::{Direction, Site};
use crate::stats::MeanEstimate;
use crate::walk::{run_annealed_map, walk_with, StopRule};

pub use admissibility::{zk_admissibility, zk_admissibility_run, AdmissibilityParams, ZkAdmissibility};
pub use density::{
    invariant_density_1d, lln_velocity_from_density, shift_identity_gap, DensityParams, EnvDensity,
    InvariantDensityTable,
};
pub use singular::{singular_restriction_check, SingularReport};

/// `T^x ω` restricted to a finite window of displacements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalView {
    pub window: Vec<Site>,
    pub values: BTreeMap<Site, TransitionVector>,
}

impl LocalView {
    pub fn capture<E: Quenched + ?Sized>(env: &E, x: Site, window: &[Site]) -> Result<Self> {
        let mut values = BTreeMap::new();
        for d in window {
            values.insert(*d, env.transition(&(x + *d))?.into_owned());
        }
        Ok(LocalView { window: window.to_vec(), values })
    }
}

impl Quenched for LocalView {
    fn dim(&self) -> usize {
        self.window.first().map_or(1, |s| s.dim())
    }

    fn range(&self) -> i64 {
        self.values.values().map(|t| t.range()).max().unwrap_or(1)
    }

    fn transition(&self, site: &Site) -> Result<Cow<'_, TransitionVector>> {
        self.values.get(site).map(Cow::Borrowed).ok_or(Error::SiteUndefined { site: *site })
    }
}

/// Bounded local functions of the environment seen from the particle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum LocalFunction {
    Constant { value: f64 },
    /// `π_{at, at+offset}`.
    TransitionProb {
        #[serde(default)]
        at: Option<Site>,
        offset: Site,
    },
    /// Component `axis` of the drift at displacement `at`.
    DriftComponent {
        #[serde(default)]
        at: Option<Site>,
        axis: usize,
    },
    DriftAlong {
        #[serde(default)]
        at: Option<Site>,
        ell: Direction,
    },
    /// `1{lo ≤ π_{at, at+offset} ≤ hi}`.
    IndicatorBox {
        #[serde(default)]
        at: Option<Site>,
        offset: Site,
        lo: f64,
        hi: f64,
    },
    Product { factors: Vec<LocalFunction> },
}

impl LocalFunction {
    /// Displacements the function reads.
    pub fn window(&self, dim: usize) -> Vec<Site> {
        let here = |at: &Option<Site>| vec![at.unwrap_or(Site::origin(dim))];
        match self {
            LocalFunction::Constant { .. } => Vec::new(),
            LocalFunction::TransitionProb { at, .. }
            | LocalFunction::DriftComponent { at, .. }
            | LocalFunction::DriftAlong { at, .. }
            | LocalFunction::IndicatorBox { at, .. } => here(at),
            LocalFunction::Product { factors } => {
                let mut w: Vec<Site> = factors.iter().flat_map(|f| f.window(dim)).collect();
                w.sort();
                w.dedup();
                w
            }
        }
    }

    /// `f(T^x ω)`.
    pub fn eval<E: Quenched + ?Sized>(&self, env: &E, x: &Site) -> Result<f64> {
        let at = |a: &Option<Site>| *x + a.unwrap_or(Site::origin(x.dim()));
        Ok(match self {
            LocalFunction::Constant { value } => *value,
            LocalFunction::TransitionProb { at: a, offset } => env.transition(&at(a))?.prob(offset),
            LocalFunction::DriftComponent { at: a, axis } => {
                let d = env.transition(&at(a))?.drift();
                *d.get(*axis).ok_or_else(|| Error::InvalidParams(format!("axis {axis} out of range")))?
            }
            LocalFunction::DriftAlong { at: a, ell } => env.transition(&at(a))?.drift_along(ell),
            LocalFunction::IndicatorBox { at: a, offset, lo, hi } => {
                let p = env.transition(&at(a))?.prob(offset);
                if *lo <= p && p <= *hi {
                    1.0
                } else {
                    0.0
                }
            }
            LocalFunction::Product { factors } => {
                let mut acc = 1.0;
                for f in factors {
                    acc *= f.eval(env, x)?;
                }
                acc
            }
        })
    }

    /// Evaluate on a captured view centred at the particle.
    pub fn eval_view(&self, view: &LocalView) -> Result<f64> {
        self.eval(view, &Site::origin(view.dim()))
    }
}

/// `Ẽℙ_N(f) = N⁻¹ Σ_{m=1}^N E f(T^{X_m} ω)` at one `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CesaroPoint {
    pub n: usize,
    pub estimate: MeanEstimate,
    /// Change from the previous `N`, and its standard error.
    pub delta: Option<MeanEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CesaroSeries {
    pub points: Vec<CesaroPoint>,
    /// Three successive doublings moved the estimate by less than the CI half-width.
    pub converged: bool,
}

/// Doubling schedule `n0, 2 n0, …` up to `n_max`.
pub fn doubling_schedule(n0: usize, n_max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = n0.max(1);
    while n <= n_max {
        out.push(n);
        n *= 2;
    }
    out
}

/// Cesàro averages of `f` along annealed paths, at every `N` in `schedule`.
pub fn cesaro_expectation(
    model: &EnvironmentModel,
    f: &LocalFunction,
    schedule: &[usize],
    n_paths: usize,
    seed: u64,
    z: f64,
) -> Result<CesaroSeries> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) || schedule[0] == 0 {
        return Err(Error::InvalidParams("schedule must be increasing and positive".into()));
    }
    let horizon = *schedule.last().expect("nonempty");
    let start = Site::origin(model.dim);
    // per path: running averages at each N of the schedule
    let rows: Vec<Vec<f64>> = run_annealed_map(model, n_paths, seed, |env, walk_seed, _| {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(schedule.len());
        let mut err = None;
        let mut next = 0;
        walk_with(env, start, horizon, &StopRule::FixedLength, walk_seed, |m, x| {
            if m == 0 || err.is_some() {
                return;
            }
            match f.eval(env, x) {
                Ok(v) => acc += v,
                Err(e) => err = Some(e),
            }
            if next < schedule.len() && m == schedule[next] {
                out.push(acc / m as f64);
                next += 1;
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    })?;
    let mut points = Vec::with_capacity(schedule.len());
    for (i, n) in schedule.iter().enumerate() {
        let xs: Vec<f64> = rows.iter().map(|r| r[i]).collect();
        let estimate = MeanEstimate::from_samples(&xs)?;
        let delta = if i > 0 {
            let d: Vec<f64> = rows.iter().map(|r| r[i] - r[i - 1]).collect();
            Some(MeanEstimate::from_samples(&d)?)
        } else {
            None
        };
        points.push(CesaroPoint { n: *n, estimate, delta });
    }
    let converged = cesaro_converged(&points, z);
    Ok(CesaroSeries { points, converged })
}

/// The last three doublings each moved the estimate by at most its CI half-width.
pub fn cesaro_converged(points: &[CesaroPoint], z: f64) -> bool {
    points.len() >= 4
        && points[points.len() - 3..]
            .iter()
            .all(|p| p.delta.as_ref().is_some_and(|d| d.mean.abs() <= p.estimate.half_width(z).max(f64::EPSILON)))
}
