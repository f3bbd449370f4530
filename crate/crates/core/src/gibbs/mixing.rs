//! Exhaustive checks of the Dobrushin–Shlosman strong-decay bound and the
//! density-ratio bounds derived from it.
//!
//! Everything here enumerates: boundary configurations on `∂_r V`, letters at
//! the flipped site, and configurations inside the volume. Tables are small
//! (a handful of sites), so suprema over `ω` are exact rather than sampled.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{chain_marginal, exact_conditional, Boundary, GibbsSpec, ProbTable};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::scalar::Scalar;
use crate::seed;

/// Boundary configurations enumerated exhaustively up to this many; beyond
/// that, `trials` random configurations are drawn.
const EXHAUSTIVE_BOUNDARY_CAP: u128 = 1 << 14;

/// Largest base volume accepted by [`ds_mixing_family`] (subsets are enumerated).
const MAX_FAMILY_BASE: usize = 10;

/// `Var(μ, ν) = sup_E (μ(E) − ν(E))`, attained at `E = {μ > ν}`.
///
/// For probability vectors this is half the `L¹` distance.
pub fn variational_distance<S: Scalar>(p: &[S], q: &[S]) -> Result<S> {
    if p.len() != q.len() {
        return Err(Error::MismatchedSupports { left: p.len(), right: q.len() });
    }
    let mut acc = S::zero();
    for (a, b) in p.iter().zip(q) {
        let d = a.clone() - b.clone();
        if d > S::zero() {
            acc = acc + d;
        }
    }
    Ok(acc)
}

/// `∂_r V = {x ∉ V : dist(x, V) ≤ r}` in sup-norm.
pub fn outer_boundary(volume: &[Site], r: i64) -> Vec<Site> {
    let Some(first) = volume.first() else { return Vec::new() };
    let mut out: Vec<Site> = Vec::new();
    for v in volume {
        for d in Site::ball(first.dim(), r as i32) {
            let y = *v + d;
            if !volume.contains(&y) && !out.contains(&y) {
                out.push(y);
            }
        }
    }
    out.sort();
    out
}

/// `∂_r(Λ^c)`: sites of `Λ` within distance `r` of its complement.
pub fn inner_boundary(lambda: &[Site], r: i64) -> Vec<Site> {
    let Some(first) = lambda.first() else { return Vec::new() };
    let ball = Site::ball(first.dim(), r as i32);
    lambda.iter().filter(|x| ball.iter().any(|d| !lambda.contains(&(**x + *d)))).copied().collect()
}

/// `dist(x, A) = min_{y ∈ A} |x − y|_∞`.
pub fn set_dist(x: &Site, set: &[Site]) -> i64 {
    set.iter().map(|y| x.sup_dist(y)).min().unwrap_or(i64::MAX)
}

/// All letter assignments on `sites`, or `trials` random ones if there are too many.
fn boundary_configs(q: usize, sites: &[Site], trials: usize, seed: u64) -> Vec<Vec<u8>> {
    let total = (q as u128).checked_pow(sites.len() as u32).unwrap_or(u128::MAX);
    if total <= EXHAUSTIVE_BOUNDARY_CAP {
        (0..total as usize)
            .map(|mut k| {
                (0..sites.len())
                    .map(|_| {
                        let a = (k % q) as u8;
                        k /= q;
                        a
                    })
                    .collect()
            })
            .collect()
    } else {
        let mut rng = seed::stream_rng(seed);
        (0..trials).map(|_| (0..sites.len()).map(|_| rng.random_range(0..q) as u8).collect()).collect()
    }
}

fn boundary_from(sites: &[Site], letters: &[u8]) -> Boundary {
    let mut b = Boundary::uniform(0);
    for (s, a) in sites.iter().zip(letters) {
        b.fixed.insert(*s, *a);
    }
    b
}

/// One tested instance of the strong-decay bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingSample {
    pub volume: Vec<Site>,
    pub lambda: Vec<Site>,
    pub x: Site,
    /// `dist(x, Λ)`.
    pub dist: i64,
    /// Largest `Var(Q^ω_{V,Λ}, Q^ω̄_{V,Λ})` over boundary pairs differing only at `x`.
    pub distance: f64,
}

/// Largest variational distance between `Λ`-marginals of the conditional
/// laws on `V` for boundaries that differ only at `x ∈ ∂_r V`.
pub fn ds_mixing_check(
    spec: &GibbsSpec,
    volume: &[Site],
    lambda: &[Site],
    x: Site,
    trials: usize,
    seed: u64,
) -> Result<MixingSample> {
    let r = spec.range();
    if lambda.is_empty() || lambda.iter().any(|s| !volume.contains(s)) {
        return Err(Error::InvalidVolume("Λ must be a nonempty subset of V".into()));
    }
    let boundary = outer_boundary(volume, r);
    if !boundary.contains(&x) {
        return Err(Error::InvalidVolume(format!("{x} is not in the r-boundary of V")));
    }
    let others: Vec<Site> = boundary.iter().filter(|s| **s != x).copied().collect();
    let q = spec.q();
    let mut worst = 0.0f64;
    for cfg in boundary_configs(q, &others, trials, seed) {
        let base = boundary_from(&others, &cfg);
        let marginals: Vec<ProbTable<f64>> = (0..q)
            .map(|a| exact_conditional::<f64>(spec, volume, &base.clone().with(x, a as u8))?.marginal(lambda))
            .collect::<Result<_>>()?;
        for a in 0..q {
            for b in (a + 1)..q {
                worst = worst.max(variational_distance(&marginals[a].probs, &marginals[b].probs)?);
            }
        }
    }
    Ok(MixingSample { volume: volume.to_vec(), lambda: lambda.to_vec(), x, dist: set_dist(&x, lambda), distance: worst })
}

fn subsets(base: &[Site]) -> impl Iterator<Item = Vec<Site>> + '_ {
    (1u32..(1 << base.len())).map(move |mask| {
        base.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| *s).collect()
    })
}

/// Strong-decay samples for every `V' ⊆ base`, `Λ' ⊆ V'` and `x ∈ ∂_r V'`.
///
/// Conditional tables depend on `V'` and the boundary only, so each is
/// computed once and reused for all `Λ'`.
pub fn ds_mixing_family(spec: &GibbsSpec, base: &[Site]) -> Result<Vec<MixingSample>> {
    if base.is_empty() || base.len() > MAX_FAMILY_BASE {
        return Err(Error::InvalidVolume(format!("family base must have 1..={MAX_FAMILY_BASE} sites")));
    }
    let r = spec.range();
    let q = spec.q();
    let mut out = Vec::new();
    for volume in subsets(base) {
        let boundary = outer_boundary(&volume, r);
        let lambdas: Vec<Vec<Site>> = subsets(&volume).collect();
        for &x in &boundary {
            let others: Vec<Site> = boundary.iter().filter(|s| **s != x).copied().collect();
            let mut worst = vec![0.0f64; lambdas.len()];
            for cfg in boundary_configs(q, &others, 0, 0) {
                let base_b = boundary_from(&others, &cfg);
                let tables: Vec<ProbTable<f64>> = (0..q)
                    .map(|a| exact_conditional::<f64>(spec, &volume, &base_b.clone().with(x, a as u8)))
                    .collect::<Result<_>>()?;
                for (li, lambda) in lambdas.iter().enumerate() {
                    let m: Vec<ProbTable<f64>> = tables.iter().map(|t| t.marginal(lambda)).collect::<Result<_>>()?;
                    for a in 0..q {
                        for b in (a + 1)..q {
                            worst[li] = worst[li].max(variational_distance(&m[a].probs, &m[b].probs)?);
                        }
                    }
                }
            }
            for (lambda, distance) in lambdas.iter().zip(worst) {
                out.push(MixingSample {
                    volume: volume.clone(),
                    lambda: lambda.clone(),
                    x,
                    dist: set_dist(&x, lambda),
                    distance,
                });
            }
        }
    }
    Ok(out)
}

/// Fitted constants for the strong-decay bound and the bounds built on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingCertificate {
    /// `G` in `Var ≤ G e^{−g dist}`.
    pub big_g: f64,
    pub g: f64,
    /// Single-site density-ratio bound `exp(2^{card ball_r + 1} β ‖U‖)`.
    pub c1: f64,
    /// `C = C₁ G e^{g r}`.
    pub c: f64,
    pub r: i64,
    /// Largest observed `lhs / rhs` over every instance checked against this certificate.
    pub max_violation: f64,
}

impl MixingCertificate {
    pub fn eq61_bound(&self, dist: i64) -> f64 {
        self.big_g * (-self.g * dist as f64).exp()
    }

    /// `C Σ_y e^{−g dist(x, y)}` over the given sites `y`.
    pub fn lemma_sum(&self, x: &Site, ys: &[Site]) -> f64 {
        self.c * ys.iter().map(|y| (-self.g * x.sup_dist(y) as f64).exp()).sum::<f64>()
    }

    /// `C̃ = C e^{g r} · surface`, the constant in the half-space density bound.
    pub fn c_tilde(&self, surface: f64) -> f64 {
        self.c * (self.g * self.r as f64).exp() * surface
    }

    /// Fold an observed `lhs / rhs` into `max_violation`.
    pub fn record(&mut self, ratio: f64) {
        if ratio > self.max_violation {
            self.max_violation = ratio;
        }
    }

    pub fn passes(&self) -> bool {
        self.max_violation <= 1.0
    }
}

/// Fit `(G, g)` to strong-decay samples.
///
/// `g` is minus the least-squares slope of `ln max Var` against distance
/// (one point per distance); `G` is then the smallest constant making
/// `G e^{−g d}` dominate every sample. When every distance is zero the field
/// decouples and `G = 0`, `g = 1`.
pub fn fit_certificate(spec: &GibbsSpec, samples: &[MixingSample]) -> Result<MixingCertificate> {
    if samples.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut by_dist: BTreeMap<i64, f64> = BTreeMap::new();
    for s in samples {
        let e = by_dist.entry(s.dist).or_insert(0.0);
        *e = e.max(s.distance);
    }
    let pts: Vec<(f64, f64)> =
        by_dist.iter().filter(|(_, v)| **v > 1e-300).map(|(d, v)| (*d as f64, v.ln())).collect();
    let r = spec.range();
    let c1 = spec.c1();
    if pts.is_empty() {
        return Ok(MixingCertificate { big_g: 0.0, g: 1.0, c1, c: 0.0, r, max_violation: 0.0 });
    }
    if pts.len() < 2 {
        return Err(Error::Precondition("need samples at two or more distances to fit g".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let g = -sxy / sxx;
    let big_g = samples.iter().map(|s| s.distance * (g * s.dist as f64).exp()).fold(0.0, f64::max);
    let c = c1 * big_g * (g * r as f64).exp();
    let mut cert = MixingCertificate { big_g, g, c1, c, r, max_violation: 0.0 };
    for s in samples {
        let rhs = cert.eq61_bound(s.dist);
        if rhs > 0.0 {
            cert.record(s.distance / rhs);
        }
    }
    Ok(cert)
}

/// Largest single-site density ratio `dQ^ω_V / dQ^ω̄_V` versus the closed-form `C₁`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRatioReport {
    pub max_ratio: f64,
    pub c1: f64,
    pub instances: usize,
    pub ok: bool,
}

/// Ratios of normalized conditional densities on `V` for boundaries that
/// differ at one site of `∂_r V`, maximized over boundaries, flipped letters
/// and configurations `ξ_V`.
pub fn single_site_density_ratios(spec: &GibbsSpec, volume: &[Site], tol: f64) -> Result<DensityRatioReport> {
    let r = spec.range();
    let q = spec.q();
    let boundary = outer_boundary(volume, r);
    let mut max_ratio = 1.0f64;
    let mut instances = 0;
    for &x in &boundary {
        let others: Vec<Site> = boundary.iter().filter(|s| **s != x).copied().collect();
        for cfg in boundary_configs(q, &others, 0, 0) {
            let b = boundary_from(&others, &cfg);
            let tables: Vec<ProbTable<f64>> = (0..q)
                .map(|a| exact_conditional::<f64>(spec, volume, &b.clone().with(x, a as u8)))
                .collect::<Result<_>>()?;
            for a in 0..q {
                for c in 0..q {
                    if a == c {
                        continue;
                    }
                    for (pa, pc) in tables[a].probs.iter().zip(&tables[c].probs) {
                        max_ratio = max_ratio.max(pa / pc);
                        instances += 1;
                    }
                }
            }
        }
    }
    let c1 = spec.c1();
    Ok(DensityRatioReport { max_ratio, c1, instances, ok: max_ratio <= c1 * (1.0 + tol) })
}

/// Marginal density deviations `|dQ^ω_{V,Λ}/dQ^ω̄_{V,Λ}(σ_Λ) − 1|` against
/// `C Σ_{y ∈ ∂_r(Λ^c)} e^{−g dist(x, y)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityDeviationReport {
    pub max_deviation: f64,
    /// Largest `lhs / rhs` (0 when every deviation is 0).
    pub max_violation: f64,
    pub instances: usize,
}

/// Check the marginal density-ratio bound for `Λ ⊂ V` with `dist(Λ, V^c) > r`,
/// over every `x ∈ ∂_r V` (other sites of `V^c` leave the ratio at 1).
pub fn density_deviation_check(
    spec: &GibbsSpec,
    volume: &[Site],
    lambda: &[Site],
    cert: &MixingCertificate,
    tol: f64,
) -> Result<DensityDeviationReport> {
    let r = spec.range();
    let q = spec.q();
    let boundary = outer_boundary(volume, r);
    if lambda.is_empty() || lambda.iter().any(|s| !volume.contains(s)) {
        return Err(Error::InvalidVolume("Λ must be a nonempty subset of V".into()));
    }
    if lambda.iter().any(|s| set_dist(s, &boundary) <= r) {
        return Err(Error::Precondition("dist(Λ, V^c) must exceed r".into()));
    }
    let inner = inner_boundary(lambda, r);
    let mut report = DensityDeviationReport { max_deviation: 0.0, max_violation: 0.0, instances: 0 };
    for &x in &boundary {
        let rhs = cert.lemma_sum(&x, &inner);
        let others: Vec<Site> = boundary.iter().filter(|s| **s != x).copied().collect();
        for cfg in boundary_configs(q, &others, 0, 0) {
            let b = boundary_from(&others, &cfg);
            let m: Vec<ProbTable<f64>> = (0..q)
                .map(|a| exact_conditional::<f64>(spec, volume, &b.clone().with(x, a as u8))?.marginal(lambda))
                .collect::<Result<_>>()?;
            for a in 0..q {
                for c in 0..q {
                    if a == c {
                        continue;
                    }
                    for (pa, pc) in m[a].probs.iter().zip(&m[c].probs) {
                        let dev = (pa / pc - 1.0).abs();
                        report.instances += 1;
                        report.max_deviation = report.max_deviation.max(dev);
                        if dev > tol {
                            let v = if rhs > 0.0 { dev / rhs } else { f64::INFINITY };
                            report.max_violation = report.max_violation.max(v);
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Outcome of the half-space conditioning check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRatioReport {
    pub lambda: Vec<Site>,
    /// `H = {x ≥ h}`.
    pub h: i32,
    /// `sup_ω max_σ P(σ_Λ | ω_H) / P(σ_Λ)`, the supremum over all nonnegative `F`.
    pub sup_exact: f64,
    /// Supremum over the built-in `F` catalog (cylinder indicators and
    /// single-coordinate functions); never exceeds `sup_exact`.
    pub sup_catalog: f64,
    /// `exp(C Σ_{x ∈ ∂_r(H^c), y ∈ ∂_r(Λ^c)} e^{−g dist(x,y)})`.
    pub bound: f64,
    /// Half-width of the truncated window reached by the doubling control.
    pub window_radius: i32,
    pub ok: bool,
}

/// Infinite-volume marginal on `Λ` approximated on `[lo − R, hi]` (or
/// `[lo − R, hi + R]` when `right` is `None`) with `R` doubled until the
/// marginal moves by less than `tol`.
/// Largest window radius tried when approximating infinite-volume marginals.
const MAX_RADIUS: i32 = 1 << 16;

fn truncated_marginal(
    spec: &GibbsSpec,
    lambda: &[Site],
    right: Option<(i32, &[u8])>,
    tol: f64,
) -> Result<(ProbTable<f64>, i32)> {
    let lo = lambda.iter().map(|s| s.coord(0)).min().expect("nonempty Λ");
    let hi = lambda.iter().map(|s| s.coord(0)).max().expect("nonempty Λ");
    let mut prev: Option<ProbTable<f64>> = None;
    let mut radius = 2;
    loop {
        let (a, b, boundary) = match right {
            Some((h, letters)) => {
                let mut bd = Boundary::uniform(0);
                for (i, l) in letters.iter().enumerate() {
                    bd.fixed.insert(Site::d1(h + i as i32), *l);
                }
                (lo - radius, h - 1, bd)
            }
            None => (lo - radius, hi + radius, Boundary::uniform(0)),
        };
        let table = chain_marginal(spec, a, b, &boundary, lambda)?;
        if let Some(p) = &prev {
            let gap = p.probs.iter().zip(&table.probs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            if gap < tol {
                return Ok((table, radius));
            }
        }
        if radius >= MAX_RADIUS {
            return Err(Error::NonConvergence(format!("Λ-marginal still moving at window radius {radius}")));
        }
        prev = Some(table);
        radius *= 2;
    }
}

/// Nonnegative `Λ`-measurable test functions, as value vectors over `Ω_Λ`.
fn f_catalog(q: usize, n: usize) -> Vec<Vec<f64>> {
    let size = q.pow(n as u32);
    let decode = |mut idx: usize| -> Vec<usize> {
        (0..n)
            .map(|_| {
                let a = idx % q;
                idx /= q;
                a
            })
            .collect()
    };
    let mut out = Vec::new();
    // cylinder indicators: fix the letters on a nonempty subset of coordinates
    for mask in 1u32..(1 << n) {
        let coords: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        for pattern in 0..q.pow(coords.len() as u32) {
            let want = {
                let mut p = pattern;
                coords
                    .iter()
                    .map(|_| {
                        let a = p % q;
                        p /= q;
                        a
                    })
                    .collect::<Vec<_>>()
            };
            out.push(
                (0..size)
                    .map(|idx| {
                        let c = decode(idx);
                        if coords.iter().zip(&want).all(|(i, a)| c[*i] == *a) {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            );
        }
    }
    // single-coordinate functions: letter index + 1
    for i in 0..n {
        out.push((0..size).map(|idx| decode(idx)[i] as f64 + 1.0).collect());
    }
    out
}

/// Compare `E(F | 𝔖_H) / E(F)` with its exponential bound, for the 1-D
/// half-line `H = {x ≥ h}` and `Λ` at distance greater than `r` from it.
///
/// Only the `r` sites of `H` nearest its edge influence `Λ`, so the
/// supremum over `ω` enumerates their letters. The infinite-volume field is
/// approximated by truncated windows with doubling control (tolerance `tol`).
pub fn conditional_ratio_check(
    spec: &GibbsSpec,
    lambda: &[Site],
    h: i32,
    cert: &MixingCertificate,
    tol: f64,
) -> Result<ConditionalRatioReport> {
    if spec.dim() != 1 {
        return Err(Error::NotOneDimensional(spec.dim()));
    }
    if lambda.is_empty() {
        return Err(Error::InvalidVolume("Λ must be nonempty".into()));
    }
    let r = spec.range().max(1);
    let edge: Vec<Site> = (0..r as i32).map(|i| Site::d1(h + i)).collect();
    if lambda.iter().any(|s| set_dist(s, &edge) <= r || s.coord(0) >= h) {
        return Err(Error::Precondition("dist(Λ, H) must exceed r".into()));
    }
    let q = spec.q();
    let (uncond, mut radius) = truncated_marginal(spec, lambda, None, tol)?;
    let catalog = f_catalog(q, lambda.len());
    let e_f: Vec<f64> = catalog.iter().map(|f| f.iter().zip(&uncond.probs).map(|(a, b)| a * b).sum()).collect();
    let mut sup_exact = 0.0f64;
    let mut sup_catalog = 0.0f64;
    for letters in boundary_configs(q, &edge, 0, 0) {
        let (cond, rad) = truncated_marginal(spec, lambda, Some((h, &letters)), tol)?;
        radius = radius.max(rad);
        for (pc, pu) in cond.probs.iter().zip(&uncond.probs) {
            sup_exact = sup_exact.max(pc / pu);
        }
        for (f, ef) in catalog.iter().zip(&e_f) {
            let ec: f64 = f.iter().zip(&cond.probs).map(|(a, b)| a * b).sum();
            sup_catalog = sup_catalog.max(ec / ef);
        }
    }
    let inner = inner_boundary(lambda, r);
    let sum: f64 = edge.iter().map(|x| cert.lemma_sum(x, &inner)).sum();
    let bound = sum.exp();
    Ok(ConditionalRatioReport {
        lambda: lambda.to_vec(),
        h,
        sup_exact,
        sup_catalog,
        bound,
        window_radius: radius,
        ok: sup_exact <= bound * (1.0 + tol),
    })
}
