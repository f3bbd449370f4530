//! Finite-alphabet Gibbs specifications.
//!
//! The interaction is translation invariant and consists of a single-site
//! field plus pair couplings at fixed offsets:
//!
//! ```text
//! H(σ) = Σ_x field[σ_x] + Σ_x Σ_e coupling_e[σ_x][σ_{x+e}]
//! ```
//!
//! Conditional measures on a finite volume `V` weight a configuration by
//! `exp(-β Σ_{A ∩ V ≠ ∅} U_A)`, computed exactly by enumeration.

pub mod mixing;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::TransitionVector;
use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, Site};
use crate::scalar::Real;
use crate::seed;

pub use mixing::{
    conditional_ratio_check, density_deviation_check, ds_mixing_check, ds_mixing_family,
    fit_certificate, single_site_density_ratios, variational_distance, ConditionalRatioReport,
    DensityDeviationReport, DensityRatioReport, MixingCertificate, MixingSample,
};

/// Default cap on `|alphabet|^|V|` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// A translation-invariant pair interaction `U_{x, x+offset}(a, b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCoupling {
    pub offset: Site,
    pub energy: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsSpec {
    pub alphabet: Vec<TransitionVector>,
    /// Single-site energies, one per letter.
    pub field: Vec<f64>,
    #[serde(default)]
    pub couplings: Vec<PairCoupling>,
    pub beta: f64,
}

impl GibbsSpec {
    pub fn new(
        alphabet: Vec<TransitionVector>,
        field: Vec<f64>,
        couplings: Vec<PairCoupling>,
        beta: f64,
    ) -> Result<Self> {
        let spec = GibbsSpec { alphabet, field, couplings, beta };
        spec.validate()?;
        Ok(spec)
    }

    /// Nearest-neighbour chain/lattice: one coupling matrix per positive axis.
    pub fn nearest_neighbour(
        dim: usize,
        alphabet: Vec<TransitionVector>,
        field: Vec<f64>,
        coupling: Vec<Vec<f64>>,
        beta: f64,
    ) -> Result<Self> {
        let couplings = (0..dim)
            .map(|a| PairCoupling { offset: Site::unit(dim, a, 1), energy: coupling.clone() })
            .collect();
        GibbsSpec::new(alphabet, field, couplings, beta)
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.alphabet.len();
        if q == 0 || q > u8::MAX as usize {
            return Err(Error::InvalidModel(format!("alphabet size {q} outside 1..=255")));
        }
        if self.field.len() != q {
            return Err(Error::InvalidModel("field length differs from alphabet size".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidModel(format!("beta = {} must be finite and >= 0", self.beta)));
        }
        let dim = self.dim();
        if self.alphabet.iter().any(|tv| tv.dim() != dim) {
            return Err(Error::InvalidModel("alphabet letters differ in dimension".into()));
        }
        let mut seen = Vec::new();
        for c in &self.couplings {
            if c.offset.dim() != dim || c.offset.is_origin() {
                return Err(Error::InvalidModel(format!("bad coupling offset {}", c.offset)));
            }
            if seen.contains(&c.offset) || seen.contains(&-c.offset) {
                return Err(Error::InvalidModel(format!("duplicate coupling offset {}", c.offset)));
            }
            seen.push(c.offset);
            if c.energy.len() != q || c.energy.iter().any(|row| row.len() != q) {
                return Err(Error::InvalidModel("coupling matrix must be q x q".into()));
            }
        }
        if self.field.iter().chain(self.couplings.iter().flat_map(|c| c.energy.iter().flatten())).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("interaction must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.alphabet[0].dim()
    }

    pub fn q(&self) -> usize {
        self.alphabet.len()
    }

    /// Interaction range `r` (sup-norm diameter of the largest interaction set).
    pub fn range(&self) -> i64 {
        self.couplings.iter().map(|c| c.offset.sup_norm()).max().unwrap_or(0)
    }

    /// `‖U‖ = sup_A sup |U_A|`.
    pub fn norm_u(&self) -> f64 {
        self.field
            .iter()
            .chain(self.couplings.iter().flat_map(|c| c.energy.iter().flatten()))
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Closed-form bound on single-site density ratios:
    /// `C₁ = exp(2^{card{y : ‖y‖ ≤ r} + 1} · β · ‖U‖)`.
    pub fn c1(&self) -> f64 {
        let ball = (2 * self.range() + 1).pow(self.dim() as u32) as i32;
        (2f64.powi(ball + 1) * self.beta * self.norm_u()).exp()
    }

    /// Energy of letter `a` at a site given its neighbours' letters.
    fn local_energy(&self, a: usize, neighbour: impl Fn(Site) -> u8, x: Site) -> f64 {
        let mut e = self.field[a];
        for c in &self.couplings {
            e += c.energy[a][neighbour(x + c.offset) as usize];
            e += c.energy[neighbour(x - c.offset) as usize][a];
        }
        e
    }
}

/// Letters outside a finite volume: explicit overrides on top of a default letter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Boundary {
    pub fixed: BTreeMap<Site, u8>,
    pub default: u8,
}

impl Boundary {
    pub fn uniform(letter: u8) -> Self {
        Boundary { fixed: BTreeMap::new(), default: letter }
    }

    pub fn with(mut self, site: Site, letter: u8) -> Self {
        self.fixed.insert(site, letter);
        self
    }

    pub fn letter(&self, site: &Site) -> u8 {
        *self.fixed.get(site).unwrap_or(&self.default)
    }
}

/// Exact probability table over `Ω_V`, index `Σ σ_i q^i` (first site fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct ProbTable<S> {
    pub sites: Vec<Site>,
    pub q: usize,
    pub probs: Vec<S>,
}

impl<S: Real> ProbTable<S> {
    pub fn total(&self) -> S {
        self.probs.iter().fold(S::zero(), |a, p| a + *p)
    }

    pub fn decode(&self, mut idx: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.sites.len());
        for _ in 0..self.sites.len() {
            out.push((idx % self.q) as u8);
            idx /= self.q;
        }
        out
    }

    pub fn encode(&self, config: &[u8]) -> usize {
        config.iter().rev().fold(0usize, |acc, &a| acc * self.q + a as usize)
    }

    /// Marginal on `keep` (which must be a subset of the table's sites).
    pub fn marginal(&self, keep: &[Site]) -> Result<ProbTable<S>> {
        let pos: Vec<usize> = keep
            .iter()
            .map(|s| {
                self.sites
                    .iter()
                    .position(|t| t == s)
                    .ok_or_else(|| Error::InvalidParams(format!("site {s} not in table")))
            })
            .collect::<Result<_>>()?;
        let size = self.q.pow(keep.len() as u32);
        let mut probs = vec![S::zero(); size];
        for (idx, p) in self.probs.iter().enumerate() {
            let full = self.decode(idx);
            let sub: usize = pos.iter().rev().fold(0usize, |acc, &i| acc * self.q + full[i] as usize);
            probs[sub] = probs[sub] + *p;
        }
        Ok(ProbTable { sites: keep.to_vec(), q: self.q, probs })
    }

    /// Condition on the letters of some sites; returns the table on the rest.
    pub fn condition(&self, fixed: &BTreeMap<Site, u8>) -> Result<ProbTable<S>> {
        let rest: Vec<Site> = self.sites.iter().filter(|s| !fixed.contains_key(s)).copied().collect();
        let size = self.q.pow(rest.len() as u32);
        let mut probs = vec![S::zero(); size];
        for (idx, p) in self.probs.iter().enumerate() {
            let full = self.decode(idx);
            let consistent = self
                .sites
                .iter()
                .zip(&full)
                .all(|(s, a)| fixed.get(s).is_none_or(|b| b == a));
            if !consistent {
                continue;
            }
            let sub: Vec<u8> = self
                .sites
                .iter()
                .zip(&full)
                .filter(|(s, _)| !fixed.contains_key(s))
                .map(|(_, a)| *a)
                .collect();
            let j = sub.iter().rev().fold(0usize, |acc, &a| acc * self.q + a as usize);
            probs[j] = probs[j] + *p;
        }
        let z = probs.iter().fold(S::zero(), |a, p| a + *p);
        if z <= S::zero() {
            return Err(Error::InvalidParams("conditioning event has probability zero".into()));
        }
        for p in probs.iter_mut() {
            *p = *p / z;
        }
        Ok(ProbTable { sites: rest, q: self.q, probs })
    }
}

/// Precomputed energy decomposition of a volume under a fixed boundary.
struct VolumeEnergy {
    /// `external[i][a]`: field plus couplings to boundary sites.
    external: Vec<Vec<f64>>,
    /// Internal pairs `(i, j, coupling index)` meaning `energy[σ_i][σ_j]`.
    internal: Vec<(usize, usize, usize)>,
}

impl VolumeEnergy {
    fn new(spec: &GibbsSpec, volume: &[Site], boundary: &Boundary) -> Self {
        let q = spec.q();
        let index = |s: &Site| volume.iter().position(|t| t == s);
        let mut external: Vec<Vec<f64>> = (0..volume.len()).map(|_| spec.field.clone()).collect();
        let mut internal = Vec::new();
        for (ci, c) in spec.couplings.iter().enumerate() {
            for (i, x) in volume.iter().enumerate() {
                match index(&(*x + c.offset)) {
                    Some(j) => internal.push((i, j, ci)),
                    None => {
                        let b = boundary.letter(&(*x + c.offset)) as usize;
                        for a in 0..q {
                            external[i][a] += c.energy[a][b];
                        }
                    }
                }
                if index(&(*x - c.offset)).is_none() {
                    let b = boundary.letter(&(*x - c.offset)) as usize;
                    for a in 0..q {
                        external[i][a] += c.energy[b][a];
                    }
                }
            }
        }
        VolumeEnergy { external, internal }
    }

    fn energy(&self, spec: &GibbsSpec, config: &[u8]) -> f64 {
        let mut e = 0.0;
        for (i, a) in config.iter().enumerate() {
            e += self.external[i][*a as usize];
        }
        for &(i, j, ci) in &self.internal {
            e += spec.couplings[ci].energy[config[i] as usize][config[j] as usize];
        }
        e
    }
}

/// Exact conditional law `Q_V^ω` on `Ω_V` given the boundary, by enumeration.
pub fn exact_conditional<S: Real>(spec: &GibbsSpec, volume: &[Site], boundary: &Boundary) -> Result<ProbTable<S>> {
    exact_conditional_capped(spec, volume, boundary, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_conditional_capped<S: Real>(
    spec: &GibbsSpec,
    volume: &[Site],
    boundary: &Boundary,
    cap: u128,
) -> Result<ProbTable<S>> {
    let q = spec.q();
    let size = (q as u128).checked_pow(volume.len() as u32).unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::EnumerationCap { what: "exact conditional", size, cap });
    }
    let ve = VolumeEnergy::new(spec, volume, boundary);
    let size = size as usize;
    let mut log_w = Vec::with_capacity(size);
    let mut config = vec![0u8; volume.len()];
    for idx in 0..size {
        let mut k = idx;
        for slot in config.iter_mut() {
            *slot = (k % q) as u8;
            k /= q;
        }
        log_w.push(-spec.beta * ve.energy(spec, &config));
    }
    let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<S> = log_w.iter().map(|l| S::from(l - m).unwrap().exp()).collect();
    let z = w.iter().fold(S::zero(), |a, b| a + *b);
    Ok(ProbTable { sites: volume.to_vec(), q, probs: w.into_iter().map(|x| x / z).collect() })
}

/// Marginal on `lambda` of the conditional law on the interval `[a, b]` of a
/// one-dimensional specification, by a transfer-matrix sweep over blocks of
/// `range` letters. Agrees with `exact_conditional(..).marginal(lambda)` but
/// costs `O((b - a) q^(range + |Λ|))`.
pub fn chain_marginal(spec: &GibbsSpec, a: i32, b: i32, boundary: &Boundary, lambda: &[Site]) -> Result<ProbTable<f64>> {
    if spec.dim() != 1 {
        return Err(Error::NotOneDimensional(spec.dim()));
    }
    if a > b || lambda.iter().any(|s| s.coord(0) < a || s.coord(0) > b) {
        return Err(Error::InvalidVolume(format!("Λ must lie in [{a}, {b}]")));
    }
    let q = spec.q();
    let r = spec.range().max(1) as u32;
    let n_state = q.pow(r);
    let n_lam = q.pow(lambda.len() as u32);
    if (n_state as u128) * (n_lam as u128) > DEFAULT_ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            what: "chain transfer state",
            size: (n_state * n_lam) as u128,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    // digit j of a state is the letter at i - 1 - j
    let digit = |s: usize, j: u32| (s / q.pow(j)) % q;
    let init = (0..r).fold(0usize, |acc, j| acc + boundary.letter(&Site::d1(a - 1 - j as i32)) as usize * q.pow(j));
    let mut alpha = vec![0.0f64; n_state * n_lam];
    alpha[init * n_lam] = 1.0;
    let offsets: Vec<i32> = spec.couplings.iter().map(|c| c.offset.coord(0)).collect();
    for i in a..=b {
        let slot = lambda.iter().position(|s| s.coord(0) == i);
        let mut next = vec![0.0f64; n_state * n_lam];
        for s in 0..n_state {
            let letter_at = |y: i32| -> usize {
                if y > b {
                    boundary.letter(&Site::d1(y)) as usize
                } else {
                    digit(s, (i - 1 - y) as u32)
                }
            };
            for c in 0..q {
                let mut e = spec.field[c];
                for (cp, &d) in spec.couplings.iter().zip(&offsets) {
                    let y = i + d;
                    if y < i || y > b {
                        e += cp.energy[c][letter_at(y)];
                    }
                    let x = i - d;
                    if x < i || x > b {
                        e += cp.energy[letter_at(x)][c];
                    }
                }
                let w = (-spec.beta * e).exp();
                let s2 = (s * q) % n_state + c;
                for l in 0..n_lam {
                    let v = alpha[s * n_lam + l];
                    if v == 0.0 {
                        continue;
                    }
                    let l2 = match slot {
                        Some(k) => l + c * q.pow(k as u32),
                        None => l,
                    };
                    next[s2 * n_lam + l2] += v * w;
                }
            }
        }
        let z: f64 = next.iter().sum();
        alpha = next.into_iter().map(|v| v / z).collect();
    }
    let mut probs = vec![0.0; n_lam];
    for (idx, v) in alpha.iter().enumerate() {
        probs[idx % n_lam] += v;
    }
    Ok(ProbTable { sites: lambda.to_vec(), q, probs })
}

/// One realization of the field on a box by heat-bath Glauber sweeps,
/// starting from i.i.d. uniform letters, with `boundary` letter fixed outside.
pub fn glauber_window(
    spec: &GibbsSpec,
    window: &LatticeBox,
    boundary_letter: u8,
    sweeps: u32,
    seed: u64,
) -> Vec<u8> {
    let q = spec.q();
    let mut rng = seed::stream_rng(seed);
    let mut letters: Vec<u8> = (0..window.len()).map(|_| rng.random_range(0..q) as u8).collect();
    let sites = window.sites();
    let mut weights = vec![0.0; q];
    for _ in 0..sweeps {
        for (i, x) in sites.iter().enumerate() {
            let lookup = |s: Site| window.index(&s).map_or(boundary_letter, |j| letters[j]);
            for (a, w) in weights.iter_mut().enumerate() {
                *w = -spec.beta * spec.local_energy(a, lookup, *x);
            }
            let m = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for w in weights.iter_mut() {
                *w = (*w - m).exp();
                total += *w;
            }
            let mut u = rng.random::<f64>() * total;
            let mut pick = q - 1;
            for (a, w) in weights.iter().enumerate() {
                if u < *w {
                    pick = a;
                    break;
                }
                u -= w;
            }
            letters[i] = pick as u8;
        }
    }
    letters
}
