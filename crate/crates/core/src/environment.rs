//! Environment laws and their quenched realizations.
//!
//! An [`EnvironmentModel`] is a law on transition-vector fields over `Z^d`.
//! [`EnvironmentModel::realize`] fixes one environment from a 64-bit seed;
//! lazy kinds compute `ω_x` on demand from a counter-based hash of
//! `(seed, x)`, so nothing is stored and every lookup is reproducible.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{self, GibbsSpec};
use crate::lattice::{Direction, LatticeBox, Site};
use crate::seed::{self, site_word, unit_f64};

/// Transition probabilities out of one site: `π_{x, x+e}` for each offset `e`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransitionVector")]
pub struct TransitionVector {
    offsets: Vec<Site>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTransitionVector {
    offsets: Vec<Site>,
    probs: Vec<f64>,
}

impl TryFrom<RawTransitionVector> for TransitionVector {
    type Error = Error;

    fn try_from(raw: RawTransitionVector) -> Result<Self> {
        TransitionVector::new(raw.offsets, raw.probs)
    }
}

impl TransitionVector {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(offsets: Vec<Site>, probs: Vec<f64>) -> Result<Self> {
        if offsets.is_empty() || offsets.len() != probs.len() {
            return Err(Error::InvalidTransitionVector(format!(
                "{} offsets vs {} probabilities",
                offsets.len(),
                probs.len()
            )));
        }
        let dim = offsets[0].dim();
        if offsets.iter().any(|o| o.dim() != dim) {
            return Err(Error::InvalidTransitionVector("offsets differ in dimension".into()));
        }
        for (i, o) in offsets.iter().enumerate() {
            if offsets[..i].contains(o) {
                return Err(Error::InvalidTransitionVector(format!("duplicate offset {o}")));
            }
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidTransitionVector("negative or non-finite probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidTransitionVector(format!("probabilities sum to {total}")));
        }
        Ok(TransitionVector { offsets, probs })
    }

    /// A deterministic step.
    pub fn point(offset: Site) -> Self {
        TransitionVector { offsets: vec![offset], probs: vec![1.0] }
    }

    /// One-dimensional nearest-neighbour vector: right with `p`, left with `1 - p`.
    pub fn nearest_1d(p: f64) -> Result<Self> {
        TransitionVector::new(vec![Site::d1(1), Site::d1(-1)], vec![p, 1.0 - p])
    }

    pub fn offsets(&self) -> &[Site] {
        &self.offsets
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (Site, f64)> + '_ {
        self.offsets.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn dim(&self) -> usize {
        self.offsets[0].dim()
    }

    /// Largest sup-norm among offsets carrying positive mass.
    pub fn range(&self) -> i64 {
        self.iter().filter(|(_, p)| *p > 0.0).map(|(o, _)| o.sup_norm()).max().unwrap_or(0)
    }

    pub fn prob(&self, offset: &Site) -> f64 {
        self.offsets.iter().position(|o| o == offset).map_or(0.0, |i| self.probs[i])
    }

    /// `D = Σ_e e · π_{0e}`.
    pub fn drift(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim()];
        for (o, p) in self.iter() {
            for (a, slot) in d.iter_mut().enumerate() {
                *slot += o.coord(a) as f64 * p;
            }
        }
        d
    }

    pub fn drift_along(&self, ell: &Direction) -> f64 {
        self.iter().map(|(o, p)| o.dot(ell) * p).sum()
    }

    /// Inverse-CDF draw from a uniform `u ∈ [0, 1)`.
    #[inline]
    pub fn sample_offset(&self, u: f64) -> Site {
        let mut acc = 0.0;
        for (o, p) in self.iter() {
            acc += p;
            if u < acc {
                return o;
            }
        }
        // u landed in the rounding gap at the top; take the last positive entry
        self.iter().rev().find(|(_, p)| *p > 0.0).map(|(o, _)| o).unwrap_or(self.offsets[0])
    }
}

/// Drift of a transition vector.
pub fn drift(v: &TransitionVector) -> Vec<f64> {
    v.drift()
}

/// Parse an alphabet file: one transition vector per line, entries
/// `offset:prob` separated by whitespace, offset coordinates separated by
/// commas. Blank lines and `#` comments are skipped.
///
/// ```text
/// # 1-D nearest neighbour
/// 1:0.7 -1:0.3
/// 1:0.9 -1:0.1
/// ```
pub fn parse_alphabet(text: &str) -> Result<Vec<TransitionVector>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| Error::InvalidTransitionVector(format!("line {}: {m}", lineno + 1));
        let mut offsets = Vec::new();
        let mut probs = Vec::new();
        for tok in line.split_whitespace() {
            let (off, prob) = tok.split_once(':').ok_or_else(|| bad("expected offset:prob"))?;
            let coords: Vec<i32> = off
                .split(',')
                .map(|c| c.trim().parse::<i32>().map_err(|_| bad("bad offset coordinate")))
                .collect::<Result<_>>()?;
            offsets.push(Site::new(&coords)?);
            probs.push(prob.parse::<f64>().map_err(|_| bad("bad probability"))?);
        }
        out.push(TransitionVector::new(offsets, probs).map_err(|e| bad(&e.to_string()))?);
    }
    if out.is_empty() {
        return Err(Error::InvalidTransitionVector("alphabet file has no records".into()));
    }
    Ok(out)
}

pub fn format_alphabet(alphabet: &[TransitionVector]) -> String {
    let mut s = String::new();
    for tv in alphabet {
        let parts: Vec<String> = tv
            .iter()
            .map(|(o, p)| {
                let c: Vec<String> = o.coords().iter().map(|c| c.to_string()).collect();
                format!("{}:{}", c.join(","), p)
            })
            .collect();
        let _ = writeln!(s, "{}", parts.join(" "));
    }
    s
}

pub fn load_alphabet(path: &Path) -> Result<Vec<TransitionVector>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_alphabet(&text)
}

/// The law of the environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Law {
    /// The same vector at every site.
    Constant { vector: TransitionVector },
    /// I.i.d. Dirichlet transition vectors on a fixed offset set.
    IidDirichlet { offsets: Vec<Site>, concentration: Vec<f64> },
    /// I.i.d. letters drawn from a finite alphabet.
    IidFiniteAlphabet { alphabet: Vec<TransitionVector>, weights: Vec<f64> },
    /// Stationary field, independent across `ℓ`-levels at distance `>= gap`.
    ///
    /// Each site uses, with probability `share`, a uniform shared by its level
    /// block (the fractional part of a sum of `gap` level uniforms) and
    /// otherwise its own uniform; the letter is the weighted inverse CDF.
    LDependent {
        alphabet: Vec<TransitionVector>,
        weights: Vec<f64>,
        gap: u32,
        /// Integer direction defining the levels `x·ℓ`.
        ell: Vec<i32>,
        share: f64,
    },
    /// Gibbs field realized on a finite box by Glauber sweeps.
    GibbsWindow {
        spec: GibbsSpec,
        window: LatticeBox,
        #[serde(default = "default_burn_in")]
        burn_in_sweeps: u32,
        #[serde(default)]
        boundary_letter: u8,
    },
    /// `d = 2`, each site points right or up with probability 1/2.
    DeterministicNe,
}

fn default_burn_in() -> u32 {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentModel {
    pub dim: usize,
    /// Finite range `M` in sup-norm.
    pub range: u32,
    pub master_seed: u64,
    pub law: Law,
}

impl EnvironmentModel {
    pub fn new(dim: usize, range: u32, master_seed: u64, law: Law) -> Result<Self> {
        let m = EnvironmentModel { dim, range, master_seed, law };
        m.validate()?;
        Ok(m)
    }

    pub fn constant(vector: TransitionVector, master_seed: u64) -> Result<Self> {
        let dim = vector.dim();
        let range = vector.range().max(1) as u32;
        EnvironmentModel::new(dim, range, master_seed, Law::Constant { vector })
    }

    pub fn iid_alphabet(alphabet: Vec<TransitionVector>, weights: Vec<f64>, master_seed: u64) -> Result<Self> {
        let dim = alphabet.first().map_or(1, |t| t.dim());
        let range = alphabet.iter().map(|t| t.range()).max().unwrap_or(1).max(1) as u32;
        EnvironmentModel::new(dim, range, master_seed, Law::IidFiniteAlphabet { alphabet, weights })
    }

    pub fn deterministic_ne(master_seed: u64) -> Self {
        EnvironmentModel { dim: 2, range: 1, master_seed, law: Law::DeterministicNe }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        if self.dim == 0 || self.dim > crate::lattice::MAX_DIM {
            return bad(format!("dimension {} unsupported", self.dim));
        }
        if self.range == 0 {
            return bad("range M must be positive".into());
        }
        let check_letters = |letters: &[TransitionVector]| -> Result<()> {
            if letters.is_empty() {
                return Err(Error::InvalidModel("empty alphabet".into()));
            }
            for tv in letters {
                if tv.dim() != self.dim {
                    return Err(Error::InvalidModel("letter dimension differs from model".into()));
                }
                if tv.offsets().iter().any(|o| o.sup_norm() > self.range as i64) {
                    return Err(Error::InvalidModel(format!("offset beyond range M = {}", self.range)));
                }
            }
            Ok(())
        };
        let check_weights = |w: &[f64], n: usize| -> Result<()> {
            if w.len() != n || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidModel("weights must be nonnegative, one per letter, not all zero".into()));
            }
            Ok(())
        };
        match &self.law {
            Law::Constant { vector } => check_letters(std::slice::from_ref(vector)),
            Law::IidDirichlet { offsets, concentration } => {
                if offsets.is_empty() || offsets.len() != concentration.len() {
                    return bad("dirichlet needs one concentration per offset".into());
                }
                if concentration.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return bad("dirichlet concentrations must be positive".into());
                }
                if offsets.iter().any(|o| o.dim() != self.dim || o.sup_norm() > self.range as i64) {
                    return bad("dirichlet offset outside range or dimension".into());
                }
                Ok(())
            }
            Law::IidFiniteAlphabet { alphabet, weights } => {
                check_letters(alphabet)?;
                check_weights(weights, alphabet.len())
            }
            Law::LDependent { alphabet, weights, gap, ell, share } => {
                check_letters(alphabet)?;
                check_weights(weights, alphabet.len())?;
                if *gap == 0 {
                    return bad("gap L must be >= 1".into());
                }
                if ell.len() != self.dim || ell.iter().all(|c| *c == 0) {
                    return bad("l-dependent ell must be a nonzero integer vector of dimension d".into());
                }
                if !(0.0..=1.0).contains(share) {
                    return bad("share must lie in [0, 1]".into());
                }
                Ok(())
            }
            Law::GibbsWindow { spec, window, boundary_letter, .. } => {
                spec.validate()?;
                check_letters(&spec.alphabet)?;
                if window.dim() != self.dim {
                    return bad("gibbs window dimension differs from model".into());
                }
                if *boundary_letter as usize >= spec.q() {
                    return bad("boundary letter outside alphabet".into());
                }
                Ok(())
            }
            Law::DeterministicNe => {
                if self.dim != 2 {
                    return bad("deterministic-ne is two-dimensional".into());
                }
                Ok(())
            }
        }
    }

    /// Letters of a finite-support law, with their weights; `None` for Dirichlet.
    pub fn support(&self) -> Option<Vec<(TransitionVector, f64)>> {
        match &self.law {
            Law::Constant { vector } => Some(vec![(vector.clone(), 1.0)]),
            Law::IidDirichlet { .. } => None,
            Law::IidFiniteAlphabet { alphabet, weights } | Law::LDependent { alphabet, weights, .. } => {
                let total: f64 = weights.iter().sum();
                Some(
                    alphabet
                        .iter()
                        .zip(weights)
                        .filter(|(_, w)| **w > 0.0)
                        .map(|(a, w)| (a.clone(), w / total))
                        .collect(),
                )
            }
            Law::GibbsWindow { spec, .. } => {
                let q = spec.q() as f64;
                Some(spec.alphabet.iter().map(|a| (a.clone(), 1.0 / q)).collect())
            }
            Law::DeterministicNe => Some(vec![
                (TransitionVector::point(Site::d2(1, 0)), 0.5),
                (TransitionVector::point(Site::d2(0, 1)), 0.5),
            ]),
        }
    }

    /// Fix one environment.
    pub fn realize(&self, env_seed: u64) -> Result<Environment<'_>> {
        let realized = match &self.law {
            Law::GibbsWindow { spec, window, burn_in_sweeps, boundary_letter } => Realized::Gibbs {
                window: *window,
                letters: gibbs::glauber_window(spec, window, *boundary_letter, *burn_in_sweeps, env_seed),
            },
            Law::DeterministicNe => Realized::Letters(vec![
                TransitionVector::point(Site::d2(1, 0)),
                TransitionVector::point(Site::d2(0, 1)),
            ]),
            Law::IidFiniteAlphabet { weights, .. } | Law::LDependent { weights, .. } => {
                Realized::Cumulative(cumulative(weights))
            }
            _ => Realized::Lazy,
        };
        Ok(Environment { model: self, seed: env_seed, realized })
    }

    /// `ω_site` in the realization keyed by `master_seed`.
    pub fn sample_site(&self, site: &Site) -> Result<TransitionVector> {
        Ok(self.realize(self.master_seed)?.transition(site)?.into_owned())
    }
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect()
}

#[inline]
fn pick(cum: &[f64], u: f64) -> usize {
    cum.iter().position(|c| u < *c).unwrap_or(cum.len() - 1)
}

/// A fixed (quenched) environment that can be queried site by site.
pub trait Quenched: Sync {
    fn dim(&self) -> usize;

    /// Range `M`: no transition reaches further in sup-norm.
    fn range(&self) -> i64;

    fn transition(&self, site: &Site) -> Result<Cow<'_, TransitionVector>>;

    /// One step of the walk from `site` given a uniform draw.
    #[inline]
    fn step(&self, site: &Site, u: f64) -> Result<Site> {
        Ok(*site + self.transition(site)?.sample_offset(u))
    }
}

enum Realized {
    Lazy,
    Cumulative(Vec<f64>),
    Letters(Vec<TransitionVector>),
    Gibbs { window: LatticeBox, letters: Vec<u8> },
}

/// A realization of an [`EnvironmentModel`].
pub struct Environment<'m> {
    model: &'m EnvironmentModel,
    seed: u64,
    realized: Realized,
}

impl<'m> Environment<'m> {
    pub fn model(&self) -> &'m EnvironmentModel {
        self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Alphabet index at `site` for finite-alphabet kinds.
    pub fn letter(&self, site: &Site) -> Result<Option<usize>> {
        Ok(match (&self.model.law, &self.realized) {
            (Law::IidFiniteAlphabet { .. }, Realized::Cumulative(cum)) => {
                Some(pick(cum, unit_f64(site_word(self.seed, site, 0))))
            }
            (Law::LDependent { gap, ell, share, .. }, Realized::Cumulative(cum)) => {
                let level: i64 = site.coords().iter().zip(ell).map(|(x, l)| *x as i64 * *l as i64).sum();
                let own = unit_f64(site_word(self.seed, site, 1));
                let coin = unit_f64(site_word(self.seed, site, 2));
                let u = if coin < *share {
                    let s: f64 = (0..*gap as i64)
                        .map(|m| unit_f64(seed::derive_seed(self.seed, "level", (level + m) as u64)))
                        .sum();
                    s.fract()
                } else {
                    own
                };
                Some(pick(cum, u))
            }
            (Law::GibbsWindow { .. }, Realized::Gibbs { window, letters }) => {
                let i = window.index(site).ok_or(Error::WindowExceeded { site: *site })?;
                Some(letters[i] as usize)
            }
            (Law::DeterministicNe, _) => Some((site_word(self.seed, site, 0) & 1) as usize),
            (Law::Constant { .. }, _) => Some(0),
            _ => None,
        })
    }
}

impl Quenched for Environment<'_> {
    fn dim(&self) -> usize {
        self.model.dim
    }

    fn range(&self) -> i64 {
        self.model.range as i64
    }

    fn transition(&self, site: &Site) -> Result<Cow<'_, TransitionVector>> {
        match &self.model.law {
            Law::Constant { vector } => Ok(Cow::Borrowed(vector)),
            Law::IidDirichlet { offsets, concentration } => {
                let mut rng = seed::stream_rng(site_word(self.seed, site, 0));
                let mut probs = vec![0.0; offsets.len()];
                loop {
                    for (p, a) in probs.iter_mut().zip(concentration) {
                        *p = Gamma::new(*a, 1.0).expect("validated concentration").sample(&mut rng);
                    }
                    let total: f64 = probs.iter().sum();
                    if total > 0.0 && total.is_finite() {
                        probs.iter_mut().for_each(|p| *p /= total);
                        break;
                    }
                }
                // renormalized gammas sum to 1 up to a few ulps
                Ok(Cow::Owned(TransitionVector { offsets: offsets.clone(), probs }))
            }
            Law::IidFiniteAlphabet { alphabet, .. } | Law::LDependent { alphabet, .. } => {
                let i = self.letter(site)?.expect("finite alphabet");
                Ok(Cow::Borrowed(&alphabet[i]))
            }
            Law::GibbsWindow { spec, .. } => {
                let i = self.letter(site)?.expect("gibbs letter");
                Ok(Cow::Borrowed(&spec.alphabet[i]))
            }
            Law::DeterministicNe => match &self.realized {
                Realized::Letters(l) => Ok(Cow::Borrowed(&l[(site_word(self.seed, site, 0) & 1) as usize])),
                _ => unreachable!("deterministic-ne realizes its two letters"),
            },
        }
    }
}

/// An environment given by an explicit site table, with an optional fallback vector.
#[derive(Clone, Debug)]
pub struct TableEnvironment {
    dim: usize,
    range: i64,
    table: HashMap<Site, TransitionVector>,
    fallback: Option<TransitionVector>,
}

impl TableEnvironment {
    pub fn new(table: HashMap<Site, TransitionVector>, fallback: Option<TransitionVector>) -> Result<Self> {
        let any = table.values().next().or(fallback.as_ref()).ok_or_else(|| Error::InvalidModel("empty table".into()))?;
        let dim = any.dim();
        let range = table.values().chain(fallback.iter()).map(|t| t.range()).max().unwrap_or(1).max(1);
        Ok(TableEnvironment { dim, range, table, fallback })
    }

    /// Snapshot of another environment on a finite set of sites.
    pub fn capture<E: Quenched + ?Sized>(env: &E, sites: &[Site], fallback: Option<TransitionVector>) -> Result<Self> {
        let mut table = HashMap::with_capacity(sites.len());
        for s in sites {
            table.insert(*s, env.transition(s)?.into_owned());
        }
        TableEnvironment::new(table, fallback)
    }
}

impl Quenched for TableEnvironment {
    fn dim(&self) -> usize {
        self.dim
    }

    fn range(&self) -> i64 {
        self.range
    }

    fn transition(&self, site: &Site) -> Result<Cow<'_, TransitionVector>> {
        self.table
            .get(site)
            .or(self.fallback.as_ref())
            .map(Cow::Borrowed)
            .ok_or(Error::SiteUndefined { site: *site })
    }
}

/// The shifted environment `T^shift ω`: `(T^k ω)_x = ω_{x+k}`.
pub struct Shifted<'a, E: ?Sized> {
    pub inner: &'a E,
    pub shift: Site,
}

impl<E: Quenched + ?Sized> Quenched for Shifted<'_, E> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn range(&self) -> i64 {
        self.inner.range()
    }

    fn transition(&self, site: &Site) -> Result<Cow<'_, TransitionVector>> {
        self.inner.transition(&(*site + self.shift))
    }
}

/// Ellipticity diagnostics for a model and direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub ell: Direction,
    /// Smallest transition probability over support letters and the model's
    /// offset set; `None` when it cannot be certified (Dirichlet).
    pub kappa_hat: Option<f64>,
    pub strong_ok: bool,
    pub weak_ok: bool,
    /// First failing `(letter index, offset)` when a check fails.
    pub witness: Option<(usize, Site)>,
}

/// Strong ellipticity (`π_{0e} >= κ > 0` on the offset set) and weak
/// ellipticity (`π_{0e} > 0` for unit `e` with `e·ℓ >= 0`).
pub fn check_ellipticity(model: &EnvironmentModel, ell: &Direction) -> EllipticityReport {
    let units: Vec<Site> = (0..model.dim)
        .flat_map(|a| [Site::unit(model.dim, a, 1), Site::unit(model.dim, a, -1)])
        .filter(|e| e.dot(ell) >= 0.0)
        .collect();
    match model.support() {
        None => {
            // Dirichlet: density reaches zero, but every listed offset is a.s. positive.
            let Law::IidDirichlet { offsets, .. } = &model.law else { unreachable!() };
            let missing = units.iter().find(|u| !offsets.contains(u));
            EllipticityReport {
                ell: *ell,
                kappa_hat: None,
                strong_ok: false,
                weak_ok: missing.is_none(),
                witness: missing.map(|u| (0, *u)),
            }
        }
        Some(letters) => {
            let mut offset_set: Vec<Site> = Vec::new();
            for (tv, _) in &letters {
                for o in tv.offsets() {
                    if !offset_set.contains(o) {
                        offset_set.push(*o);
                    }
                }
            }
            let mut kappa = f64::INFINITY;
            let mut witness = None;
            for (i, (tv, _)) in letters.iter().enumerate() {
                for o in &offset_set {
                    let p = tv.prob(o);
                    if p < kappa {
                        kappa = p;
                        if p <= 0.0 && witness.is_none() {
                            witness = Some((i, *o));
                        }
                    }
                }
            }
            let strong_ok = kappa > 0.0;
            let mut weak_witness = None;
            'outer: for (i, (tv, _)) in letters.iter().enumerate() {
                for u in &units {
                    if tv.prob(u) <= 0.0 {
                        weak_witness = Some((i, *u));
                        break 'outer;
                    }
                }
            }
            EllipticityReport {
                ell: *ell,
                kappa_hat: if strong_ok { Some(kappa) } else { None },
                strong_ok,
                weak_ok: weak_witness.is_none(),
                witness: witness.or(weak_witness),
            }
        }
    }
}

/// Draws of `ω_x` from the single-site marginal, for moment estimates.
///
/// Lazy kinds use sites spaced along the first axis (beyond the dependence
/// gap); Gibbs windows use interior sites of successive realizations.
pub fn marginal_draws(model: &EnvironmentModel, n: usize, seed: u64) -> Result<Vec<TransitionVector>> {
    const PER_REALIZATION: usize = 256;
    let mut out = Vec::with_capacity(n);
    let mut r = 0u64;
    while out.len() < n {
        let env = model.realize(seed::derive_seed(seed, "marginal", r))?;
        r += 1;
        match &model.law {
            Law::GibbsWindow { window, spec, .. } => {
                let margin = 2 * spec.range().max(1) as i32;
                for s in window.sites() {
                    let interior = (0..model.dim).all(|a| {
                        s.coord(a) - window.lo.coord(a) >= margin && window.hi.coord(a) - s.coord(a) >= margin
                    });
                    if interior && out.len() < n {
                        out.push(env.transition(&s)?.into_owned());
                    }
                }
            }
            law => {
                let stride = match law {
                    Law::LDependent { gap, ell, .. } => {
                        let l0 = ell[0].unsigned_abs().max(1) as i32;
                        (*gap as i32 + l0 - 1) / l0 + 1
                    }
                    _ => 1,
                };
                for k in 0..PER_REALIZATION {
                    if out.len() >= n {
                        break;
                    }
                    let mut s = Site::origin(model.dim);
                    s = s + Site::unit(model.dim, 0, 1 + k as i32 * stride);
                    out.push(env.transition(&s)?.into_owned());
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alphabet_07_09() -> Vec<TransitionVector> {
        vec![TransitionVector::nearest_1d(0.7).unwrap(), TransitionVector::nearest_1d(0.9).unwrap()]
    }

    #[test]
    fn transition_vector_validation() {
        assert!(TransitionVector::new(vec![Site::d1(1)], vec![0.9]).is_err());
        assert!(TransitionVector::new(vec![Site::d1(1), Site::d1(1)], vec![0.5, 0.5]).is_err());
        assert!(TransitionVector::new(vec![Site::d1(1), Site::d1(-1)], vec![1.2, -0.2]).is_err());
        assert!(TransitionVector::nearest_1d(0.7).is_ok());
    }

    #[test]
    fn drift_examples() {
        let ne = TransitionVector::new(vec![Site::d2(1, 0), Site::d2(0, 1)], vec![0.5, 0.5]).unwrap();
        assert_eq!(drift(&ne), vec![0.5, 0.5]);
        assert_eq!(drift(&TransitionVector::point(Site::d2(1, 0))), vec![1.0, 0.0]);
        let d = drift(&TransitionVector::nearest_1d(0.7).unwrap());
        assert!((d[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn constant_model_returns_its_vector() {
        let v = TransitionVector::nearest_1d(0.7).unwrap();
        let m = EnvironmentModel::constant(v.clone(), 1).unwrap();
        for x in [-5, 0, 17] {
            assert_eq!(m.sample_site(&Site::d1(x)).unwrap(), v);
        }
    }

    #[test]
    fn deterministic_ne_is_right_or_up_with_half_probability() {
        let site = Site::d2(3, -1);
        let right = TransitionVector::point(Site::d2(1, 0));
        let up = TransitionVector::point(Site::d2(0, 1));
        let n = 20_000;
        let mut rights = 0;
        for s in 0..n {
            let v = EnvironmentModel::deterministic_ne(s).sample_site(&site).unwrap();
            assert!(v == right || v == up);
            if v == right {
                rights += 1;
            }
        }
        let f = rights as f64 / n as f64;
        assert!((f - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{f}");
    }

    #[test]
    fn dirichlet_is_deterministic_per_site() {
        let m = EnvironmentModel::new(
            2,
            1,
            42,
            Law::IidDirichlet {
                offsets: vec![Site::d2(1, 0), Site::d2(-1, 0), Site::d2(0, 1), Site::d2(0, -1)],
                concentration: vec![2.0, 1.0, 1.0, 1.0],
            },
        )
        .unwrap();
        let a = m.sample_site(&Site::d2(4, 4)).unwrap();
        let b = m.sample_site(&Site::d2(4, 4)).unwrap();
        assert_eq!(a, b);
        assert!((a.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_ne!(a, m.sample_site(&Site::d2(4, 5)).unwrap());
    }

    #[test]
    fn gibbs_window_fails_outside() {
        let spec = GibbsSpec::nearest_neighbour(1, alphabet_07_09(), vec![0.0, 0.0], vec![vec![0.0, 0.0], vec![0.0, 0.0]], 0.1).unwrap();
        let m = EnvironmentModel::new(
            1,
            1,
            3,
            Law::GibbsWindow { spec, window: LatticeBox::new(Site::d1(-3), Site::d1(3)).unwrap(), burn_in_sweeps: 5, boundary_letter: 0 },
        )
        .unwrap();
        let env = m.realize(9).unwrap();
        assert!(env.transition(&Site::d1(3)).is_ok());
        assert!(matches!(env.transition(&Site::d1(4)), Err(Error::WindowExceeded { .. })));
    }

    #[test]
    fn ellipticity_examples() {
        let ell1 = Direction::axis(1);
        let c = EnvironmentModel::constant(TransitionVector::nearest_1d(0.7).unwrap(), 0).unwrap();
        let r = check_ellipticity(&c, &ell1);
        assert!(r.strong_ok && r.weak_ok);
        assert!((r.kappa_hat.unwrap() - 0.3).abs() < 1e-15);

        let ne = EnvironmentModel::deterministic_ne(0);
        let r = check_ellipticity(&ne, &Direction::new(&[1.0, 1.0]).unwrap());
        assert!(!r.strong_ok && !r.weak_ok);
        assert!(r.witness.is_some());

        let a = EnvironmentModel::iid_alphabet(
            vec![TransitionVector::nearest_1d(0.6).unwrap(), TransitionVector::nearest_1d(0.8).unwrap()],
            vec![1.0, 1.0],
            0,
        )
        .unwrap();
        let r = check_ellipticity(&a, &ell1);
        assert!((r.kappa_hat.unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn alphabet_file_round_trip() {
        let text = "# two letters\n1:0.7 -1:0.3\n\n1:0.9 -1:0.1  # strong\n";
        let a = parse_alphabet(text).unwrap();
        for (x, y) in a.iter().zip(alphabet_07_09()) {
            assert_eq!(x.offsets(), y.offsets());
            assert!(x.probs().iter().zip(y.probs()).all(|(p, q)| (p - q).abs() < 1e-15));
        }
        assert_eq!(parse_alphabet(&format_alphabet(&a)).unwrap(), a);
        assert!(parse_alphabet("1:0.5 -1:0.4\n").is_err());
        assert!(parse_alphabet("1,0:0.5 0,1:0.5\n").unwrap()[0].dim() == 2);
    }

    #[test]
    fn model_serde_round_trip() {
        let m = EnvironmentModel::iid_alphabet(alphabet_07_09(), vec![0.5, 0.5], 11).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: EnvironmentModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}
