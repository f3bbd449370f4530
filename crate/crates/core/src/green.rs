//! Exact quenched computations on finite volumes.
//!
//! For a volume `U` and a fixed environment, the Green matrix
//! `G = (I − P_U)^{-1}` gives expected visit counts before the exit time
//! `T_U = inf{j ≥ 0 : X_j ∉ U}`. Visits are counted at times `j < T_U`;
//! since `X_{T_U} ∉ U` this agrees with sums running to `T_U` inclusive.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::environment::Quenched;
use crate::error::{Error, Result};
use crate::lattice::{Direction, LatticeBox, Site};
use crate::linalg::{BandedLu, DenseLu, Matrix};
use crate::scalar::Scalar;

/// Largest volume accepted by the dense solver unless overridden.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Largest half-width tried by [`green_column_1d`] before giving up.
pub const DEFAULT_MAX_WINDOW: i64 = 1 << 16;

/// Doubling stops when successive values differ by less than this.
pub const TRUNCATION_TOL: f64 = 1e-8;

/// A finite set of sites with its `M`-connectivity checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteVolume {
    sites: Vec<Site>,
    #[serde(skip)]
    index: HashMap<Site, usize>,
    pub contains_origin: bool,
    pub m_connected: bool,
    pub range: i64,
}

impl FiniteVolume {
    /// Sites are deduplicated and sorted. `range` is the `M` used for connectivity.
    pub fn new(mut sites: Vec<Site>, range: i64) -> Result<Self> {
        sites.sort();
        sites.dedup();
        let Some(first) = sites.first() else {
            return Err(Error::InvalidVolume("empty volume".into()));
        };
        if sites.iter().any(|s| s.dim() != first.dim()) {
            return Err(Error::InvalidVolume("sites differ in dimension".into()));
        }
        let index: HashMap<Site, usize> = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let contains_origin = sites.iter().any(|s| s.is_origin());
        let m_connected = connected(&sites, &index, range);
        Ok(FiniteVolume { sites, index, contains_origin, m_connected, range })
    }

    pub fn from_box(b: &LatticeBox, range: i64) -> Result<Self> {
        FiniteVolume::new(b.sites(), range)
    }

    /// `{a, …, b}` in one dimension.
    pub fn interval(a: i32, b: i32, range: i64) -> Result<Self> {
        FiniteVolume::new((a..=b).map(Site::d1).collect(), range)
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sites[0].dim()
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.index_of(s).is_some()
    }

    pub fn index_of(&self, s: &Site) -> Option<usize> {
        if self.index.is_empty() {
            // deserialized volumes rebuild lazily via binary search
            return self.sites.binary_search(s).ok();
        }
        self.index.get(s).copied()
    }

    /// `∂_M U`: sites outside `U` within sup-distance `M`.
    pub fn outer_boundary(&self) -> Vec<Site> {
        let ball = Site::ball(self.dim(), self.range as i32);
        let mut out: Vec<Site> = self
            .sites
            .iter()
            .flat_map(|x| ball.iter().map(move |d| *x + *d))
            .filter(|y| !self.contains(y))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Connectivity of the graph joining sites at sup-distance `≤ range`.
fn connected(sites: &[Site], index: &HashMap<Site, usize>, range: i64) -> bool {
    let ball = Site::ball(sites[0].dim(), range as i32);
    let mut seen = vec![false; sites.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for d in &ball {
            if let Some(&j) = index.get(&(sites[i] + *d)) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
    }
    count == sites.len()
}

/// Escape probabilities `g(x, y) = P_{x+y}(X_k ≠ x for all k ∈ [0, T_U])`
/// for each offset `y` of `ω_x`, with the transition probability `π_{x,x+y}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Escape<S> {
    pub offset: Site,
    pub prob: S,
    pub g: S,
}

/// Exact quenched occupancy data for one `(ω, U, start)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyTable<S> {
    pub volume: FiniteVolume,
    pub start: Site,
    pub ell: Direction,
    /// Expected visits before `T_U`, aligned with `volume.sites()`.
    pub visits: Vec<S>,
    pub exit_law: BTreeMap<Site, S>,
    pub expected_exit_time: S,
    /// `E[X_{T_U} · ℓ]`.
    pub expected_exit_projection: S,
    /// `f(x) = P_start(visit x before T_U)`, when requested.
    pub visit_prob: Option<Vec<S>>,
    /// `g(x, ·)` per site, when requested.
    pub escape: Option<Vec<Vec<Escape<S>>>>,
}

impl<S: Scalar> OccupancyTable<S> {
    pub fn visits_at(&self, x: &Site) -> S {
        self.volume.index_of(x).map_or(S::zero(), |i| self.visits[i].clone())
    }

    pub fn exit_mass(&self) -> S {
        self.exit_law.values().fold(S::zero(), |a, b| a + b.clone())
    }

    /// Flat `(site, visits, exit mass)` records for inspection.
    pub fn records(&self) -> Vec<(Site, f64, f64)> {
        let mut out: Vec<(Site, f64, f64)> =
            self.volume.sites().iter().zip(&self.visits).map(|(s, v)| (*s, v.to_f64_lossy(), 0.0)).collect();
        out.extend(self.exit_law.iter().map(|(s, p)| (*s, 0.0, p.to_f64_lossy())));
        out
    }
}

/// Options for [`occupancy_with`].
#[derive(Clone, Copy, Debug)]
pub struct OccupancyOptions {
    /// Also compute `f` and `g` (one extra solve per site).
    pub escape: bool,
    pub cap: usize,
}

impl Default for OccupancyOptions {
    fn default() -> Self {
        OccupancyOptions { escape: true, cap: DEFAULT_DENSE_CAP }
    }
}

/// Full occupancy table, including visit and escape probabilities.
pub fn occupancy<S: Scalar, E: Quenched + ?Sized>(
    env: &E,
    volume: &FiniteVolume,
    start: Site,
    ell: &Direction,
) -> Result<OccupancyTable<S>> {
    occupancy_with(env, volume, start, ell, OccupancyOptions::default())
}

pub fn occupancy_with<S: Scalar, E: Quenched + ?Sized>(
    env: &E,
    volume: &FiniteVolume,
    start: Site,
    ell: &Direction,
    opts: OccupancyOptions,
) -> Result<OccupancyTable<S>> {
    let n = volume.len();
    if n > opts.cap {
        return Err(Error::VolumeTooLarge { size: n, cap: opts.cap });
    }
    let s0 = volume
        .index_of(&start)
        .ok_or_else(|| Error::InvalidVolume(format!("start {start} is not in U")))?;
    let mut a = Matrix::<S>::identity(n);
    // per-site transitions: (target index or exit site, probability)
    let mut moves: Vec<Vec<(Result<usize, Site>, Site, S)>> = Vec::with_capacity(n);
    for x in volume.sites() {
        let tv = env.transition(x)?;
        let i = volume.index_of(x).expect("own site");
        let mut row = Vec::with_capacity(tv.offsets().len());
        for (e, p) in tv.iter() {
            if p <= 0.0 {
                continue;
            }
            let ps = S::from_f64_exact(p);
            let y = *x + e;
            match volume.index_of(&y) {
                Some(j) => {
                    let v = a.get(i, j).clone() - ps.clone();
                    *a.get_mut(i, j) = v;
                    row.push((Ok(j), e, ps));
                }
                None => row.push((Err(y), e, ps)),
            }
        }
        moves.push(row);
    }
    let lu = DenseLu::factor(a)?;
    let mut unit = vec![S::zero(); n];
    unit[s0] = S::one();
    let visits = lu.solve_transpose(&unit);

    let mut exit_law: BTreeMap<Site, S> = BTreeMap::new();
    for (i, row) in moves.iter().enumerate() {
        for (target, _, p) in row {
            if let Err(y) = target {
                let e = exit_law.entry(*y).or_insert_with(S::zero);
                *e = e.clone() + visits[i].clone() * p.clone();
            }
        }
    }
    let expected_exit_time = visits.iter().fold(S::zero(), |acc, v| acc + v.clone());
    let expected_exit_projection = exit_law
        .iter()
        .fold(S::zero(), |acc, (b, p)| acc + p.clone() * S::from_f64_exact(b.dot(ell)));

    let (visit_prob, escape) = if opts.escape {
        let mut f = Vec::with_capacity(n);
        let mut esc = Vec::with_capacity(n);
        for (x, row) in moves.iter().enumerate() {
            let mut ex = vec![S::zero(); n];
            ex[x] = S::one();
            // column x of G: expected visits to x from every start
            let col = lu.solve(&ex);
            f.push(col[s0].clone() / col[x].clone());
            esc.push(
                row.iter()
                    .map(|(target, e, p)| {
                        let g = match target {
                            Err(_) => S::one(),
                            Ok(j) if *j == x => S::zero(),
                            Ok(j) => S::one() - col[*j].clone() / col[x].clone(),
                        };
                        Escape { offset: *e, prob: p.clone(), g }
                    })
                    .collect(),
            );
        }
        (Some(f), Some(esc))
    } else {
        (None, None)
    };

    Ok(OccupancyTable {
        volume: volume.clone(),
        start,
        ell: *ell,
        visits,
        exit_law,
        expected_exit_time,
        expected_exit_projection,
        visit_prob,
        escape,
    })
}

/// `E Σ_{j<T_U} e^{−λ X_j·ℓ}`, the occupancy weighted by `e^{−λ x·ℓ}`.
pub fn exponential_moment<E: Quenched + ?Sized>(
    env: &E,
    lambda: f64,
    volume: &FiniteVolume,
    start: Site,
    ell: &Direction,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParams(format!("λ = {lambda} must be positive")));
    }
    let opts = OccupancyOptions { escape: false, ..Default::default() };
    let t: OccupancyTable<f64> = occupancy_with(env, volume, start, ell, opts)?;
    Ok(volume
        .sites()
        .iter()
        .zip(&t.visits)
        .map(|(x, v)| v * (-lambda * x.dot(ell)).exp())
        .sum())
}

/// Factored `I − P` on the 1-D window `[lo, hi]`, absorbing outside.
struct Window1d {
    lu: BandedLu<f64>,
}

impl Window1d {
    fn build<E: Quenched + ?Sized>(env: &E, lo: i32, hi: i32) -> Result<Self> {
        let n = (hi - lo + 1) as usize;
        let m = env.range() as usize;
        let mut band = BandedLu::<f64>::zeros(n, m, m);
        for i in 0..n {
            band.set(i, i, 1.0)?;
        }
        for i in 0..n {
            let x = Site::d1(lo + i as i32);
            for (e, p) in env.transition(&x)?.iter() {
                let y = lo + i as i32 + e.coord(0);
                if p > 0.0 && (lo..=hi).contains(&y) {
                    let j = (y - lo) as usize;
                    band.set(i, j, band.get(i, j) - p)?;
                }
            }
        }
        Ok(Window1d { lu: band.factor()? })
    }
}

/// `g_kj` for `k ∈ [lo, hi]`, with truncation control.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenColumn {
    pub j: i32,
    pub lo: i32,
    pub hi: i32,
    /// `values[k − lo] = g_kj`.
    pub values: Vec<f64>,
    /// Largest change between the last two windows.
    pub gap: f64,
    /// Final half-width added on each side of `[lo, hi]`.
    pub margin: i64,
}

impl GreenColumn {
    pub fn at(&self, k: i32) -> f64 {
        self.values[(k - self.lo) as usize]
    }
}

fn require_1d<E: Quenched + ?Sized>(env: &E) -> Result<()> {
    if env.dim() != 1 {
        return Err(Error::NotOneDimensional(env.dim()));
    }
    Ok(())
}

fn column_on<E: Quenched + ?Sized>(env: &E, j: i32, lo: i32, hi: i32, margin: i64) -> Result<Vec<f64>> {
    let a = lo.min(j) - margin as i32;
    let b = hi.max(j) + margin as i32;
    let n = (b - a + 1) as usize;
    let w = Window1d::build(env, a, b)?;
    let mut e = vec![0.0; n];
    e[(j - a) as usize] = 1.0;
    let col = w.lu.solve(&e);
    Ok((lo..=hi).map(|k| col[(k - a) as usize]).collect())
}

/// Expected visits `g_kj = Σ_n P_k(X_n = j)` for all `k ∈ [lo, hi]`, computed
/// on windows `[min(lo,j) − w, max(hi,j) + w]` with absorbing ends; `w`
/// doubles from `initial_margin` until values move by less than `tol`.
pub fn green_column_1d<E: Quenched + ?Sized>(
    env: &E,
    j: i32,
    lo: i32,
    hi: i32,
    initial_margin: i64,
    tol: f64,
    max_margin: i64,
) -> Result<GreenColumn> {
    require_1d(env)?;
    if lo > hi {
        return Err(Error::InvalidParams(format!("empty range [{lo}, {hi}]")));
    }
    let mut margin = initial_margin.max(1);
    let mut prev = column_on(env, j, lo, hi, margin)?;
    loop {
        let next_margin = margin * 2;
        if next_margin > max_margin {
            let next = column_on(env, j, lo, hi, margin)?;
            let gap = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            return Err(Error::TruncationFailed { gap: gap.max(f64::MIN_POSITIVE), window: margin });
        }
        let next = column_on(env, j, lo, hi, next_margin)?;
        let gap = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if gap < tol {
            return Ok(GreenColumn { j, lo, hi, values: next, gap, margin: next_margin });
        }
        prev = next;
        margin = next_margin;
    }
}

/// `g_ij` with the default truncation policy.
pub fn green_1d<E: Quenched + ?Sized>(env: &E, i: i32, j: i32, initial_margin: i64) -> Result<(f64, f64)> {
    let c = green_column_1d(env, j, i, i, initial_margin, TRUNCATION_TOL, DEFAULT_MAX_WINDOW)?;
    Ok((c.values[0], c.gap))
}

/// `P_i(V_j < ∞)` for a 1-D walk, from the harmonic equation on a truncated
/// window with `j` absorbing at value 1 and the window ends at value 0.
pub fn hitting_probability<E: Quenched + ?Sized>(env: &E, i: i32, j: i32, initial_margin: i64) -> Result<(f64, f64)> {
    require_1d(env)?;
    if i == j {
        return Ok((1.0, 0.0));
    }
    let solve = |margin: i64| -> Result<f64> {
        let a = i.min(j) - margin as i32;
        let b = i.max(j) + margin as i32;
        // unknowns: sites of [a, b] except j
        let sites: Vec<i32> = (a..=b).filter(|x| *x != j).collect();
        let n = sites.len();
        let idx = |x: i32| -> Option<usize> {
            if x < a || x > b || x == j {
                None
            } else if x < j {
                Some((x - a) as usize)
            } else {
                Some((x - a - 1) as usize)
            }
        };
        let m = env.range() as usize;
        let mut band = BandedLu::<f64>::zeros(n, m, m);
        let mut rhs = vec![0.0; n];
        for (r, x) in sites.iter().enumerate() {
            band.set(r, r, 1.0)?;
            for (e, p) in env.transition(&Site::d1(*x))?.iter() {
                let y = x + e.coord(0);
                if p <= 0.0 {
                    continue;
                }
                if y == j {
                    rhs[r] += p;
                } else if let Some(c) = idx(y) {
                    band.set(r, c, band.get(r, c) - p)?;
                }
            }
        }
        let h = band.factor()?.solve(&rhs);
        Ok(h[idx(i).expect("i in window")])
    };
    let mut margin = initial_margin.max(1);
    let mut prev = solve(margin)?;
    loop {
        margin *= 2;
        if margin > DEFAULT_MAX_WINDOW {
            return Err(Error::TruncationFailed { gap: f64::NAN, window: margin / 2 });
        }
        let next = solve(margin)?;
        let gap = (next - prev).abs();
        if gap < TRUNCATION_TOL {
            return Ok((next, gap));
        }
        prev = next;
    }
}
