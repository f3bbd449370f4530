//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rwre::{Direction, EnvironmentModel, FiniteVolume, Law, Quenched, Site, TransitionVector};

/// Connected random set of `size` sites containing the origin, grown by unit steps.
pub fn random_volume(rng: &mut impl Rng, dim: usize, size: usize, range: i64) -> FiniteVolume {
    let mut set: BTreeSet<Site> = [Site::origin(dim)].into_iter().collect();
    while set.len() < size {
        let v: Vec<Site> = set.iter().copied().collect();
        let x = v[rng.random_range(0..v.len())];
        let axis = rng.random_range(0..dim);
        let sign = if rng.random::<bool>() { 1 } else { -1 };
        set.insert(x + Site::unit(dim, axis, sign));
    }
    FiniteVolume::new(set.into_iter().collect(), range).unwrap()
}

pub fn dirichlet_2d(seed: u64) -> EnvironmentModel {
    let offsets = vec![Site::d2(1, 0), Site::d2(-1, 0), Site::d2(0, 1), Site::d2(0, -1)];
    EnvironmentModel::new(2, 1, seed, Law::IidDirichlet { offsets, concentration: vec![2.0, 1.0, 1.5, 1.0] }).unwrap()
}

pub fn range_two_1d(seed: u64) -> EnvironmentModel {
    let t = |p: [f64; 4]| {
        TransitionVector::new(vec![Site::d1(2), Site::d1(1), Site::d1(-1), Site::d1(-2)], p.to_vec()).unwrap()
    };
    EnvironmentModel::new(
        1,
        2,
        seed,
        Law::IidFiniteAlphabet {
            alphabet: vec![t([0.25, 0.5, 0.125, 0.125]), t([0.125, 0.375, 0.25, 0.25])],
            weights: vec![1.0, 1.0],
        },
    )
    .unwrap()
}

pub fn alphabet_07_09(seed: u64) -> EnvironmentModel {
    EnvironmentModel::iid_alphabet(
        vec![TransitionVector::nearest_1d(0.7).unwrap(), TransitionVector::nearest_1d(0.9).unwrap()],
        vec![1.0, 1.0],
        seed,
    )
    .unwrap()
}

/// Occupancy by summing over all paths, grouped by their current position,
/// until the mass still inside `U` is below `tail`.
pub struct Enumerated {
    pub visits: HashMap<Site, f64>,
    pub exit_law: BTreeMap<Site, f64>,
    pub exit_time: f64,
    pub exit_projection: f64,
    pub steps: usize,
}

pub fn enumerate_paths<E: Quenched>(env: &E, u: &FiniteVolume, start: Site, ell: &Direction, tail: f64) -> Enumerated {
    let mut mass: HashMap<Site, f64> = [(start, 1.0)].into_iter().collect();
    let mut visits: HashMap<Site, f64> = HashMap::new();
    let mut exit_law: BTreeMap<Site, f64> = BTreeMap::new();
    let mut steps = 0;
    loop {
        let inside: f64 = mass.values().sum();
        if inside <= tail {
            break;
        }
        let mut next: HashMap<Site, f64> = HashMap::new();
        for (x, m) in &mass {
            *visits.entry(*x).or_default() += m;
            for (e, p) in env.transition(x).unwrap().iter() {
                let y = *x + e;
                if u.contains(&y) {
                    *next.entry(y).or_default() += m * p;
                } else {
                    *exit_law.entry(y).or_default() += m * p;
                }
            }
        }
        mass = next;
        steps += 1;
        assert!(steps < 10_000_000, "walk does not leave U");
    }
    let exit_time = visits.values().sum();
    let exit_projection = exit_law.iter().map(|(y, p)| y.dot(ell) * p).sum();
    Enumerated { visits, exit_law, exit_time, exit_projection, steps }
}

/// Plain Monte Carlo of the walk until it leaves `U`.
pub struct Sampled {
    pub exit_time: Vec<f64>,
    pub exit_projection: Vec<f64>,
    pub start_visits: Vec<f64>,
}

pub fn sample_exits<E: Quenched>(env: &E, u: &FiniteVolume, start: Site, ell: &Direction, n: usize, seed: u64) -> Sampled {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Sampled { exit_time: Vec::with_capacity(n), exit_projection: Vec::with_capacity(n), start_visits: Vec::with_capacity(n) };
    for _ in 0..n {
        let mut x = start;
        let mut t = 0usize;
        let mut at_start = 0usize;
        while u.contains(&x) {
            if x == start {
                at_start += 1;
            }
            let tv = env.transition(&x).unwrap();
            let mut r: f64 = rng.random();
            let mut step = *tv.offsets().last().unwrap();
            for (e, p) in tv.iter() {
                if r < p {
                    step = e;
                    break;
                }
                r -= p;
            }
            x = x + step;
            t += 1;
        }
        out.exit_time.push(t as f64);
        out.exit_projection.push(x.dot(ell));
        out.start_visits.push(at_start as f64);
    }
    out
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// `ln Z_k(w)` straight from the definition, for a path already recentred at 0.
pub fn brute_log_zk(points: &[Site], ell: &Direction, k: i64, kappa: f64, r: i64, g: f64, c_tilde: f64, l_dependent: Option<i64>) -> f64 {
    let level = |x: &Site| x.dot(ell);
    let cut = match l_dependent {
        Some(gap) => k - gap,
        None => k - r,
    };
    let card = points.iter().filter(|x| level(x) >= cut as f64).count() as f64;
    let mut s = -card * kappa.ln();
    if l_dependent.is_none() {
        // V_j = #{x : j − 1 ≤ x·ℓ < j}; sum over i ≥ r of V_{k−i} e^{−g i/2}
        let mut acc = 0.0;
        for x in points {
            let j = level(x).floor() as i64 + 1;
            let i = k - j;
            if i >= r {
                acc += (-0.5 * g * i as f64).exp();
            }
        }
        s += c_tilde * acc;
    }
    s
}
