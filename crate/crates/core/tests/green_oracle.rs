mod common;

use common::*;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rwre::{green_column_1d, hitting_probability, occupancy, Direction, ExactOccupancy, Occupancy, Site};

#[test]
fn small_volumes_match_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..24 {
        let (model, dim, range) = if case % 2 == 0 { (dirichlet_2d(case), 2, 1) } else { (range_two_1d(case), 1, 2) };
        let env = model.realize(case * 31 + 1).unwrap();
        let size = 1 + (case as usize % 6);
        let u = random_volume(&mut rng, dim, size, range);
        let start = u.sites()[case as usize % u.len()];
        let ell = Direction::axis(dim);
        let t: Occupancy = occupancy(&env, &u, start, &ell).unwrap();
        let o = enumerate_paths(&env, &u, start, &ell, 1e-13);
        for (x, v) in u.sites().iter().zip(&t.visits) {
            let want = o.visits.get(x).copied().unwrap_or(0.0);
            assert!((v - want).abs() < 1e-8, "case {case} site {x}: {v} vs {want}");
        }
        assert!((t.expected_exit_time - o.exit_time).abs() < 1e-8);
        assert!((t.expected_exit_projection - o.exit_projection).abs() < 1e-8);
        for (y, p) in &o.exit_law {
            assert!((t.exit_law.get(y).copied().unwrap_or(0.0) - p).abs() < 1e-8);
        }
    }
}

#[test]
fn visit_identity_holds() {
    // visits(x) = f(x) / Σ_y g(x,y) π(x, x+y)
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..6 {
        let model = dirichlet_2d(case);
        let env = model.realize(case).unwrap();
        let u = random_volume(&mut rng, 2, 8, 1);
        let t: Occupancy = occupancy(&env, &u, Site::d2(0, 0), &Direction::axis(2)).unwrap();
        let f = t.visit_prob.as_ref().unwrap();
        let esc = t.escape.as_ref().unwrap();
        for i in 0..u.len() {
            let denom: f64 = esc[i].iter().map(|e| e.g * e.prob).sum();
            assert!((t.visits[i] - f[i] / denom).abs() < 1e-10);
        }
    }
}

#[test]
fn exact_solver_agrees_with_enumeration_and_float() {
    let model = range_two_1d(5);
    let env = model.realize(2).unwrap();
    let u = rwre::FiniteVolume::interval(-3, 3, 2).unwrap();
    let ell = Direction::axis(1);
    let exact: ExactOccupancy = occupancy(&env, &u, Site::d1(0), &ell).unwrap();
    let float: Occupancy = occupancy(&env, &u, Site::d1(0), &ell).unwrap();
    assert_eq!(exact.exit_mass(), BigRational::from_integer(1.into()));
    for (a, b) in exact.visits.iter().zip(&float.visits) {
        assert!((a.to_f64().unwrap() - b).abs() < 1e-12);
    }
    let o = enumerate_paths(&env, &u, Site::d1(0), &ell, 1e-14);
    assert!((exact.expected_exit_time.to_f64().unwrap() - o.exit_time).abs() < 1e-9);
}

#[test]
fn larger_volumes_match_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (case, size) in [(0u64, 20usize), (1, 35), (2, 50)] {
        let model = dirichlet_2d(100 + case);
        let env = model.realize(case).unwrap();
        let u = random_volume(&mut rng, 2, size, 1);
        let ell = Direction::axis(2);
        let t: Occupancy = occupancy(&env, &u, Site::d2(0, 0), &ell).unwrap();
        let s = sample_exits(&env, &u, Site::d2(0, 0), &ell, 20_000, case);
        for (est, want) in [
            (mean_se(&s.exit_time), t.expected_exit_time),
            (mean_se(&s.exit_projection), t.expected_exit_projection),
            (mean_se(&s.start_visits), t.visits_at(&Site::d2(0, 0))),
        ] {
            assert!((est.0 - want).abs() <= 4.0 * est.1, "case {case}: {est:?} vs {want}");
        }
    }
}

#[test]
fn renewal_identity_on_line() {
    let model = alphabet_07_09(1);
    let env = model.realize(9).unwrap();
    let col = green_column_1d(&env, 2, -10, 2, 16, 1e-10, 1 << 14).unwrap();
    let gjj = col.at(2);
    for i in -10..=2 {
        let (h, _) = hitting_probability(&env, i, 2, 16).unwrap();
        assert!((col.at(i) - gjj * h).abs() < 1e-8);
    }
}
