//! The ten acceptance criteria. Each test prints one `criterion N: PASS|FAIL`
//! line; tests run one at a time so the runtime limits are meaningful.

mod common;

use std::sync::Mutex;
use std::time::{Duration, Instant};

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rwre::experiment::{reproduce, run_experiment, Experiment, ExperimentConfig, VolumeFamily};
use rwre::gibbs::{
    conditional_ratio_check, density_deviation_check, ds_mixing_family, fit_certificate, single_site_density_ratios,
    GibbsSpec,
};
use rwre::kalikow::{drift_moments, nested_boxes};
use rwre::pov::{
    invariant_density_1d, lln_velocity_from_density, singular_restriction_check, zk_admissibility_run,
    AdmissibilityParams, DensityParams, LocalFunction,
};
use rwre::walk::StopRule;
use rwre::{
    ballisticity_check, check_ellipticity, effective_condition, kalikow_epsilon, occupancy, run_annealed,
    slab_occupancy_check, velocity_estimate, Direction, EffectiveConditionParams, EnsembleSpec, EnvironmentModel,
    FiniteVolume, LatticeBox, Law, MeanEstimate, MixingConstants, Occupancy, Site, TransitionVector,
};

static SERIAL: Mutex<()> = Mutex::new(());

fn report(n: u32, pass: bool, started: Instant, limit: Duration, detail: String) {
    let elapsed = started.elapsed();
    let ok = pass && elapsed <= limit;
    println!(
        "criterion {n}: {} ({detail}; {:.1}s of {}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(pass, "criterion {n}: {detail}");
    assert!(elapsed <= limit, "criterion {n}: runtime {elapsed:?} exceeds {limit:?}");
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Non-nestling Gibbs chain: every letter drifts right.
fn gibbs_model(seed: u64) -> (EnvironmentModel, GibbsSpec) {
    let alphabet = vec![TransitionVector::nearest_1d(0.8).unwrap(), TransitionVector::nearest_1d(0.6).unwrap()];
    let spec =
        GibbsSpec::nearest_neighbour(1, alphabet, vec![0.0, 0.0], vec![vec![-1.0, 1.0], vec![1.0, -1.0]], 0.02).unwrap();
    let law = Law::GibbsWindow {
        spec: spec.clone(),
        window: LatticeBox::new(Site::d1(-40), Site::d1(40)).unwrap(),
        burn_in_sweeps: 200,
        boundary_letter: 0,
    };
    (EnvironmentModel::new(1, 1, seed, law).unwrap(), spec)
}

#[test]
fn criterion_01_north_east_velocity() {
    let _g = lock();
    let t = Instant::now();
    let model = EnvironmentModel::deterministic_ne(1);
    let spec = EnsembleSpec {
        n_paths: 1000,
        horizon: 100_000,
        stop: StopRule::FixedLength,
        start: Site::d2(0, 0),
        ell: Direction::axis(2),
        tau_levels: vec![],
    };
    let e = run_annealed(&model, &spec, 2024).unwrap();
    let v = velocity_estimate(&e.records, Site::d2(0, 0)).unwrap();
    let dev = v.mean.iter().map(|c| (c - 0.5).abs()).fold(0.0, f64::max);
    report(1, dev <= 0.01, t, Duration::from_secs(30), format!("v = ({:.5}, {:.5})", v.mean[0], v.mean[1]));
}

#[test]
fn criterion_02_green_solver_oracles() {
    let _g = lock();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for case in 0..24u64 {
        let (model, dim, range) = if case % 2 == 0 { (dirichlet_2d(case), 2, 1) } else { (range_two_1d(case), 1, 2) };
        let env = model.realize(case).unwrap();
        let u = random_volume(&mut rng, dim, 1 + case as usize % 6, range);
        let start = u.sites()[(case as usize * 7) % u.len()];
        let ell = Direction::axis(dim);
        let tab: Occupancy = occupancy(&env, &u, start, &ell).unwrap();
        let o = enumerate_paths(&env, &u, start, &ell, 1e-10);
        for (x, v) in u.sites().iter().zip(&tab.visits) {
            worst = worst.max((v - o.visits.get(x).copied().unwrap_or(0.0)).abs());
        }
        worst = worst.max((tab.expected_exit_time - o.exit_time).abs());
        cases += 1;
    }
    let mut mc_ok = true;
    let mut mc_detail = Vec::new();
    for (case, size) in [(0u64, 12usize), (1, 30), (2, 50)] {
        let model = dirichlet_2d(50 + case);
        let env = model.realize(case).unwrap();
        let u = random_volume(&mut rng, 2, size, 1);
        let ell = Direction::axis(2);
        let tab: Occupancy = occupancy(&env, &u, Site::d2(0, 0), &ell).unwrap();
        let s = sample_exits(&env, &u, Site::d2(0, 0), &ell, 100_000, 77 + case);
        for (est, want) in [
            (mean_se(&s.exit_time), tab.expected_exit_time),
            (mean_se(&s.exit_projection), tab.expected_exit_projection),
            (mean_se(&s.start_visits), tab.visits_at(&Site::d2(0, 0))),
        ] {
            let z = (est.0 - want).abs() / est.1;
            mc_detail.push(z);
            mc_ok &= z <= 4.0;
        }
    }
    let zmax = mc_detail.iter().cloned().fold(0.0, f64::max);
    report(
        2,
        worst <= 1e-8 && mc_ok && cases >= 20,
        t,
        Duration::from_secs(120),
        format!("{cases} enumeration cases, max |Δ| = {worst:.2e}; Monte Carlo max z = {zmax:.2}"),
    );
}

#[test]
fn criterion_03_invariant_density_pipeline() {
    let _g = lock();
    let t = Instant::now();
    let model = alphabet_07_09(3);
    let params = DensityParams {
        j_lo: -3,
        j_hi: 3,
        i_schedule: vec![-25, -50, -100, -200],
        n_env: 2000,
        tol: 1e-6,
        initial_margin: 16,
        keep_green: false,
    };
    let table = invariant_density_1d(&model, &params, 33).unwrap();
    let residual = table.max_harmonicity_residual.unwrap();
    let mu0 = table.mean_mu_at(0).unwrap();
    let v = lln_velocity_from_density(&table).unwrap();
    let spec = EnsembleSpec {
        n_paths: 2000,
        horizon: 20_000,
        stop: StopRule::FixedLength,
        start: Site::d1(0),
        ell: Direction::axis(1),
        tau_levels: vec![],
    };
    let sim = velocity_estimate(&run_annealed(&model, &spec, 34).unwrap().records, Site::d1(0)).unwrap();
    let solomon = {
        let rho = 17.0 / 63.0;
        (1.0 - rho) / (1.0 + rho)
    };
    let joint = 3.0 * (v.std_err.powi(2) + sim.std_err[0].powi(2)).sqrt();
    let a = residual <= 1e-4;
    let b = mu0.upper(3.0) >= 1.0;
    let c = (v.ratio - solomon).abs() <= 3.0 * v.std_err && (v.ratio - sim.mean[0]).abs() <= joint;
    report(
        3,
        a && b && c,
        t,
        Duration::from_secs(300),
        format!(
            "residual {residual:.2e}, E mu0 = {:.4} ± {:.4}, v_density = {:.4} ± {:.4}, v_sim = {:.4} ± {:.4}, Solomon {solomon:.4}",
            mu0.mean, mu0.std_err, v.ratio, v.std_err, sim.mean[0], sim.std_err[0]
        ),
    );
}

#[test]
fn criterion_04_ballisticity_lemma() {
    let _g = lock();
    let t = Instant::now();
    let mut all_ok = true;
    let mut worst = f64::INFINITY;
    let mut pairs = 0;
    let cases: Vec<(EnvironmentModel, Vec<FiniteVolume>)> = vec![
        (
            alphabet_07_09(4),
            vec![
                FiniteVolume::interval(-2, 2, 1).unwrap(),
                FiniteVolume::interval(-6, 3, 1).unwrap(),
                FiniteVolume::interval(-1, 12, 1).unwrap(),
            ],
        ),
        (range_two_1d(5), vec![FiniteVolume::interval(-3, 3, 2).unwrap(), FiniteVolume::interval(-8, 4, 2).unwrap()]),
        (dirichlet_2d(6), nested_boxes(2, 3, 1).unwrap()),
        (gibbs_model(7).0, vec![FiniteVolume::interval(-3, 3, 1).unwrap(), FiniteVolume::interval(-5, 8, 1).unwrap()]),
    ];
    for (mi, (model, family)) in cases.iter().enumerate() {
        let ell = Direction::axis(model.dim);
        let k = kalikow_epsilon(model, family, &ell, 400, 100 + mi as u64, 3.0).unwrap();
        let eps = MeanEstimate { mean: k.epsilon_hat.ratio, std_err: k.epsilon_hat.std_err, n: k.n_env };
        for (ui, u) in family.iter().enumerate() {
            let r = ballisticity_check(model, u, &ell, eps, 400, 200 + (mi * 10 + ui) as u64, 3.0).unwrap();
            worst = worst.min(r.slack.mean / r.slack.std_err.max(f64::MIN_POSITIVE));
            all_ok &= r.ok;
            pairs += 1;
        }
    }
    report(4, all_ok, t, Duration::from_secs(120), format!("{pairs} model/volume pairs, min slack/se = {worst:.2}"));
}

#[test]
fn criterion_05_slab_bound() {
    let _g = lock();
    let t = Instant::now();
    let model = alphabet_07_09(8);
    let ell = Direction::axis(1);
    let k = kalikow_epsilon(&model, &nested_boxes(1, 6, 1).unwrap(), &ell, 1000, 81, 3.0).unwrap();
    let eps = k.epsilon_hat.ratio;
    let mut ok = true;
    let mut detail = Vec::new();
    for w in [2i64, 5, 10] {
        let (i, j) = (3 - w, 3);
        let r = slab_occupancy_check(&model, &ell, i, j, eps, 4000, 1_000_000, 90 + w as u64, 3.0).unwrap();
        ok &= r.ok && r.telescoping_ok && r.censored == 0;
        detail.push(format!("w={w}: {:.3} ≤ {:.3}", r.vhat.mean, r.bound));
    }
    report(5, ok, t, Duration::from_secs(120), format!("eps = {eps:.4}; {}", detail.join(", ")));
}

#[test]
fn criterion_06_zk_admissibility() {
    let _g = lock();
    let t = Instant::now();
    let model = alphabet_07_09(9);
    let ell = Direction::axis(1);
    let kappa = check_ellipticity(&model, &ell).kappa_hat.unwrap();
    let eps = kalikow_epsilon(&model, &nested_boxes(1, 6, 1).unwrap(), &ell, 1000, 91, 3.0).unwrap().epsilon_hat.ratio;
    let constants = MixingConstants::l_dependent(kappa, 1).unwrap();
    let k_list: Vec<i64> = (0..=5).map(|k| -k).collect();
    let params = AdmissibilityParams {
        k_list: k_list.clone(),
        log_a_grid: (0..=60).map(|i| i as f64 * 0.5 * std::f64::consts::LN_10).collect(),
        n_list: vec![250, 500, 1000],
        n_replicates: 200,
    };
    let z = zk_admissibility_run(&model, &ell, &constants, &params, eps, 92).unwrap();
    let worst = k_list.iter().map(|k| z.sup_over_a(*k, 1000).unwrap()).fold(f64::INFINITY, f64::min);
    report(
        6,
        worst >= 0.2 * eps && z.is_monotone_in_a(),
        t,
        Duration::from_secs(300),
        format!("min_k sup_a Q = {worst:.4} vs 0.2 eps = {:.4}", 0.2 * eps),
    );
}

#[test]
fn criterion_07_gibbs_exact_bounds() {
    let _g = lock();
    let t = Instant::now();
    let tol = 1e-10;
    let alphabet = vec![TransitionVector::nearest_1d(0.7).unwrap(), TransitionVector::nearest_1d(0.4).unwrap()];
    let mut ok = true;
    let mut detail = Vec::new();
    for beta in [0.05, 0.1, 0.2] {
        let spec = GibbsSpec::nearest_neighbour(
            1,
            alphabet.clone(),
            vec![0.0, 0.2],
            vec![vec![-1.0, 1.0], vec![1.0, -1.0]],
            beta,
        )
        .unwrap();
        let base: Vec<Site> = (0..6).map(Site::d1).collect();
        let samples = ds_mixing_family(&spec, &base).unwrap();
        let mut cert = fit_certificate(&spec, &samples).unwrap();
        let a = cert.g > 0.0;
        let ratios = single_site_density_ratios(&spec, &base, tol).unwrap();
        let b = ratios.ok && ratios.max_ratio <= ratios.c1 + tol;
        let mut c = true;
        for (v, l) in [((0..6).collect::<Vec<i32>>(), vec![2, 3]), ((0..5).collect(), vec![2])] {
            let vs: Vec<Site> = v.into_iter().map(Site::d1).collect();
            let ls: Vec<Site> = l.into_iter().map(Site::d1).collect();
            let d = density_deviation_check(&spec, &vs, &ls, &cert, tol).unwrap();
            cert.record(d.max_violation);
            c &= d.max_violation <= 1.0 + tol;
        }
        for (lambda, h) in [(vec![0], 2), (vec![0, 1], 3), (vec![-1, 0], 2), (vec![0], 4)] {
            let ls: Vec<Site> = lambda.into_iter().map(Site::d1).collect();
            let r = conditional_ratio_check(&spec, &ls, h, &cert, tol).unwrap();
            c &= r.ok;
        }
        ok &= a && b && c;
        detail.push(format!("β={beta}: g={:.3}, ratio {:.4} ≤ C1 {:.4}", cert.g, ratios.max_ratio, ratios.c1));
    }
    report(7, ok, t, Duration::from_secs(120), detail.join("; "));
}

#[test]
fn criterion_08_restriction_identity() {
    let _g = lock();
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for n in 0..=6 {
        for k in 0..=n {
            worst = worst.max(singular_restriction_check(n, k).unwrap().tv);
        }
    }
    report(8, worst <= 1e-12, t, Duration::from_secs(60), format!("max TV = {worst:.1e}"));
}

#[test]
fn criterion_09_gibbs_kalikow_positive() {
    let _g = lock();
    let t = Instant::now();
    let (model, spec) = gibbs_model(10);
    let ell = Direction::axis(1);
    let kappa = check_ellipticity(&model, &ell).kappa_hat.unwrap();
    let (plus, minus) = drift_moments(&model, &ell, 4000, 11).unwrap();
    let c1 = spec.c1();
    let params = EffectiveConditionParams { kappa, a: c1.powi(-2), b: c1.powi(2), e_dplus: plus, e_dminus: minus };
    let verdict = effective_condition(&params, 3.0).unwrap();
    let fam: Vec<FiniteVolume> = [(-1, 1), (-3, 2), (-2, 5), (-6, 6)]
        .iter()
        .map(|(a, b)| FiniteVolume::interval(*a, *b, 1).unwrap())
        .collect();
    let k = kalikow_epsilon(&model, &fam, &ell, 300, 12, 3.0).unwrap();
    let ok = verdict.verdict && k.epsilon_hat.ratio > 0.0 && k.epsilon_hat.lower(3.0) > 0.0;
    report(
        9,
        ok,
        t,
        Duration::from_secs(300),
        format!(
            "effective margin {:.4}, eps_hat = {:.4} ± {:.4}",
            verdict.margin.mean, k.epsilon_hat.ratio, k.epsilon_hat.std_err
        ),
    );
}

fn reproducibility_configs(dir: &std::path::Path) -> Vec<ExperimentConfig> {
    let ne = EnvironmentModel::deterministic_ne(0);
    let alpha = alphabet_07_09(1);
    let (gm, spec) = gibbs_model(2);
    let _ = gm;
    let mut v = vec![
        ExperimentConfig::new(
            Some(ne.clone()),
            1,
            Experiment::Simulate {
                n_paths: 200,
                horizon: 5000,
                stop: StopRule::FixedLength,
                ell: None,
                tau_levels: vec![10, 100],
                expect_velocity: Some(vec![0.5, 0.5]),
            },
        ),
        ExperimentConfig::new(
            Some(alpha.clone()),
            2,
            Experiment::Kalikow { ell: Direction::axis(1), family: VolumeFamily::NestedBoxes { k: 4 }, n_env: 200 },
        ),
        ExperimentConfig::new(
            Some(alpha.clone()),
            3,
            Experiment::Density1d {
                params: DensityParams {
                    j_lo: -2,
                    j_hi: 2,
                    i_schedule: vec![-20, -40, -80],
                    n_env: 100,
                    tol: 1e-6,
                    initial_margin: 16,
                    keep_green: false,
                },
                oracle_velocity: None,
            },
        ),
        ExperimentConfig::new(
            Some(ne),
            4,
            Experiment::PovCesaro {
                function: LocalFunction::TransitionProb { at: None, offset: Site::d2(1, 0) },
                n0: 8,
                n_max: 256,
                n_paths: 200,
            },
        ),
        ExperimentConfig::new(
            Some(alpha),
            5,
            Experiment::Zk {
                ell: Direction::axis(1),
                constants: MixingConstants::l_dependent(0.1, 1).unwrap(),
                params: AdmissibilityParams {
                    k_list: vec![0, -2],
                    log_a_grid: (0..20).map(|i| i as f64).collect(),
                    n_list: vec![100, 200],
                    n_replicates: 50,
                },
                epsilon_ref: 0.4,
            },
        ),
        ExperimentConfig::new(
            None,
            6,
            Experiment::GibbsCheck {
                spec,
                base: (0..4).map(Site::d1).collect(),
                ratio_volume: None,
                deviation: vec![],
                conditional: vec![rwre::experiment::ConditionalCase { lambda: vec![Site::d1(0)], h: 2 }],
            },
        ),
        ExperimentConfig::new(None, 7, Experiment::SingularNe { n_max: 4 }),
    ];
    // a reproduce run of the first config
    v.push(ExperimentConfig::new(None, 8, Experiment::Reproduce { manifest: dir.join("kind0-w1/manifest.json") }));
    v
}

#[test]
fn criterion_10_reproducibility_across_workers() {
    let _g = lock();
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut failures = Vec::new();
    let configs = reproducibility_configs(dir.path());
    for (i, cfg) in configs.iter().enumerate() {
        let mut c = cfg.clone();
        c.workers = Some(1);
        let out = dir.path().join(format!("kind{i}-w1"));
        run_experiment(&c, Some(&out)).unwrap();
        for w in [4usize, 8] {
            let scratch = dir.path().join(format!("kind{i}-w{w}"));
            let rep = reproduce(&out.join("manifest.json"), &scratch, Some(w)).unwrap();
            if !rep.passed() {
                ok = false;
                failures.push(format!("{} with {w} workers: {:?}", c.experiment.label(), rep.files));
            }
        }
    }
    report(
        10,
        ok,
        t,
        Duration::from_secs(600),
        if ok { format!("{} kinds identical at 1, 4 and 8 workers", configs.len()) } else { failures.join("; ") },
    );
}
