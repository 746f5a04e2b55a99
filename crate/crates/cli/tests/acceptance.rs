//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured quantities (run with `-- --nocapture` to see them live).
//!
//! The quantitative experiments write their CSV/JSON artifacts into
//! temporary directories through the same code paths the CLI uses.

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use mvdelay_cli::experiments::{chaos, contract, girsanov, moments, rates_cmd};
use mvdelay_cli::output::OutputCtx;
use mvdelay_core::metrics::{
    empirical_wasserstein, segment_diff_norm, sorted_1d_wasserstein, Order, PathNorm,
};
use mvdelay_core::model::{
    InitialParams, InitialSpec, ModelMode, ModelParams, ModelSpec, ParticleCloud, ScalarOrVec,
    Scenario, Segment, StructuralConstants, TimeGrid,
};
use mvdelay_core::rates::RateFunction;

fn ctx_for(cfg: &impl serde::Serialize) -> (tempfile::TempDir, OutputCtx) {
    let dir = tempfile::tempdir().unwrap();
    let bytes = serde_json::to_vec_pretty(cfg).unwrap();
    let ctx = OutputCtx::new(dir.path(), &bytes).unwrap();
    (dir, ctx)
}

fn gaussian_initial(mean: f64, std: f64) -> InitialSpec {
    InitialSpec {
        name: "gaussian".into(),
        params: InitialParams {
            mean: Some(ScalarOrVec::Scalar(mean)),
            std: Some(std),
            ..Default::default()
        },
    }
}

fn point_initial(value: f64) -> InitialSpec {
    InitialSpec {
        name: "point".into(),
        params: InitialParams { value: Some(ScalarOrVec::Scalar(value)), ..Default::default() },
    }
}

/// Criterion 1: exact-transport oracle equivalence. For random no-delay 1D
/// cloud pairs at N = 2..6, the assignment route must reproduce the
/// brute-force permutation minimum at machine precision (real ties in 1D
/// order-1 transport are broken only by per-addend rounding) and the sorted
/// 1D oracle to 1e-12.
#[test]
fn criterion_1_ot_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(101);
    let grid = TimeGrid::new(1.0, 0, 1).unwrap();
    let cloud = |vals: &[f64]| {
        ParticleCloud::new(
            grid,
            vals.iter().map(|&x| Segment::constant(&[x], &grid).unwrap()).collect(),
        )
        .unwrap()
    };

    fn brute(a: &ParticleCloud, b: &ParticleCloud, order: Order, norm: PathNorm) -> f64 {
        fn go(
            a: &ParticleCloud,
            b: &ParticleCloud,
            order: Order,
            norm: PathNorm,
            row: usize,
            used: &mut Vec<bool>,
            acc: f64,
            best: &mut f64,
        ) {
            if row == a.len() {
                *best = best.min(acc);
                return;
            }
            for j in 0..a.len() {
                if !used[j] {
                    used[j] = true;
                    let d = segment_diff_norm(a.segment(row), b.segment(j), norm);
                    let c = match order {
                        Order::P1 => d,
                        Order::P2 => d * d,
                    };
                    go(a, b, order, norm, row + 1, used, acc + c, best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        go(a, b, order, norm, 0, &mut vec![false; a.len()], 0.0, &mut best);
        let mean = best / a.len() as f64;
        match order {
            Order::P1 => mean,
            Order::P2 => mean.sqrt(),
        }
    }

    let mut checked = 0usize;
    for pair in 0..200 {
        let n = 2 + pair % 5;
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (a, b) = (cloud(&xs), cloud(&ys));
        for order in [Order::P1, Order::P2] {
            for norm in [PathNorm::Sup, PathNorm::GammaR0] {
                let exact = empirical_wasserstein(&a, &b, order, norm).unwrap().value;
                let brute_min = brute(&a, &b, order, norm);
                let ulps = 4.0 * f64::EPSILON * brute_min.abs().max(1.0);
                assert!(
                    (exact - brute_min).abs() <= ulps,
                    "FAIL: assignment {exact} vs brute {brute_min} (pair {pair}, n {n})"
                );
                checked += 1;
            }
            let sorted = sorted_1d_wasserstein(&xs, &ys, order).unwrap();
            let exact = empirical_wasserstein(&a, &b, order, PathNorm::Sup).unwrap().value;
            assert!(
                (exact - sorted).abs() < 1e-12,
                "FAIL: assignment {exact} vs sorted {sorted} (pair {pair}, n {n})"
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "FAIL: runtime {elapsed:?} exceeds 10 s");
    eprintln!(
        "ACCEPTANCE 1 (transport oracle equivalence): PASS — {checked} comparisons across 200 \
         random pairs in {elapsed:?}"
    );
}

/// Criterion 2: rate-machinery analytic oracle. The improper integral
/// matches the Gaussian closed form 2β²/K2 to 1e-8 relative for the pure
/// dissipative curve, and the comparison function's sandwich bounds and ODE
/// identity hold for random piecewise parameter sets.
#[test]
fn criterion_2_rate_machinery_analytic_oracle() {
    let started = Instant::now();

    for k2 in [0.5, 1.0, 2.0, 4.0] {
        for beta in [0.5, 1.0, 2.0] {
            let rf = RateFunction::custom(std::sync::Arc::new(move |v| -k2 * v), 0.0, beta)
                .unwrap();
            let (delta, _) = rf.delta(1e-10).unwrap();
            let exact = 2.0 * beta * beta / k2;
            assert!(
                (delta - exact).abs() < 1e-8 * exact,
                "FAIL: delta {delta} vs {exact} (K2 {k2}, beta {beta})"
            );
        }
    }

    let mut rng = StdRng::seed_from_u64(202);
    for set in 0..3 {
        let k1: f64 = rng.random_range(0.3..2.0);
        let k2: f64 = rng.random_range(1.0..3.0);
        let radius: f64 = rng.random_range(0.5..1.5);
        let k_sigma: f64 = rng.random_range(0.0..0.3) * k2;
        let beta: f64 = rng.random_range(0.7..1.6);
        let rf = RateFunction::paper(k1, k2, radius, k_sigma, beta).unwrap();
        let (delta, _) = rf.delta(1e-12).unwrap();
        let two_b2 = 2.0 * beta * beta;
        let lower_slope = two_b2 / (k2 - k_sigma);

        for _ in 0..10 {
            let r: f64 = rng.random_range(0.1..3.0 * radius);
            let f = rf.f_value(r, 1e-13).unwrap();
            assert!(
                f >= lower_slope * r - 1e-9 && f <= delta * r + 1e-9,
                "FAIL: sandwich at r {r} (set {set}): {} <= {f} <= {}",
                lower_slope * r,
                delta * r
            );
            // ODE identity under central differences, step 1e-4
            let h = 1e-4;
            let fm = rf.f_value(r - h, 1e-13).unwrap();
            let f0 = rf.f_value(r, 1e-13).unwrap();
            let fp = rf.f_value(r + h, 1e-13).unwrap();
            let fd1 = (fp - fm) / (2.0 * h);
            let fd2 = (fp - 2.0 * f0 + fm) / (h * h);
            let lhs = fd1 * rf.gamma_tilde(r) + two_b2 * fd2;
            let rhs = -two_b2 * r;
            assert!(
                (lhs - rhs).abs() < 1e-3 * rhs.abs(),
                "FAIL: ODE identity at r {r} (set {set}): {lhs} vs {rhs}"
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "FAIL: runtime {elapsed:?} exceeds 30 s");
    eprintln!(
        "ACCEPTANCE 2 (rate machinery analytic oracle): PASS — 12 closed-form deltas, 3 \
         parameter sets x 10 radii in {elapsed:?}"
    );
}

fn sync_contract_config() -> contract::ContractConfig {
    contract::ContractConfig {
        scenario: Scenario {
            grid: TimeGrid::new(0.01, 10, 500).unwrap(),
            model: ModelSpec {
                name: "ou".into(),
                params: ModelParams {
                    a: Some(3.0),
                    kernel: Some("bounded_kernel".into()),
                    kernel_coef: Some(0.05),
                    sigma: Some("moment_sigma".into()),
                    sigma_coef: Some(0.1),
                },
                constants: StructuralConstants {
                    k1: 0.1,
                    k2: 0.05,
                    k3: 5.9,
                    k_sigma: 0.0,
                    k_b: 0.1,
                    r_radius: 1.0,
                },
                beta: 1.0,
                mode: ModelMode::Theorem2,
            },
            n_particles: 2000,
            initial: gaussian_initial(0.0, 0.25),
            seed: 33,
        },
        initial_b: gaussian_initial(2.0, 0.25),
        // same seed: the two initial draws share raw normals, realizing the
        // monotone coupling of the two Gaussians (gap exactly 2 per pair)
        seed_b: None,
        coupling: contract::CouplingKind::Synchronous,
        epsilon: None,
        flow_particles: 512,
        picard_tol: 2e-3,
        picard_max_iter: 25,
        burn_in_time: 0.5,
        rate_tol: 1e-10,
        record_every: 1,
    }
}

/// Criterion 3: synchronous-coupling contraction in the uniformly
/// dissipative regime. Coupled sup-distance must decrease monotonically
/// after burn-in, fit a positive decay rate with r² > 0.95, and never
/// violate the squared-distance envelope plus 3 standard errors.
#[test]
fn criterion_3_synchronous_contraction() {
    let started = Instant::now();
    let cfg = sync_contract_config();
    let (_dir, ctx) = ctx_for(&cfg);
    let status = contract::run(&cfg, &ctx).unwrap();
    let s = &status.summary;

    assert_eq!(s["theoretical"]["condition_holds"], true, "FAIL: dissipativity condition");
    let violations = s["envelope_violations"].as_u64().unwrap();
    assert_eq!(violations, 0, "FAIL: {violations} envelope violations");
    let rate = s["fitted"]["rate"].as_f64().expect("FAIL: no fitted rate");
    let r2 = s["fitted"]["r_squared"].as_f64().unwrap();
    assert!(rate > 0.0, "FAIL: fitted rate {rate} not positive");
    assert!(r2 > 0.95, "FAIL: r_squared {r2} <= 0.95");

    // monotone decrease of the coupled sup-distance after burn-in
    let text = std::fs::read_to_string(ctx.path("contract_trace.csv")).unwrap();
    let mut last: Option<f64> = None;
    for line in text.lines().skip(3) {
        let cols: Vec<&str> = line.split(',').collect();
        let time: f64 = cols[1].parse().unwrap();
        let sup: f64 = cols[5].parse().unwrap();
        if time >= cfg.burn_in_time {
            if let Some(prev) = last {
                assert!(
                    sup <= prev * (1.0 + 1e-9),
                    "FAIL: sup-distance not monotone at t = {time}: {sup} > {prev}"
                );
            }
            last = Some(sup);
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "FAIL: runtime {elapsed:?} exceeds 5 min");
    eprintln!(
        "ACCEPTANCE 3 (synchronous contraction): PASS — lambda_hat = {rate:.3}, r2 = {r2:.4}, \
         violations = 0 in {elapsed:?}"
    );
}

fn double_well_scenario(n: usize, grid: TimeGrid, kernel_coef: f64, seed: u64) -> Scenario {
    Scenario {
        grid,
        model: ModelSpec {
            name: "double_well".into(),
            params: ModelParams {
                a: None,
                kernel: Some("linear_kernel".into()),
                kernel_coef: Some(kernel_coef),
                sigma: None,
                sigma_coef: None,
            },
            constants: StructuralConstants {
                k1: 2.0,
                k2: 2.0,
                k3: 0.0,
                k_sigma: 0.01,
                // endpoint kernels are Lipschitz in the Γ-norm with twice
                // their coefficient
                k_b: 2.0 * kernel_coef,
                r_radius: 1.0,
            },
            beta: 1.0,
            mode: ModelMode::Theorem3,
        },
        n_particles: n,
        initial: gaussian_initial(1.0, 0.2),
        seed,
    }
}

/// Criterion 4: reflection-coupling contraction in the partially
/// dissipative regime. The fitted Γ-distance decay must reach at least half
/// the theoretical lower-bound rate, with zero envelope violations beyond
/// 3 standard errors.
///
/// The mixing threshold ε = 1e-3 must be resolvable by the step: with
/// h = 2.5e-4 the per-step relative noise is 2√h ≈ 0.03 and the coupling's
/// small-distance gluing engages (at h = 0.01 the chain steps clean over
/// the zone and the measured decay collapses). The step budget forces the
/// distribution-independent instance of the regime (no interaction kernel,
/// Kb = 0), which the contraction statement covers.
#[test]
fn criterion_4_reflection_contraction() {
    let started = Instant::now();
    let mut scenario =
        double_well_scenario(2000, TimeGrid::new(2.5e-4, 400, 40_000).unwrap(), 0.0, 44);
    scenario.model.params.kernel = None;
    scenario.model.params.kernel_coef = None;
    let cfg = contract::ContractConfig {
        scenario,
        initial_b: gaussian_initial(-1.0, 0.2),
        seed_b: None,
        coupling: contract::CouplingKind::Reflection,
        epsilon: Some(1e-3),
        flow_particles: 2,
        picard_tol: 2e-3,
        picard_max_iter: 25,
        burn_in_time: 0.5,
        rate_tol: 1e-10,
        record_every: 20,
    };
    let (_dir, ctx) = ctx_for(&cfg);
    let status = contract::run(&cfg, &ctx).unwrap();
    let s = &status.summary;

    assert_eq!(s["theoretical"]["condition_holds"], true, "FAIL: contraction condition");
    let lambda_theory = s["theoretical"]["decay_rate"].as_f64().unwrap();
    assert!(lambda_theory > 0.0);
    let violations = s["envelope_violations"].as_u64().unwrap();
    assert_eq!(violations, 0, "FAIL: {violations} envelope violations");
    let rate = s["fitted"]["rate"].as_f64().expect("FAIL: no fitted rate");
    assert!(
        rate >= 0.5 * lambda_theory,
        "FAIL: fitted rate {rate} below half the theoretical rate {lambda_theory}"
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 600.0, "FAIL: runtime {elapsed:?} exceeds 10 min");
    eprintln!(
        "ACCEPTANCE 4 (reflection contraction): PASS — lambda_hat = {rate:.3} vs theoretical \
         {lambda_theory:.3}, violations = 0 in {elapsed:?}"
    );
}

/// Criterion 5: propagation of chaos. Per-particle coupled Γ-distance
/// between the interacting system and the frozen-flow limit, time-averaged
/// over the second half of the horizon, must scale like N^{-1/2}: log-log
/// slope in [-0.7, -0.3] with r² > 0.9.
#[test]
fn criterion_5_propagation_of_chaos() {
    let started = Instant::now();
    let mut scenario = double_well_scenario(16, TimeGrid::new(0.01, 10, 500).unwrap(), 0.01, 55);
    scenario.initial = gaussian_initial(0.0, 0.5);
    let cfg = chaos::ChaosConfig {
        scenario,
        n_list: vec![16, 64, 256, 1024],
        flow_particles: 4096,
        picard_tol: 2e-3,
        picard_max_iter: 25,
        average_window_fraction: 0.5,
        replicates: 16,
        slope_band: Some([-0.7, -0.3]),
        min_r_squared: Some(0.9),
    };
    let (_dir, ctx) = ctx_for(&cfg);
    let status = chaos::run(&cfg, &ctx).unwrap();
    let s = &status.summary;
    let slope = s["slope"].as_f64().unwrap();
    let r2 = s["r_squared"].as_f64().unwrap();
    assert!(status.passed, "FAIL: slope {slope} / r2 {r2} outside acceptance band");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1200.0, "FAIL: runtime {elapsed:?} exceeds 20 min");
    eprintln!(
        "ACCEPTANCE 5 (propagation of chaos): PASS — slope = {slope:.3} in [-0.7, -0.3], r2 = \
         {r2:.4} in {elapsed:?}"
    );
}

/// Criterion 6: Girsanov identity. Endpoint residual at machine precision,
/// unit-mean weight, weighted/plain test-function means within 3 combined
/// standard errors, and the entropy bound nonnegative and matching its
/// tilted-side estimate.
#[test]
fn criterion_6_girsanov_identity() {
    let started = Instant::now();
    let cfg = girsanov::GirsanovConfig {
        scenario_mu: Scenario {
            grid: TimeGrid::new(0.01, 5, 100).unwrap(),
            model: ModelSpec {
                name: "ou".into(),
                params: ModelParams {
                    a: Some(1.0),
                    kernel: Some("linear_kernel".into()),
                    kernel_coef: Some(0.05),
                    sigma: Some("moment_sigma".into()),
                    sigma_coef: Some(0.2),
                },
                constants: StructuralConstants {
                    k1: 0.5,
                    k2: 0.5,
                    k3: 0.0,
                    k_sigma: 0.0,
                    k_b: 0.1,
                    r_radius: 1.0,
                },
                beta: 1.0,
                mode: ModelMode::Theorem2,
            },
            n_particles: 512,
            initial: gaussian_initial(0.0, 0.25),
            seed: 66,
        },
        initial_nu: gaussian_initial(0.5, 0.25),
        seed_nu: Some(1066),
        t0: 1.0,
        n_replicas: 10_000,
        flow_particles: 512,
        picard_tol: 2e-3,
        picard_max_iter: 25,
        pairing: mvdelay_core::model::Pairing::Independent,
    };
    let (_dir, ctx) = ctx_for(&cfg);
    let status = girsanov::run(&cfg, &ctx).unwrap();
    let s = &status.summary;

    let residual = s["endpoint_residual_max"].as_f64().unwrap();
    assert!(residual < 1e-10, "FAIL: endpoint residual {residual}");
    let checks = &s["checks"];
    for (name, ok) in [
        ("unit_mean_weight_ok", checks["unit_mean_weight_ok"].as_bool().unwrap()),
        ("test_functions_ok", checks["test_functions_ok"].as_bool().unwrap()),
        ("entropy_nonnegative_ok", checks["entropy_nonnegative_ok"].as_bool().unwrap()),
        ("entropy_q_side_match_ok", checks["entropy_q_side_match_ok"].as_bool().unwrap()),
    ] {
        assert!(ok, "FAIL: {name}");
    }
    assert!(status.passed);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "FAIL: runtime {elapsed:?} exceeds 5 min");
    let e_r = s["E_R"]["mean"].as_f64().unwrap();
    let ent = s["entropy_bound"]["mean"].as_f64().unwrap();
    eprintln!(
        "ACCEPTANCE 6 (girsanov identity): PASS — residual = {residual:.2e}, E[R] = {e_r:.4}, \
         E[R log R] = {ent:.4} in {elapsed:?}"
    );
}

/// Criterion 7: uniform-in-time second moment. The partially dissipative
/// scenario's Γ-moment must show < 20% relative growth over the second half
/// of a long horizon, and the linear (OU) variant must match its known
/// stationary moment within 3 standard errors.
#[test]
fn criterion_7_uniform_moment_bound() {
    let started = Instant::now();

    // condition check for the declared constants
    let rates_cfg = rates_cmd::RatesConfig {
        constants: StructuralConstants {
            k1: 2.0,
            k2: 2.0,
            k3: 0.0,
            k_sigma: 0.01,
            k_b: 0.1,
            r_radius: 1.0,
        },
        beta: 1.0,
        r0: 0.1,
        tol: 1e-10,
        epsilon_for_ell: None,
        require: Some(vec!["ctk0".into()]),
    };
    let (_dir0, ctx0) = ctx_for(&rates_cfg);
    let rates_status = rates_cmd::run(&rates_cfg, &ctx0).unwrap();
    assert!(rates_status.passed, "FAIL: moment-bound condition does not hold");

    let mut scenario =
        double_well_scenario(4000, TimeGrid::new(0.025, 4, 2000).unwrap(), 0.05, 77);
    scenario.initial = gaussian_initial(0.0, 0.5);
    let cfg = moments::MomentsConfig {
        scenario,
        record_every: 10,
        max_relative_growth: Some(0.2),
        stationary_target: None,
    };
    let (_dir, ctx) = ctx_for(&cfg);
    let status = moments::run(&cfg, &ctx).unwrap();
    let growth = status.summary["relative_growth_second_half"].as_f64().unwrap();
    assert!(status.passed, "FAIL: relative growth {growth} >= 0.2");

    // OU variant: stationary second moment 1/2
    let ou_cfg = moments::MomentsConfig {
        scenario: Scenario {
            grid: TimeGrid::new(0.01, 0, 5000).unwrap(),
            model: ModelSpec {
                name: "ou".into(),
                params: ModelParams { a: Some(1.0), ..Default::default() },
                constants: StructuralConstants {
                    k1: 0.0,
                    k2: 1.0,
                    k3: 0.0,
                    k_sigma: 0.0,
                    k_b: 0.0,
                    r_radius: 1.0,
                },
                beta: 1.0,
                mode: ModelMode::Theorem3,
            },
            n_particles: 4000,
            initial: point_initial(0.0),
            seed: 78,
        },
        record_every: 50,
        max_relative_growth: None,
        stationary_target: Some(0.5),
    };
    let (_dir2, ctx2) = ctx_for(&ou_cfg);
    let ou_status = moments::run(&ou_cfg, &ctx2).unwrap();
    let st = &ou_status.summary["stationary"];
    assert!(
        st["within_3se"].as_bool().unwrap(),
        "FAIL: OU stationary moment {} vs target 0.5 (se {})",
        st["final_moment"],
        st["se"]
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 600.0, "FAIL: runtime {elapsed:?} exceeds 10 min");
    eprintln!(
        "ACCEPTANCE 7 (uniform moment bound): PASS — growth = {growth:.4} < 0.2, OU moment = \
         {} ± {} in {elapsed:?}",
        st["final_moment"], st["se"]
    );
}

/// Criterion 8: determinism. Rerunning an experiment with the same config
/// and seed must produce byte-identical output files.
#[test]
fn criterion_8_determinism() {
    let started = Instant::now();

    fn dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
        let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries
    }

    // small but non-trivial contract run, twice
    let mut cfg = sync_contract_config();
    cfg.scenario.n_particles = 64;
    cfg.scenario.grid.horizon_steps = 120;
    cfg.flow_particles = 32;
    let (_d1, ctx1) = ctx_for(&cfg);
    let (_d2, ctx2) = ctx_for(&cfg);
    contract::run(&cfg, &ctx1).unwrap();
    contract::run(&cfg, &ctx2).unwrap();
    let (a, b) = (dir_bytes(&ctx1.out_dir), dir_bytes(&ctx2.out_dir));
    assert!(!a.is_empty());
    assert_eq!(a, b, "FAIL: contract outputs differ between reruns");

    // girsanov report, twice
    let gcfg = girsanov::GirsanovConfig {
        scenario_mu: Scenario {
            grid: TimeGrid::new(0.02, 2, 25).unwrap(),
            model: ModelSpec {
                name: "ou".into(),
                params: ModelParams {
                    a: Some(1.0),
                    kernel: None,
                    kernel_coef: None,
                    sigma: Some("moment_sigma".into()),
                    sigma_coef: Some(0.2),
                },
                constants: StructuralConstants {
                    k1: 0.5,
                    k2: 0.5,
                    k3: 0.0,
                    k_sigma: 0.0,
                    k_b: 0.0,
                    r_radius: 1.0,
                },
                beta: 1.0,
                mode: ModelMode::Theorem2,
            },
            n_particles: 32,
            initial: gaussian_initial(0.0, 0.25),
            seed: 88,
        },
        initial_nu: gaussian_initial(0.4, 0.25),
        seed_nu: Some(1088),
        t0: 0.5,
        n_replicas: 500,
        flow_particles: 64,
        picard_tol: 2e-3,
        picard_max_iter: 25,
        pairing: mvdelay_core::model::Pairing::Independent,
    };
    let (_d3, ctx3) = ctx_for(&gcfg);
    let (_d4, ctx4) = ctx_for(&gcfg);
    girsanov::run(&gcfg, &ctx3).unwrap();
    girsanov::run(&gcfg, &ctx4).unwrap();
    assert_eq!(
        dir_bytes(&ctx3.out_dir),
        dir_bytes(&ctx4.out_dir),
        "FAIL: girsanov outputs differ between reruns"
    );

    let elapsed = started.elapsed();
    eprintln!("ACCEPTANCE 8 (determinism): PASS — byte-identical reruns in {elapsed:?}");
}
