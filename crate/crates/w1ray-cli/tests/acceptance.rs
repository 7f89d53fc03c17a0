//! Acceptance suite: one test per criterion, each printing a single
//! pass/fail line (run with `--nocapture` to see them). Tolerances are
//! pinned in the assertions.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use w1ray_cli::config::Task;
use w1ray_cli::harness::{gaussian_cloud, run_with};
use w1ray_core::exact_ot::{hungarian_oracle, solve_w1, validate_duals};
use w1ray_core::map_recovery::{recover_map, score_against_plan, verify_pushforward};
use w1ray_core::math;
use w1ray_core::measures::{
    make_empirical, psnr, synth_dataset, CorruptionKind, CorruptionSpec, EmpiricalMeasure,
    SynthSpec,
};
use w1ray_core::potential::{
    check_affine_on_ray, check_grad_lipschitz_aj, fd_gradient, grad_penalty,
    w1_population_estimate, DiscretePotential,
};
use w1ray_core::ttc::{
    advreg_equivalence_check, train, uniform_step_reduction_check, StepMode, TtcConfig,
};

fn random_measure<R: Rng>(rng: &mut R, n: usize, d: usize) -> EmpiricalMeasure {
    let pts = (0..n).map(|_| (0..d).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    make_empirical(pts, None).unwrap()
}

fn pass(criterion: &str, details: String) {
    println!("ACCEPT {criterion}: pass ({details})");
}

#[test]
fn criterion_01_noisy_baseline_psnr() {
    let t0 = Instant::now();
    let side = 64; // d = 4096
    let images = 200;
    let clean = synth_dataset(&SynthSpec::ToyImages { count: images, side }, 10).unwrap();
    let mut report = Vec::new();
    for (k, (sigma, expect)) in [(0.1, 20.0), (0.15, 16.5), (0.2, 14.0)].iter().enumerate() {
        let spec = CorruptionSpec {
            kind: CorruptionKind::GaussianNoise { sigma: *sigma },
            seed: 100 + k as u64,
        };
        let noisy = clean.corrupt(&spec).unwrap();
        let mean: f64 = clean
            .points()
            .iter()
            .zip(noisy.points())
            .map(|(c, n)| psnr(n, c).unwrap())
            .sum::<f64>()
            / images as f64;
        assert!(
            (mean - expect).abs() <= 0.1,
            "sigma {sigma}: mean PSNR {mean} dB, expected {expect} +- 0.1"
        );
        report.push(format!("sigma {sigma}: {mean:.3} dB"));
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 10.0, "runtime {dt:.1}s exceeds 10s");
    pass("01 noisy-baseline PSNR", format!("{}; {dt:.2}s", report.join(", ")));
}

#[test]
fn criterion_02_oracle_equivalence() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=8);
        let d = rng.gen_range(1..=3);
        let mu = random_measure(&mut rng, n, d);
        let nu = random_measure(&mut rng, n, d);
        let (_, duals) = solve_w1(&mu, &nu).unwrap();
        let oracle = hungarian_oracle(&mu, &nu).unwrap();
        worst = worst.max((duals.w1 - oracle).abs());
    }
    assert!(worst <= 1e-9, "max |solver - oracle| = {worst:e}");
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 30.0, "runtime {dt:.1}s exceeds 30s");
    pass("02 oracle equivalence", format!("max dev {worst:.2e} over 100 instances; {dt:.2}s"));
}

#[test]
fn criterion_03_duality_certificates() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut worst_gap = 0.0f64;
    let mut worst_slack = 0.0f64;
    let mut solved = 0;
    for trial in 0..120 {
        let m = rng.gen_range(2..=60);
        let n = rng.gen_range(2..=12);
        let d = rng.gen_range(1..=3);
        let mut mu = random_measure(&mut rng, m, d);
        let nu = random_measure(&mut rng, n, d);
        match trial % 4 {
            1 => {
                let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..4.0)).collect();
                mu = make_empirical(mu.points().to_vec(), Some(w)).unwrap();
            }
            2 => {
                // include a zero-weight atom
                let mut w = vec![1.0; m];
                w[0] = 0.0;
                if m > 1 {
                    mu = make_empirical(mu.points().to_vec(), Some(w)).unwrap();
                }
            }
            _ => {}
        }
        let (plan, duals) = solve_w1(&mu, &nu).unwrap();
        let rep = validate_duals(&plan, &duals, &mu, &nu);
        assert!(
            rep.max_feasibility_violation <= 1e-9
                && rep.duality_gap <= 1e-9
                && rep.max_slackness_violation <= 1e-8
                && rep.max_row_sum_error <= 1e-9
                && rep.max_col_sum_error <= 1e-9,
            "trial {trial}: {rep:?}"
        );
        worst_gap = worst_gap.max(rep.duality_gap);
        worst_slack = worst_slack.max(rep.max_slackness_violation);
        solved += 1;
    }
    pass(
        "03 strong duality + slackness",
        format!("{solved} instances, worst gap {worst_gap:.2e}, worst slack {worst_slack:.2e}"),
    );
}

#[test]
fn criterion_04_map_recovery() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let mut worst_mismatch = 0.0f64;
    let mut worst_cost_rel = 0.0f64;
    for trial in 0..50 {
        let d = rng.gen_range(2..=3);
        let atoms = rng.gen_range(3..=20usize);
        // 200..2000 sources, kept a multiple of the atom count: with uniform
        // weights that is the discrete analogue of an absolutely continuous
        // source, so an unsplit optimal plan exists.
        let k_lo = 200usize.div_ceil(atoms);
        let k_hi = 2000 / atoms;
        let m = atoms * rng.gen_range(k_lo..=k_hi);
        let mu = random_measure(&mut rng, m, d);
        let nu = random_measure(&mut rng, atoms, d);
        let (plan, duals) = solve_w1(&mu, &nu).unwrap();
        let p = DiscretePotential::from_duals(&duals, &mu, &nu).unwrap();
        let mut rm = recover_map(&p, &mu).unwrap();
        assert_eq!(rm.unsnapped_mass, 0.0, "trial {trial}: unsnapped rays");
        let agreement = score_against_plan(&mut rm, &plan, &mu);
        assert!(
            agreement.mismatch_mass <= 0.001,
            "trial {trial} ({m} sources, {atoms} atoms): mismatch {}",
            agreement.mismatch_mass
        );
        let push = verify_pushforward(&rm, &mu, &nu);
        let rel = (push.transport_cost - duals.w1).abs() / duals.w1.max(1e-12);
        assert!(rel <= 1e-6, "trial {trial}: cost rel gap {rel:e}");
        worst_mismatch = worst_mismatch.max(agreement.mismatch_mass);
        worst_cost_rel = worst_cost_rel.max(rel);
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 120.0, "runtime {dt:.1}s exceeds 2min");
    pass(
        "04 map recovery",
        format!(
            "50 instances, worst mismatch {worst_mismatch:.2e}, worst cost rel {worst_cost_rel:.2e}; {dt:.1}s"
        ),
    );
}

#[test]
fn criterion_05_ray_geometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut worst_affine = 0.0f64;
    let mut worst_grad = 0.0f64;
    let mut worst_lip = f64::NEG_INFINITY;
    for _ in 0..3 {
        let d = rng.gen_range(2..=3);
        let atoms = rng.gen_range(4..=8usize);
        let m = atoms * 25;
        let mu = random_measure(&mut rng, m, d);
        let nu = random_measure(&mut rng, atoms, d);
        let (_, duals) = solve_w1(&mu, &nu).unwrap();
        let p = DiscretePotential::from_duals(&duals, &mu, &nu).unwrap();
        for x in mu.points() {
            if let Ok(dev) = check_affine_on_ray(&p, x, 48) {
                worst_affine = worst_affine.max(dev);
            }
            if let Ok(g) = p.gradient(x) {
                if !g.tie && g.gap > 1e-3 {
                    let fd = fd_gradient(&p, x, 1e-6).unwrap();
                    worst_grad = worst_grad.max(math::dist(&g.direction, &fd));
                }
            }
        }
        let domain = p.domain().clone();
        for _ in 0..10_000 {
            let a = domain.sample(&mut rng);
            let b = domain.sample(&mut rng);
            let excess = p.evaluate(&a).unwrap() - p.evaluate(&b).unwrap() - math::dist(&a, &b);
            worst_lip = worst_lip.max(excess);
        }
    }
    assert!(worst_affine <= 1e-9, "affine deviation {worst_affine:e}");
    assert!(worst_grad <= 1e-5, "gradient vs finite differences {worst_grad:e}");
    assert!(worst_lip <= 1e-12, "1-Lipschitz excess {worst_lip:e}");
    pass(
        "05 ray geometry",
        format!(
            "affine {worst_affine:.2e}, grad-fd {worst_grad:.2e}, lip excess {worst_lip:.2e}"
        ),
    );
}

#[test]
fn criterion_06_grad_lipschitz_aj() {
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let mut report = Vec::new();
    let mut nonvacuous_j1 = 0;
    for instance in 0..3 {
        let d = 2;
        let atoms = rng.gen_range(3..=6usize);
        let m = atoms * 30;
        // 4x4 box: large enough that A_1 (points > 1 from both ray ends)
        // is nonempty, so the j = 1 bound is exercised, not vacuous.
        let scale = |m: EmpiricalMeasure| {
            let pts = m.points().iter().map(|p| p.iter().map(|&v| 4.0 * v).collect()).collect();
            make_empirical(pts, Some(m.weights().to_vec())).unwrap()
        };
        let mu = scale(random_measure(&mut rng, m, d));
        let nu = scale(random_measure(&mut rng, atoms, d));
        let (_, duals) = solve_w1(&mu, &nu).unwrap();
        let p = DiscretePotential::from_duals(&duals, &mu, &nu).unwrap();
        for j in [1usize, 2, 4] {
            let rep = check_grad_lipschitz_aj(&p, j, 80, 600 + instance * 10 + j as u64).unwrap();
            assert!(rep.pass, "instance {instance}, j={j}: {rep:?}");
            if j == 1 && !rep.vacuous {
                nonvacuous_j1 += 1;
            }
            if let Some(ratio) = rep.observed_ratio {
                report.push(format!("i{instance} j{j}: {ratio:.2} <= {}", 4 * j));
            }
        }
    }
    assert!(nonvacuous_j1 > 0, "A_1 must be exercised non-vacuously");
    pass("06 gradient Lipschitz on A_j", report.join("; "));
}

#[test]
fn criterion_07_reduction_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let mut done = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    while done < 100 {
        let atoms = rng.gen_range(3..=8usize);
        let m = atoms * rng.gen_range(8..=25);
        let d = rng.gen_range(2..=3);
        let mu = random_measure(&mut rng, m, d);
        let nu = random_measure(&mut rng, atoms, d);
        let (_, duals) = solve_w1(&mu, &nu).unwrap();
        let p = DiscretePotential::from_duals(&duals, &mu, &nu).unwrap();
        let rm = recover_map(&p, &mu).unwrap();
        let mut dists: Vec<f64> = rm.assignments.iter().map(|a| a.alpha).collect();
        dists.sort_by(f64::total_cmp);
        let eta = 0.9 * dists[dists.len() / 2];
        if !(eta > 1e-9) {
            continue;
        }
        let rep = uniform_step_reduction_check(&mu, &nu, eta).unwrap();
        assert!(rep.holds, "trial {done}: {rep:?}");
        if rep.strict_applicable {
            assert!(rep.strict_ok, "trial {done}: strict decrease missed: {rep:?}");
        }
        worst_excess = worst_excess.max(rep.w1_after - rep.bound);
        done += 1;
    }
    pass(
        "07 uniform-step reduction estimate",
        format!("100/100 trials, worst slack usage {worst_excess:.2e} (tol 1e-8)"),
    );
}

#[test]
fn criterion_08_proximal_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let mut done = 0;
    let mut worst = 0.0f64;
    while done < 50 {
        let atoms = rng.gen_range(3..=7usize);
        let m = atoms * 15;
        let d = 2;
        let mu = random_measure(&mut rng, m, d);
        let nu = random_measure(&mut rng, atoms, d);
        let (_, duals) = solve_w1(&mu, &nu).unwrap();
        let p = DiscretePotential::from_duals(&duals, &mu, &nu).unwrap();
        for x in mu.points() {
            if done >= 50 {
                break;
            }
            let Ok(info) = p.ray_info(x) else { continue };
            if info.alpha < 1e-2 {
                continue;
            }
            let eta = rng.gen_range(0.2..0.89) * info.alpha;
            let rep = advreg_equivalence_check(&p, x, eta).unwrap();
            assert!(rep.pass, "trial {done}: discrepancy {:e}", rep.discrepancy);
            worst = worst.max(rep.discrepancy);
            done += 1;
        }
    }
    pass("08 proximal equivalence", format!("50/50 trials, worst discrepancy {worst:.2e}"));
}

#[test]
fn criterion_09_ttc_convergence() {
    let t0 = Instant::now();
    // 512 Gaussian particles onto 8 ring atoms, fitting every stage.
    let mu = gaussian_cloud(512, 2, 0.7, 90);
    let nu = synth_dataset(&SynthSpec::Ring { n: 8, radius: 1.0 }, 0).unwrap();
    let fit: Vec<usize> = (0..20).collect();
    let run = train(&mu, &nu, 20, &fit, &TtcConfig::default()).unwrap();
    let w1_initial = run.metrics.stages[0].w1_before;
    let w1_final = run.metrics.stages.last().unwrap().w1_after;
    assert!(
        w1_final < 0.10 * w1_initial,
        "uniform steps: {w1_initial} -> {w1_final} (need < 10%)"
    );

    // Per-point alpha diagnostic: one stage is a full transport.
    let config = TtcConfig { step_mode: StepMode::PerPointAlpha, ..TtcConfig::default() };
    let alpha_run = train(&mu, &nu, 1, &[0], &config).unwrap();
    let residual = alpha_run.metrics.stages[0].w1_after;
    assert!(residual <= 1e-6, "alpha-mode residual {residual:e}");
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 120.0, "runtime {dt:.1}s exceeds 2min");
    pass(
        "09 ttc convergence",
        format!(
            "uniform {w1_initial:.4} -> {w1_final:.4} ({:.1}%), alpha residual {residual:.1e}; {dt:.1}s",
            100.0 * w1_final / w1_initial
        ),
    );
}

#[test]
fn criterion_10_w1_estimator() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mu = random_measure(&mut rng, 120, 2);
    let nu = random_measure(&mut rng, 8, 2);
    let (_, duals) = solve_w1(&mu, &nu).unwrap();
    let exact = DiscretePotential::from_duals(&duals, &mu, &nu).unwrap();

    let e10 = w1_population_estimate(&exact, &mu, &nu, 10.0).unwrap();
    let e1000 = w1_population_estimate(&exact, &mu, &nu, 1000.0).unwrap();
    assert!((e10 - duals.w1).abs() <= 1e-9, "estimate {} vs w1 {}", e10, duals.w1);
    assert!((e10 - e1000).abs() <= 1e-12, "lambda must not matter: {e10} vs {e1000}");

    // Perturbed duals stay 1-Lipschitz: penalty identically zero and the
    // estimate cannot exceed W1 (plus the perturbation as printed slack).
    let sigma = 0.01 * duals.w1;
    let noisy: Vec<f64> = duals
        .target_values
        .iter()
        .map(|&v| v + sigma * math::standard_normal(&mut rng))
        .collect();
    let perturbed = DiscretePotential::with_domain(
        nu.points().to_vec(),
        noisy,
        exact.domain().clone(),
    )
    .unwrap();
    let mut worst_penalty = 0.0f64;
    for (x, y) in mu.points().iter().zip(nu.points().iter().cycle()) {
        let mid: Vec<f64> = x.iter().zip(y).map(|(&a, &b)| 0.5 * (a + b)).collect();
        worst_penalty = worst_penalty.max(grad_penalty(&perturbed, &mid).unwrap());
    }
    assert!(worst_penalty <= 1e-12, "penalty must vanish, got {worst_penalty:e}");
    let est = w1_population_estimate(&perturbed, &mu, &nu, 1000.0).unwrap();
    assert!(est <= duals.w1 + sigma.abs(), "estimate {est} vs w1 {} + {sigma}", duals.w1);
    pass(
        "10 w1 estimator",
        format!(
            "exact match {:.1e}, lambda invariant, perturbed est {est:.5} <= w1 {:.5}",
            (e10 - duals.w1).abs(),
            duals.w1
        ),
    );
}

#[test]
fn criterion_11_restoration_improves_psnr() {
    let mut lines = Vec::new();
    for seed in [1u64, 2, 3] {
        for sigma in ["0.1", "0.15", "0.2"] {
            let dir = tempfile::tempdir().unwrap();
            let out = run_with(
                Task::Denoise,
                dir.path(),
                &[
                    ("seed", &seed.to_string()),
                    ("sigma", sigma),
                    ("n_source", "32"),
                    ("steps", "6"),
                ],
            )
            .unwrap();
            let base = out.summary.psnr_baseline.unwrap();
            let fin = out.summary.psnr_final.unwrap();
            assert!(
                fin > base,
                "denoise seed {seed} sigma {sigma}: PSNR {base:.2} -> {fin:.2}"
            );
        }
        for blur_sigma in ["1", "2"] {
            let dir = tempfile::tempdir().unwrap();
            let out = run_with(
                Task::Deblur,
                dir.path(),
                &[
                    ("seed", &seed.to_string()),
                    ("blur_sigma", blur_sigma),
                    ("n_source", "8"),
                    ("steps", "6"),
                ],
            )
            .unwrap();
            let base = out.summary.psnr_baseline.unwrap();
            let fin = out.summary.psnr_final.unwrap();
            assert!(
                fin > base,
                "deblur seed {seed} blur sigma {blur_sigma}: PSNR {base:.2} -> {fin:.2}"
            );
        }
        lines.push(format!("seed {seed} ok"));
    }
    pass(
        "11 restoration beats corrupted baseline",
        format!("3 sigmas + 2 blurs x {}", lines.join(", ")),
    );
}
