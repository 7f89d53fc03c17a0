//! Iterative transport with spatially uniform adaptive step sizes.
//!
//! Each stage fits (or reuses) a potential for the current particle cloud
//! against the target, estimates the step size `eta_n` as the current W1
//! value, and pushes every particle by `x <- x - eta_n grad u_n(x)`. The
//! composed map over all stages transports fresh source samples the same
//! way ([`apply`]).
//!
//! The critic-fitting inner loop of the neural setting is replaced by a
//! pluggable backend: `Exact` uses the optimal duals of the transportation
//! LP; `Perturbed` adds Gaussian noise to the dual values before the
//! inf-convolution (which stays 1-Lipschitz, so the step-size estimator
//! remains penalty-free).
//!
//! Two verifiers accompany the procedure: [`uniform_step_reduction_check`]
//! for the guaranteed-reduction estimate
//! `W1(push(mu), nu) <= W1(mu, nu) - eta (2 p - 1)` where `p` is the mass
//! moving at least `eta`, and [`advreg_equivalence_check`] for the proximal
//! characterization `argmin 1/2 |x - x0|^2 + eta u0(x) = x0 - eta grad u0(x0)`
//! valid for `eta` below the local transport distance.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exact_ot::solve_w1;
use crate::map_recovery::recover_map;
use crate::math;
use crate::measures::EmpiricalMeasure;
use crate::potential::{w1_minibatch_estimate, w1_population_estimate, DiscretePotential};
use crate::{Error, Result};

/// Where stage potentials come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    /// Optimal duals of the exact LP solve.
    Exact,
    /// Optimal duals plus i.i.d. Gaussian noise of std `sigma_dual` on each
    /// value, re-fed through the inf-convolution.
    Perturbed { sigma_dual: f64, seed: u64 },
}

/// Particle update rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    /// `x <- x - eta grad u(x)`, the production rule.
    UniformEta,
    /// `x <- x - alpha(x) grad u(x)`, the map-recovery diagnostic; with an
    /// exact potential one stage is a full transport.
    PerPointAlpha,
}

/// Knobs for training. `lambda`, `minibatch` and `eta_batches` only matter
/// for the perturbed backend's step-size estimator; the exact backend reads
/// the dual objective directly.
#[derive(Debug, Clone)]
pub struct TtcConfig {
    pub backend: Backend,
    pub step_mode: StepMode,
    pub lambda: f64,
    pub minibatch: usize,
    pub eta_batches: usize,
    /// Keep a copy of the particle cloud after every stage.
    pub keep_snapshots: bool,
}

impl Default for TtcConfig {
    fn default() -> Self {
        TtcConfig {
            backend: Backend::Exact,
            step_mode: StepMode::UniformEta,
            lambda: 1000.0,
            minibatch: 64,
            eta_batches: 100,
            keep_snapshots: false,
        }
    }
}

/// One stage of the composed map: a potential and its step size.
#[derive(Debug, Clone)]
pub struct TtcStage {
    pub potential: DiscretePotential,
    pub eta: f64,
}

/// The trained pipeline. Applying the stages in order reproduces the
/// training pushforward on any point.
#[derive(Debug, Clone)]
pub struct TtcPipeline {
    pub stages: Vec<TtcStage>,
    /// Stage indices where a fresh potential was fitted.
    pub schedule: Vec<usize>,
    pub backend: Backend,
}

impl TtcPipeline {
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

/// Per-stage diagnostics. `w1_before`/`w1_after` are exact LP values
/// (computed for the metrics even at reuse stages); `fraction_long` is the
/// mu_n-mass whose transport distance is at least `eta`.
#[derive(Debug, Clone)]
pub struct StageMetrics {
    pub stage: usize,
    pub w1_before: f64,
    pub w1_after: f64,
    pub eta: f64,
    pub fraction_long: f64,
    pub fitted: bool,
    pub runtime_sec: f64,
}

/// Why training stopped before completing all requested stages.
#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    /// Step size was (numerically) zero: the clouds already coincide.
    AlreadyOptimal { stage: usize },
    /// Step size came out negative (possible only with a pathological
    /// perturbed backend); the stage was aborted.
    NonpositiveEta { stage: usize, eta: f64 },
}

#[derive(Debug, Clone, Default)]
pub struct TtcMetrics {
    pub stages: Vec<StageMetrics>,
    pub stop: Option<StopReason>,
}

/// Everything `train` produces.
#[derive(Debug, Clone)]
pub struct TtcRun {
    pub pipeline: TtcPipeline,
    pub metrics: TtcMetrics,
    /// The pushed-forward particle cloud after the last completed stage.
    pub final_measure: EmpiricalMeasure,
    /// Per-stage clouds when `keep_snapshots` is set (entry 0 is mu_1).
    pub snapshots: Vec<EmpiricalMeasure>,
}

/// Runs the iterative procedure for `n_stages` stages, fitting a fresh
/// potential at the indices in `fit_at` and reusing the previous stage's
/// potential elsewhere. `fit_at` must contain 0: with no warm-start state,
/// the first stage has nothing to reuse.
pub fn train(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    n_stages: usize,
    fit_at: &[usize],
    config: &TtcConfig,
) -> Result<TtcRun> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), got: nu.dim() });
    }
    if n_stages == 0 {
        return Err(Error::InvalidParameter("n_stages must be >= 1"));
    }
    if fit_at.is_empty() {
        return Err(Error::BadSchedule("fit schedule is empty"));
    }
    if !fit_at.contains(&0) {
        return Err(Error::BadSchedule("stage 0 must fit a potential"));
    }
    if fit_at.iter().any(|&n| n >= n_stages) {
        return Err(Error::BadSchedule("fit index beyond the last stage"));
    }
    if let Backend::Perturbed { sigma_dual, .. } = config.backend {
        if !(sigma_dual >= 0.0) {
            return Err(Error::InvalidParameter("sigma_dual must be >= 0"));
        }
    }

    let mut particles = mu.clone();
    let mut stages: Vec<TtcStage> = Vec::with_capacity(n_stages);
    let mut metrics = TtcMetrics::default();
    let mut snapshots = Vec::new();
    let mut last_w1 = f64::NAN;

    for stage in 0..n_stages {
        let timer = Timer::start();
        let (_, duals) = solve_w1(&particles, nu)?;
        let w1_before = duals.w1;
        last_w1 = w1_before;
        let exact_potential = DiscretePotential::from_duals(&duals, &particles, nu)?;

        let fitted = fit_at.contains(&stage);
        let potential = if fitted {
            match config.backend {
                Backend::Exact => exact_potential.clone(),
                Backend::Perturbed { sigma_dual, seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (stage as u64).wrapping_mul(0x9e37_79b9));
                    let noisy: Vec<f64> = exact_potential
                        .values()
                        .iter()
                        .map(|&v| v + sigma_dual * math::standard_normal(&mut rng))
                        .collect();
                    DiscretePotential::with_domain(
                        exact_potential.atoms().to_vec(),
                        noisy,
                        exact_potential.domain().clone(),
                    )?
                }
            }
        } else {
            stages.last().expect("stage 0 always fits").potential.clone()
        };

        let eta = match config.backend {
            Backend::Exact => w1_population_estimate(&potential, &particles, nu, config.lambda)?,
            Backend::Perturbed { seed, .. } => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5_0000 ^ (stage as u64) << 20);
                let mut acc = 0.0;
                for _ in 0..config.eta_batches.max(1) {
                    let xs = particles.sample(config.minibatch.max(1), rng.gen())?;
                    let ys = nu.sample(config.minibatch.max(1), rng.gen())?;
                    let ts: Vec<f64> =
                        (0..config.minibatch.max(1)).map(|_| rng.gen_range(0.0..1.0)).collect();
                    acc += w1_minibatch_estimate(&potential, &xs, &ys, &ts, config.lambda)?;
                }
                acc / config.eta_batches.max(1) as f64
            }
        };

        if eta <= 0.0 {
            metrics.stop = Some(if eta >= -1e-12 && w1_before <= 1e-12 {
                StopReason::AlreadyOptimal { stage }
            } else {
                StopReason::NonpositiveEta { stage, eta }
            });
            break;
        }

        // fraction_long comes from the *exact* potential of this stage: it
        // is a statement about true transport distances.
        let rm = recover_map(&exact_potential, &particles)?;
        let fraction_long: f64 = rm
            .assignments
            .iter()
            .zip(particles.weights())
            .filter(|(a, _)| a.alpha >= eta)
            .map(|(_, &w)| w)
            .sum();

        particles = match config.step_mode {
            StepMode::UniformEta => uniform_step(&potential, &particles, eta)?,
            StepMode::PerPointAlpha => alpha_step(&potential, &particles)?,
        };

        stages.push(TtcStage { potential, eta });
        metrics.stages.push(StageMetrics {
            stage,
            w1_before,
            w1_after: f64::NAN, // backfilled below
            eta,
            fraction_long,
            fitted,
            runtime_sec: timer.elapsed(),
        });
        if config.keep_snapshots {
            snapshots.push(particles.clone());
        }
    }

    // Backfill w1_after: each stage's exit value is the next stage's entry
    // value; the last one needs a final solve.
    let completed = metrics.stages.len();
    for i in 0..completed {
        metrics.stages[i].w1_after = if i + 1 < completed {
            metrics.stages[i + 1].w1_before
        } else {
            let (_, duals) = solve_w1(&particles, nu)?;
            duals.w1
        };
    }
    if completed == 0 {
        // Nothing ran; keep the entry value visible to callers via metrics.
        let _ = last_w1;
    }

    Ok(TtcRun {
        pipeline: TtcPipeline { stages, schedule: fit_at.to_vec(), backend: config.backend.clone() },
        metrics,
        final_measure: particles,
        snapshots,
    })
}

/// One uniform gradient-descent step on every particle. Tie particles move
/// along the deterministic tie-broken direction; particles sitting exactly
/// on an atom take the zero subgradient and stay (the only symmetric choice
/// in the subdifferential).
pub fn uniform_step(
    p: &DiscretePotential,
    mu: &EmpiricalMeasure,
    eta: f64,
) -> Result<EmpiricalMeasure> {
    let moved: Result<Vec<Vec<f64>>> =
        mu.points().iter().map(|x| step_point(p, x, eta)).collect();
    EmpiricalMeasure::new(moved?, Some(mu.weights().to_vec()))
}

/// Moves every particle all the way down its ray (`alpha` step); with an
/// exact potential this reproduces the recovered transport map in one shot.
pub fn alpha_step(p: &DiscretePotential, mu: &EmpiricalMeasure) -> Result<EmpiricalMeasure> {
    let rm = recover_map(p, mu)?;
    let pts = rm.assignments.into_iter().map(|a| a.point).collect();
    EmpiricalMeasure::new(pts, Some(mu.weights().to_vec()))
}

fn step_point(p: &DiscretePotential, x: &[f64], eta: f64) -> Result<Vec<f64>> {
    match p.gradient(x) {
        Ok(g) => Ok(math::axpy(x, -eta, &g.direction)),
        Err(Error::AtAtom { .. }) => Ok(x.to_vec()),
        Err(e) => Err(e),
    }
}

/// Applies the composed pipeline map to a single point.
pub fn apply(pipeline: &TtcPipeline, x0: &[f64]) -> Result<Vec<f64>> {
    let mut x = x0.to_vec();
    for stage in &pipeline.stages {
        if x.len() != stage.potential.dim() {
            return Err(Error::DimensionMismatch {
                expected: stage.potential.dim(),
                got: x.len(),
            });
        }
        x = step_point(&stage.potential, &x, stage.eta)?;
    }
    Ok(x)
}

/// Report of one guaranteed-reduction trial.
#[derive(Debug, Clone)]
pub struct ReductionReport {
    pub eta: f64,
    pub w1_before: f64,
    pub w1_after: f64,
    /// Mass transported at least `eta` by the optimal map.
    pub fraction_long: f64,
    /// `w1_before - eta (2 fraction_long - 1)`.
    pub bound: f64,
    /// `w1_after <= bound + 1e-8`.
    pub holds: bool,
    /// Whether the strict-decrease condition `fraction_long > 1/2` applies.
    pub strict_applicable: bool,
    /// Strict decrease observed (meaningful when applicable).
    pub strict_ok: bool,
}

pub const REDUCTION_SLACK: f64 = 1e-8;

/// Pushes `mu` one uniform step on its own exact potential and re-solves:
/// the new W1 must obey the reduction estimate.
pub fn uniform_step_reduction_check(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    eta: f64,
) -> Result<ReductionReport> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter("eta must be > 0"));
    }
    let (_, duals) = solve_w1(mu, nu)?;
    let w1_before = duals.w1;
    let p = DiscretePotential::from_duals(&duals, mu, nu)?;
    let rm = recover_map(&p, mu)?;
    let fraction_long: f64 = rm
        .assignments
        .iter()
        .zip(mu.weights())
        .filter(|(a, _)| a.alpha >= eta)
        .map(|(_, &w)| w)
        .sum();
    let pushed = uniform_step(&p, mu, eta)?;
    let (_, after) = solve_w1(&pushed, nu)?;
    let bound = w1_before - eta * (2.0 * fraction_long - 1.0);
    let holds = after.w1 <= bound + REDUCTION_SLACK;
    let strict_applicable = fraction_long > 0.5;
    Ok(ReductionReport {
        eta,
        w1_before,
        w1_after: after.w1,
        fraction_long,
        bound,
        holds,
        strict_applicable,
        strict_ok: after.w1 < w1_before,
    })
}

/// Report of one proximal-equivalence trial.
#[derive(Debug, Clone)]
pub struct AdvRegReport {
    pub eta: f64,
    /// `x0 - eta grad u0(x0)`, the closed-form solution.
    pub analytic: Vec<f64>,
    /// Best minimizer found by subgradient descent plus refinement.
    pub numeric: Vec<f64>,
    pub discrepancy: f64,
    pub pass: bool,
}

pub const ADVREG_TOL: f64 = 1e-6;

/// Minimizes `1/2 |x - x0|^2 + eta u0(x)` numerically (subgradient descent
/// with diminishing steps, then dense line and box refinement around the
/// candidate) and compares against the one-step gradient formula. Requires
/// `eta < 0.9 alpha(x0)` and a differentiable `x0`.
pub fn advreg_equivalence_check(
    p: &DiscretePotential,
    x0: &[f64],
    eta: f64,
) -> Result<AdvRegReport> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter("eta must be > 0"));
    }
    let info = p.ray_info(x0)?;
    if eta >= 0.9 * info.alpha {
        return Err(Error::InvalidParameter("eta must be < 0.9 * alpha(x0)"));
    }
    let analytic = math::axpy(x0, -eta, &info.grad);

    let objective = |x: &[f64]| -> f64 {
        let mut q = 0.0;
        for (a, b) in x.iter().zip(x0) {
            q += (a - b) * (a - b);
        }
        0.5 * q + eta * p.evaluate(x).unwrap_or(f64::INFINITY)
    };

    // Route 1: subgradient descent with diminishing steps from x0.
    let mut x = x0.to_vec();
    let mut best = x.clone();
    let mut best_val = objective(&x);
    for k in 0..1000 {
        let q = match p.gradient(&x) {
            Ok(g) => g.direction,
            Err(Error::AtAtom { .. }) => alloc::vec![0.0; x.len()],
            Err(e) => return Err(e),
        };
        let step = 0.5 / (k as f64 + 1.0);
        for i in 0..x.len() {
            let grad_f = (x[i] - x0[i]) + eta * q[i];
            x[i] -= step * grad_f;
        }
        let val = objective(&x);
        if val < best_val {
            best_val = val;
            best = x.clone();
        }
    }

    // Route 2: dense search along the descent ray, refined by ternary
    // section; the objective restricted to the ray is a parabola in t.
    let t_max = (2.0 * eta).min(0.99 * info.alpha);
    let mut t_best = 0.0;
    let mut f_best = objective(x0);
    let grid = 2000;
    for i in 0..=grid {
        let t = t_max * i as f64 / grid as f64;
        let f = objective(&math::axpy(x0, -t, &info.grad));
        if f < f_best {
            f_best = f;
            t_best = t;
        }
    }
    let (mut lo, mut hi) = ((t_best - t_max / grid as f64).max(0.0), (t_best + t_max / grid as f64).min(t_max));
    for _ in 0..80 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if objective(&math::axpy(x0, -m1, &info.grad))
            <= objective(&math::axpy(x0, -m2, &info.grad))
        {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let line_candidate = math::axpy(x0, -0.5 * (lo + hi), &info.grad);
    if objective(&line_candidate) < best_val {
        best_val = objective(&line_candidate);
        best = line_candidate;
    }

    // Box refinement around the candidate: shrinking grids catch any lower
    // off-ray minimizer.
    let mut window = eta * 0.1;
    for _ in 0..6 {
        let steps = 4i64;
        let mut improved = best.clone();
        let mut improved_val = best_val;
        let mut idx = alloc::vec![-steps; best.len()];
        'grid: loop {
            let cand: Vec<f64> = best
                .iter()
                .zip(&idx)
                .map(|(&c, &i)| c + window * i as f64 / steps as f64)
                .collect();
            let v = objective(&cand);
            if v < improved_val {
                improved_val = v;
                improved = cand;
            }
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] <= steps {
                    break;
                }
                idx[k] = -steps;
                k += 1;
                if k == best.len() {
                    break 'grid;
                }
            }
        }
        best = improved;
        best_val = improved_val;
        window *= 0.1;
    }

    let discrepancy = math::dist(&best, &analytic);
    Ok(AdvRegReport {
        eta,
        analytic,
        numeric: best,
        discrepancy,
        pass: discrepancy <= ADVREG_TOL,
    })
}

struct Timer {
    #[cfg(feature = "std")]
    start: std::time::Instant,
}

impl Timer {
    fn start() -> Self {
        Timer {
            #[cfg(feature = "std")]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> f64 {
        #[cfg(feature = "std")]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(not(feature = "std"))]
        {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_empirical, synth_dataset, SynthSpec};

    fn gaussian_cloud(n: usize, seed: u64, scale: f64, center: (f64, f64)) -> EmpiricalMeasure {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                alloc::vec![
                    center.0 + scale * math::standard_normal(&mut rng),
                    center.1 + scale * math::standard_normal(&mut rng),
                ]
            })
            .collect();
        make_empirical(pts, None).unwrap()
    }

    #[test]
    fn identical_measures_stop_immediately() {
        let m = make_empirical(vec![vec![0.0, 0.0], vec![1.0, 1.0]], None).unwrap();
        let run = train(&m, &m, 5, &[0], &TtcConfig::default()).unwrap();
        assert!(run.pipeline.is_empty());
        assert_eq!(run.metrics.stop, Some(StopReason::AlreadyOptimal { stage: 0 }));
        assert_eq!(run.final_measure, m);
    }

    #[test]
    fn single_pair_one_stage() {
        let mu = make_empirical(vec![vec![0.0, 0.0]], None).unwrap();
        let nu = make_empirical(vec![vec![3.0, 4.0]], None).unwrap();
        let run = train(&mu, &nu, 1, &[0], &TtcConfig::default()).unwrap();
        assert_eq!(run.pipeline.len(), 1);
        let m = &run.metrics.stages[0];
        assert!((m.eta - 5.0).abs() < 1e-9);
        assert!((m.w1_before - 5.0).abs() < 1e-9);
        assert!(m.w1_after.abs() < 1e-9);
        assert!(math::dist(&run.final_measure.points()[0], &[3.0, 4.0]) < 1e-9);
    }

    #[test]
    fn apply_empty_pipeline_is_identity() {
        let pipeline =
            TtcPipeline { stages: Vec::new(), schedule: vec![0], backend: Backend::Exact };
        assert_eq!(apply(&pipeline, &[1.5, -2.0]).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn apply_single_stage_single_atom() {
        let p = DiscretePotential::new(vec![vec![3.0, 4.0]], vec![0.0]).unwrap();
        let pipeline = TtcPipeline {
            stages: vec![TtcStage { potential: p, eta: 5.0 }],
            schedule: vec![0],
            backend: Backend::Exact,
        };
        let out = apply(&pipeline, &[0.0, 0.0]).unwrap();
        assert!(math::dist(&out, &[3.0, 4.0]) < 1e-12);
    }

    #[test]
    fn apply_is_deterministic() {
        let mu = gaussian_cloud(40, 1, 0.5, (0.0, 0.0));
        let nu = synth_dataset(&SynthSpec::Ring { n: 8, radius: 1.0 }, 0).unwrap();
        let run = train(&mu, &nu, 3, &[0, 1, 2], &TtcConfig::default()).unwrap();
        let a = apply(&run.pipeline, &[0.3, -0.1]).unwrap();
        let b = apply(&run.pipeline, &[0.3, -0.1]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gen_task_reduces_w1() {
        let mu = gaussian_cloud(64, 2, 0.7, (0.0, 0.0));
        let nu = synth_dataset(&SynthSpec::Ring { n: 8, radius: 1.0 }, 0).unwrap();
        let fit: Vec<usize> = (0..10).collect();
        let run = train(&mu, &nu, 10, &fit, &TtcConfig::default()).unwrap();
        let first = &run.metrics.stages[0];
        let last = run.metrics.stages.last().unwrap();
        assert!(
            last.w1_after < 0.5 * first.w1_before,
            "w1 {} -> {}",
            first.w1_before,
            last.w1_after
        );
    }

    #[test]
    fn monotone_when_majority_moves_long() {
        let mu = gaussian_cloud(48, 3, 0.6, (0.5, 0.5));
        let nu = synth_dataset(&SynthSpec::Ring { n: 6, radius: 1.0 }, 0).unwrap();
        let fit: Vec<usize> = (0..8).collect();
        let run = train(&mu, &nu, 8, &fit, &TtcConfig::default()).unwrap();
        for m in &run.metrics.stages {
            if m.fraction_long > 0.5 {
                assert!(
                    m.w1_after < m.w1_before,
                    "stage {}: fraction_long {} but W1 {} -> {}",
                    m.stage,
                    m.fraction_long,
                    m.w1_before,
                    m.w1_after
                );
            }
        }
    }

    #[test]
    fn reuse_schedule_shares_payload() {
        let mu = gaussian_cloud(32, 4, 0.5, (0.0, 0.0));
        let nu = synth_dataset(&SynthSpec::AtomGrid { rows: 2, cols: 2 }, 0).unwrap();
        let run = train(&mu, &nu, 4, &[0, 2], &TtcConfig::default()).unwrap();
        let stages = &run.pipeline.stages;
        assert_eq!(stages[1].potential.values(), stages[0].potential.values());
        assert_eq!(stages[1].potential.atoms(), stages[0].potential.atoms());
        assert_eq!(stages[3].potential.values(), stages[2].potential.values());
        assert!(run.metrics.stages[0].fitted && !run.metrics.stages[1].fitted);
    }

    #[test]
    fn alpha_mode_transports_in_one_stage() {
        // 64 samples over 8 atoms: divisible, so an unsplit optimal plan
        // exists and the alpha step is a full transport.
        let mu = gaussian_cloud(64, 5, 0.8, (0.0, 0.0));
        let nu = synth_dataset(&SynthSpec::Ring { n: 8, radius: 1.0 }, 0).unwrap();
        let config = TtcConfig { step_mode: StepMode::PerPointAlpha, ..TtcConfig::default() };
        let run = train(&mu, &nu, 1, &[0], &config).unwrap();
        assert!(
            run.metrics.stages[0].w1_after <= 1e-6,
            "residual {}",
            run.metrics.stages[0].w1_after
        );
    }

    #[test]
    fn schedule_validation() {
        let mu = make_empirical(vec![vec![0.0, 0.0]], None).unwrap();
        let nu = make_empirical(vec![vec![1.0, 0.0]], None).unwrap();
        assert!(matches!(
            train(&mu, &nu, 2, &[1], &TtcConfig::default()),
            Err(Error::BadSchedule(_))
        ));
        assert!(matches!(
            train(&mu, &nu, 2, &[], &TtcConfig::default()),
            Err(Error::BadSchedule(_))
        ));
        assert!(matches!(
            train(&mu, &nu, 2, &[0, 5], &TtcConfig::default()),
            Err(Error::BadSchedule(_))
        ));
    }

    #[test]
    fn reduction_uniform_distances() {
        // Atoms 5 apart, each source shifted off its atom by length 0.1:
        // the diagonal matching is optimal, every transport distance is 0.1,
        // and a step of exactly 0.1 lands every particle on its target.
        let nu = synth_dataset(&SynthSpec::Ring { n: 6, radius: 5.0 }, 0).unwrap();
        let mu_pts: Vec<Vec<f64>> =
            nu.points().iter().map(|p| alloc::vec![p[0] + 0.06, p[1] + 0.08]).collect();
        let mu = make_empirical(mu_pts, None).unwrap();
        // a hair under 0.1 keeps `alpha >= eta` off the float knife edge
        let eta = 0.1 * (1.0 - 1e-12);
        let rep = uniform_step_reduction_check(&mu, &nu, eta).unwrap();
        assert!((rep.fraction_long - 1.0).abs() < 1e-12, "{rep:?}");
        assert!(rep.holds, "{rep:?}");
        assert!(rep.w1_after <= 1e-9, "{rep:?}");
        assert!((rep.bound - (rep.w1_before - eta)).abs() < 1e-9);
    }

    #[test]
    fn reduction_overshoot_bounded() {
        // eta larger than every distance: the bound is vacuous (allows an
        // increase up to eta) and the observed increase stays below it.
        let nu = synth_dataset(&SynthSpec::Ring { n: 6, radius: 5.0 }, 0).unwrap();
        let mu_pts: Vec<Vec<f64>> =
            nu.points().iter().map(|p| alloc::vec![p[0] + 0.06, p[1] + 0.08]).collect();
        let mu = make_empirical(mu_pts, None).unwrap();
        let rep = uniform_step_reduction_check(&mu, &nu, 1.0).unwrap();
        assert_eq!(rep.fraction_long, 0.0);
        assert!(rep.holds, "{rep:?}");
        assert!(rep.w1_after <= rep.w1_before + 1.0 + 1e-9);
    }

    #[test]
    fn reduction_random_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        for trial in 0..20 {
            let n_nu = rng.gen_range(3..=6);
            let n_mu = n_nu * rng.gen_range(5..=12);
            let mu_pts: Vec<Vec<f64>> = (0..n_mu)
                .map(|_| (0..2).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let nu_pts: Vec<Vec<f64>> = (0..n_nu)
                .map(|_| (0..2).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let mu = make_empirical(mu_pts, None).unwrap();
            let nu = make_empirical(nu_pts, None).unwrap();
            // eta at 0.9 of the median transport distance
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
            assert!(rep.holds, "trial {trial}: {rep:?}");
            if rep.strict_applicable {
                assert!(rep.strict_ok, "trial {trial}: {rep:?}");
            }
        }
    }

    #[test]
    fn advreg_single_atom_closed_form() {
        let p = DiscretePotential::with_domain(
            vec![vec![3.0, 4.0]],
            vec![0.0],
            crate::measures::BoundingBox { lo: vec![-2.0, -2.0], hi: vec![6.0, 6.0] },
        )
        .unwrap();
        let rep = advreg_equivalence_check(&p, &[0.0, 0.0], 2.0).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(math::dist(&rep.analytic, &[1.2, 1.6]) < 1e-12);
        assert!(math::dist(&rep.numeric, &[1.2, 1.6]) < 1e-6);
    }

    #[test]
    fn advreg_vanishing_eta() {
        let p = DiscretePotential::new(vec![vec![3.0, 4.0]], vec![0.0]).unwrap();
        let rep = advreg_equivalence_check(&p, &[0.0, 0.0], 1e-8).unwrap();
        assert!(rep.pass);
        assert!(math::dist(&rep.numeric, &[0.0, 0.0]) < 1e-7);
    }

    #[test]
    fn advreg_random_semidiscrete() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let mu = gaussian_cloud(40, 62, 0.4, (0.5, 0.5));
        let nu_pts: Vec<Vec<f64>> =
            (0..5).map(|_| (0..2).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let nu = make_empirical(nu_pts, None).unwrap();
        let (_, duals) = solve_w1(&mu, &nu).unwrap();
        let p = DiscretePotential::from_duals(&duals, &mu, &nu).unwrap();
        let mut trials = 0;
        for x in mu.points() {
            if trials >= 10 {
                break;
            }
            let Ok(info) = p.ray_info(x) else { continue };
            if info.alpha < 1e-3 {
                continue;
            }
            let eta = 0.5 * info.alpha;
            let rep = advreg_equivalence_check(&p, x, eta).unwrap();
            assert!(rep.pass, "{rep:?}");
            trials += 1;
        }
        assert!(trials > 0);
    }

    #[test]
    fn advreg_precondition_enforced() {
        let p = DiscretePotential::new(vec![vec![3.0, 4.0]], vec![0.0]).unwrap();
        // alpha(x0) = 5, so eta = 4.6 violates the 0.9 safety factor.
        assert!(advreg_equivalence_check(&p, &[0.0, 0.0], 4.6).is_err());
    }

    #[test]
    fn perturbed_backend_tracks_exact() {
        // Regression guard with recorded (golden) thresholds. The exact
        // backend converges geometrically while the perturbed one floors at
        // the dual-noise scale, so the guard is an absolute recorded ceiling
        // plus a relative-reduction requirement, both seeded.
        const GOLDEN_PERTURBED_CEIL: f64 = 0.08;
        let mu = gaussian_cloud(48, 7, 0.6, (0.3, 0.3));
        let nu = synth_dataset(&SynthSpec::Ring { n: 6, radius: 1.0 }, 0).unwrap();
        let fit: Vec<usize> = (0..8).collect();
        let exact = train(&mu, &nu, 8, &fit, &TtcConfig::default()).unwrap();
        let (_, duals) = solve_w1(&mu, &nu).unwrap();
        let config = TtcConfig {
            backend: Backend::Perturbed { sigma_dual: 0.01 * duals.w1, seed: 5 },
            ..TtcConfig::default()
        };
        let perturbed = train(&mu, &nu, 8, &fit, &config).unwrap();
        let w_exact = exact.metrics.stages.last().unwrap().w1_after;
        let w_pert = perturbed.metrics.stages.last().unwrap().w1_after;
        let initial = perturbed.metrics.stages[0].w1_before;
        assert!(
            w_pert <= (2.0 * w_exact).max(GOLDEN_PERTURBED_CEIL),
            "perturbed {w_pert} vs exact {w_exact}"
        );
        assert!(w_pert <= 0.1 * initial, "perturbed run must still reduce W1 10x: {w_pert} vs {initial}");
    }

    #[test]
    fn pathological_perturbation_aborts() {
        // Nearly coincident clouds with a huge dual perturbation push the
        // estimated step size negative; the stage must abort cleanly.
        let mu = make_empirical(vec![vec![0.0, 0.0], vec![1.0, 0.0]], None).unwrap();
        let nu = make_empirical(vec![vec![1e-6, 0.0], vec![1.0 + 1e-6, 0.0]], None).unwrap();
        let config = TtcConfig {
            backend: Backend::Perturbed { sigma_dual: 10.0, seed: 1 },
            eta_batches: 4,
            minibatch: 8,
            ..TtcConfig::default()
        };
        let run = train(&mu, &nu, 3, &[0], &config).unwrap();
        assert!(matches!(run.metrics.stop, Some(StopReason::NonpositiveEta { .. })));
    }

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
}
