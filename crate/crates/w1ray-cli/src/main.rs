use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use w1ray_cli::config::{parse_backend, ExperimentConfig, FitSchedule, Task};
use w1ray_cli::harness::{self, CheckStatus};
use w1ray_cli::io;

use w1ray_core::exact_ot::solve_w1;
use w1ray_core::map_recovery::{recover_map, score_against_plan, verify_pushforward};
use w1ray_core::measures::{make_empirical, BoundingBox, OMEGA_MARGIN};
use w1ray_core::potential::{DiscretePotential, Gradient};
use w1ray_core::ttc;
use w1ray_core::Error as CoreError;

/// Exact semi-discrete Wasserstein-1 transport: solver, transport rays, map
/// recovery, iterative transport, and experiment harness.
#[derive(Parser)]
#[command(name = "w1ray", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve W1(mu, nu) exactly; write plan.csv, duals.csv, summary.csv.
    Solve {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate transport-ray geometry at query points; write rays.csv.
    Rays {
        /// Point cloud carrying the potential's atoms.
        #[arg(long)]
        atoms: PathBuf,
        /// Duals file whose target rows carry the atom values.
        #[arg(long)]
        duals: PathBuf,
        /// Query point cloud.
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover the transport map from the potential alone; write map.csv
    /// and verify.csv.
    Map {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the iterative transport procedure on two point clouds.
    Ttc {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long)]
        steps: usize,
        /// `all`, `alternating`, or a comma-separated index list.
        #[arg(long, default_value = "all")]
        fit_at: String,
        /// `exact` or `perturbed:<sigma>`.
        #[arg(long, default_value = "exact")]
        backend: String,
        /// `uniform` or `alpha` (per-point diagnostic step).
        #[arg(long, default_value = "uniform")]
        step_mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write per-stage particle snapshots mu_<n>.csv.
        #[arg(long)]
        snapshots: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// 2D generation experiment: Gaussian cloud onto ring atoms.
    Gen2d(TaskArgs),
    /// Denoising experiment on toy images.
    Denoise(TaskArgs),
    /// Deblurring experiment on toy images.
    Deblur(TaskArgs),
    /// Style transport experiment: ring cloud onto a grid.
    Transport(TaskArgs),
    /// Run the numerical property suite; exit 3 on any failure.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "runs/verify")]
        out: PathBuf,
        /// Corrupt one dual value first; the suite must then fail.
        #[arg(long)]
        negative_control: bool,
    },
}

/// Config-file plus override flags shared by the experiment subcommands.
#[derive(Args)]
struct TaskArgs {
    /// INI-style key = value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    fit_at: Option<String>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    blur_size: Option<usize>,
    #[arg(long)]
    blur_sigma: Option<f64>,
    #[arg(long)]
    n_source: Option<usize>,
    #[arg(long)]
    n_target: Option<usize>,
    #[arg(long)]
    image_side: Option<usize>,
    #[arg(long)]
    snapshots: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl TaskArgs {
    fn build(&self, task: Task) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::defaults(task);
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = &self.fit_at {
            cfg.fit_at = FitSchedule::parse(v)?;
        }
        if let Some(v) = &self.backend {
            cfg.apply_kv("backend", v)?;
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.blur_size {
            cfg.blur_size = v;
        }
        if let Some(v) = self.blur_sigma {
            cfg.blur_sigma = v;
        }
        if let Some(v) = self.n_source {
            cfg.n_source = v;
        }
        if let Some(v) = self.n_target {
            cfg.n_target = v;
        }
        if let Some(v) = self.image_side {
            cfg.image_side = v;
        }
        if self.snapshots {
            cfg.snapshots = true;
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_VERIFY: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { mu, nu, out } => {
            let w1 = harness::solve_files(&mu, &nu, &out)?;
            println!("w1 = {w1}");
        }
        Command::Rays { atoms, duals, query, out } => {
            let (atom_cloud, _) = io::read_points(&atoms)?;
            let values = io::read_target_duals(&duals)?;
            let (queries, _) = io::read_points(&query)?;
            let domain = BoundingBox::from_point_sets(
                &[atom_cloud.points(), queries.points()],
                OMEGA_MARGIN,
            );
            let potential =
                DiscretePotential::with_domain(atom_cloud.points().to_vec(), values, domain)?;
            let mut rows = Vec::with_capacity(queries.len());
            for x in queries.points() {
                match potential.ray_info(x) {
                    Ok(info) => rows.push(io::RayRow::from_info(&info)),
                    Err(CoreError::Nondifferentiable { .. }) => {
                        let g = potential.gradient(x)?;
                        rows.push(tie_row(x, g));
                    }
                    Err(CoreError::AtAtom { atom }) => {
                        // on an atom every direction is a subgradient
                        rows.push(io::RayRow {
                            point: x.clone(),
                            grad: vec![0.0; potential.dim()],
                            alpha: 0.0,
                            beta: f64::NAN,
                            active_atom: atom,
                            tie: true,
                        });
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            io::write_rays(&out, potential.dim(), &rows)?;
            println!("wrote {} rays to {}", rows.len(), out.display());
        }
        Command::Map { mu, nu, out } => {
            let (mu_m, _) = io::read_points(&mu)?;
            let (nu_m, _) = io::read_points(&nu)?;
            let (plan, duals) = solve_w1(&mu_m, &nu_m)?;
            let potential = DiscretePotential::from_duals(&duals, &mu_m, &nu_m)?;
            let mut rm = recover_map(&potential, &mu_m)?;
            if rm.outside_theorem {
                eprintln!(
                    "warning: dim = {} is outside the map-recovery hypotheses (needs d >= 2); \
                     results are flagged",
                    mu_m.dim()
                );
            }
            let agreement = score_against_plan(&mut rm, &plan, &mu_m);
            let push = verify_pushforward(&rm, &mu_m, &nu_m);
            io::write_map(&out.join("map.csv"), &rm)?;
            io::write_report(
                &out.join("verify.csv"),
                "map_verify",
                &[
                    ("w1".into(), format!("{}", duals.w1)),
                    ("transport_cost".into(), format!("{}", push.transport_cost)),
                    ("max_mass_deviation".into(), format!("{}", push.max_mass_deviation)),
                    ("mismatch_mass".into(), format!("{}", agreement.mismatch_mass)),
                    ("split_mass".into(), format!("{}", agreement.split_mass)),
                    ("tie_mass".into(), format!("{}", agreement.tie_mass)),
                    ("unsnapped_mass".into(), format!("{}", rm.unsnapped_mass)),
                    ("outside_theorem".into(), format!("{}", u8::from(rm.outside_theorem))),
                ],
            )?;
            println!(
                "recovered map: mismatch_mass = {}, cost = {}",
                agreement.mismatch_mass, push.transport_cost
            );
        }
        Command::Ttc { mu, nu, steps, fit_at, backend, step_mode, seed, snapshots, out } => {
            let (mu_m, shape) = io::read_points(&mu)?;
            let (nu_m, _) = io::read_points(&nu)?;
            let fit = FitSchedule::parse(&fit_at)?.resolve(steps);
            let step_mode = match step_mode.as_str() {
                "uniform" => ttc::StepMode::UniformEta,
                "alpha" => ttc::StepMode::PerPointAlpha,
                other => anyhow::bail!("unknown step mode {other:?}"),
            };
            let config = ttc::TtcConfig {
                backend: parse_backend(&backend, seed)?,
                step_mode,
                keep_snapshots: snapshots,
                ..ttc::TtcConfig::default()
            };
            let run = ttc::train(&mu_m, &nu_m, steps, &fit, &config)?;
            io::write_metrics(&out.join("metrics.csv"), &run.metrics, 0, seed)?;
            let pipeline_dir = out.join("pipeline");
            for (n, stage) in run.pipeline.stages.iter().enumerate() {
                let atoms = make_empirical(
                    stage.potential.atoms().to_vec(),
                    Some(nu_m.weights().to_vec()),
                )?;
                io::write_points(&pipeline_dir.join(format!("stage_{n}_atoms.csv")), &atoms, shape)?;
                let values: Vec<(String, String)> = stage
                    .potential
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (j.to_string(), format!("{v}")))
                    .collect();
                io::write_report(
                    &pipeline_dir.join(format!("stage_{n}_values.csv")),
                    "values",
                    &values,
                )?;
                io::write_report(
                    &pipeline_dir.join(format!("stage_{n}_eta.csv")),
                    "eta",
                    &[("eta".into(), format!("{}", stage.eta))],
                )?;
            }
            io::write_points(&out.join("mu_final.csv"), &run.final_measure, shape)?;
            if snapshots {
                for (n, snap) in run.snapshots.iter().enumerate() {
                    io::write_points(&out.join(format!("mu_{}.csv", n + 1)), snap, shape)?;
                }
            }
            if let Some(stop) = &run.metrics.stop {
                println!("stopped early: {stop:?}");
            }
            let final_w1 = run.metrics.stages.last().map(|m| m.w1_after).unwrap_or(0.0);
            println!("final W1 = {final_w1}");
        }
        Command::Gen2d(args) => return run_experiment(args.build(Task::Gen2d)?),
        Command::Denoise(args) => return run_experiment(args.build(Task::Denoise)?),
        Command::Deblur(args) => return run_experiment(args.build(Task::Deblur)?),
        Command::Transport(args) => return run_experiment(args.build(Task::Transport)?),
        Command::Verify { seed, out, negative_control } => {
            let outcome = harness::verify_all(seed, &out, negative_control)
                .context("running verification suite")?;
            for row in &outcome.rows {
                println!(
                    "{:<32} {:<5} observed={:<12.3e} tol={:.3e}",
                    row.name,
                    match row.status {
                        CheckStatus::Pass => "pass",
                        CheckStatus::Fail => "FAIL",
                        CheckStatus::Skip => "skip",
                    },
                    row.observed,
                    row.tolerance
                );
            }
            if !outcome.passed {
                return Ok(ExitCode::from(EXIT_VERIFY));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn tie_row(x: &[f64], g: Gradient) -> io::RayRow {
    io::RayRow {
        point: x.to_vec(),
        grad: g.direction,
        alpha: f64::NAN,
        beta: f64::NAN,
        active_atom: g.active_atom,
        tie: true,
    }
}

fn run_experiment(cfg: ExperimentConfig) -> Result<ExitCode> {
    let outcome = harness::run_task(&cfg)?;
    let s = &outcome.summary;
    println!(
        "task={} seed={} stages={} w1 {:.6} -> {:.6}",
        s.task, s.seed, s.n_stages, s.w1_initial, s.w1_final
    );
    if let (Some(b), Some(f)) = (s.psnr_baseline, s.psnr_final) {
        println!("psnr baseline {b:.2} dB -> restored {f:.2} dB");
    }
    println!("artifacts in {}", outcome.out_dir.display());
    Ok(ExitCode::SUCCESS)
}
