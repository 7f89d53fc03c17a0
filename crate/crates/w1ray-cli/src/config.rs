//! Experiment configuration: an INI-style key=value file, overridable by
//! command-line flags, canonically hashed so every artifact can record the
//! exact configuration that produced it.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use w1ray_core::ttc::Backend;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Gen2d,
    Denoise,
    Deblur,
    Transport,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Gen2d => "gen2d",
            Task::Denoise => "denoise",
            Task::Deblur => "deblur",
            Task::Transport => "transport",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "gen2d" => Task::Gen2d,
            "denoise" => Task::Denoise,
            "deblur" => Task::Deblur,
            "transport" => Task::Transport,
            other => bail!("unknown task {other:?}"),
        })
    }
}

/// Which stages fit a fresh potential.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FitSchedule {
    All,
    /// Every other stage starting at 0.
    Alternating,
    List(Vec<usize>),
}

impl FitSchedule {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => FitSchedule::All,
            "alternating" => FitSchedule::Alternating,
            list => {
                let idx: Vec<usize> = list
                    .split(',')
                    .map(|t| t.trim().parse::<usize>().context("bad fit-at index"))
                    .collect::<Result<_>>()?;
                FitSchedule::List(idx)
            }
        })
    }

    pub fn resolve(&self, n_stages: usize) -> Vec<usize> {
        match self {
            FitSchedule::All => (0..n_stages).collect(),
            FitSchedule::Alternating => (0..n_stages).step_by(2).collect(),
            FitSchedule::List(idx) => idx.clone(),
        }
    }
}

impl fmt::Display for FitSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitSchedule::All => write!(f, "all"),
            FitSchedule::Alternating => write!(f, "alternating"),
            FitSchedule::List(idx) => {
                let parts: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

/// `exact` or `perturbed:<sigma>`.
pub fn parse_backend(s: &str, seed: u64) -> Result<Backend> {
    if s == "exact" {
        return Ok(Backend::Exact);
    }
    if let Some(sigma) = s.strip_prefix("perturbed:") {
        let sigma_dual: f64 = sigma.parse().context("bad perturbed sigma")?;
        if !(sigma_dual >= 0.0) {
            bail!("perturbed sigma must be >= 0");
        }
        return Ok(Backend::Perturbed { sigma_dual, seed });
    }
    bail!("unknown backend {s:?} (expected exact or perturbed:<sigma>)")
}

pub fn backend_name(b: &Backend) -> String {
    match b {
        Backend::Exact => "exact".into(),
        Backend::Perturbed { sigma_dual, .. } => format!("perturbed:{sigma_dual}"),
    }
}

/// Full description of one harness experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: u64,
    pub steps: usize,
    pub fit_at: FitSchedule,
    pub backend: String,
    /// Noise std for the denoise task.
    pub sigma: f64,
    /// Blur kernel for the deblur task.
    pub blur_size: usize,
    pub blur_sigma: f64,
    /// Source particles (gen2d / transport) or noisy copies in total
    /// (denoise / deblur).
    pub n_source: usize,
    /// Target atoms: ring atoms (gen2d), grid side (transport), image count
    /// (denoise / deblur).
    pub n_target: usize,
    /// Toy image side length.
    pub image_side: usize,
    pub out_dir: PathBuf,
    pub snapshots: bool,
}

impl ExperimentConfig {
    pub fn defaults(task: Task) -> Self {
        let (steps, n_source, n_target) = match task {
            Task::Gen2d => (20, 512, 8),
            Task::Transport => (20, 512, 4), // 4x4 grid -> 16 atoms
            Task::Denoise | Task::Deblur => (10, 64, 8),
        };
        ExperimentConfig {
            task,
            seed: 0,
            steps,
            fit_at: FitSchedule::All,
            backend: "exact".into(),
            sigma: 0.1,
            blur_size: 5,
            blur_sigma: 2.0,
            n_source,
            n_target,
            image_side: 8,
            out_dir: PathBuf::from(format!("runs/{}", task.name())),
            snapshots: false,
        }
    }

    /// Applies `key = value` lines from an INI-style file. Unknown keys are
    /// rejected so typos do not silently fall back to defaults.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", lineno + 1))?;
            self.apply_kv(key.trim(), value.trim())
                .with_context(|| format!("line {}", lineno + 1))?;
        }
        Ok(())
    }

    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "task" => self.task = Task::parse(value)?,
            "seed" => self.seed = value.parse()?,
            "steps" => self.steps = value.parse()?,
            "fit_at" => self.fit_at = FitSchedule::parse(value)?,
            "backend" => {
                parse_backend(value, 0)?; // validate now, bind seed later
                self.backend = value.to_string();
            }
            "sigma" => self.sigma = value.parse()?,
            "blur_size" => self.blur_size = value.parse()?,
            "blur_sigma" => self.blur_sigma = value.parse()?,
            "n_source" => self.n_source = value.parse()?,
            "n_target" => self.n_target = value.parse()?,
            "image_side" => self.image_side = value.parse()?,
            "out" => self.out_dir = PathBuf::from(value),
            "snapshots" => self.snapshots = value.parse()?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            bail!("steps must be >= 1");
        }
        if self.n_source == 0 || self.n_target == 0 {
            bail!("n_source and n_target must be >= 1");
        }
        if matches!(self.task, Task::Denoise) && !(self.sigma > 0.0) {
            bail!("sigma must be > 0");
        }
        if matches!(self.task, Task::Deblur) {
            if self.blur_size < 3 || self.blur_size % 2 == 0 {
                bail!("blur_size must be odd and >= 3");
            }
            if !(self.blur_sigma > 0.0) {
                bail!("blur_sigma must be > 0");
            }
        }
        let fit = self.fit_at.resolve(self.steps);
        if fit.is_empty() || !fit.contains(&0) || fit.iter().any(|&i| i >= self.steps) {
            bail!("fit_at must be nonempty, contain 0, and stay below steps");
        }
        Ok(())
    }

    pub fn backend(&self) -> Backend {
        parse_backend(&self.backend, self.seed).expect("validated at parse time")
    }

    /// Canonical text form; the config hash is FNV-1a over these bytes.
    pub fn canonical(&self) -> String {
        format!(
            "task={}\nseed={}\nsteps={}\nfit_at={}\nbackend={}\nsigma={}\nblur_size={}\n\
             blur_sigma={}\nn_source={}\nn_target={}\nimage_side={}\nsnapshots={}\n",
            self.task.name(),
            self.seed,
            self.steps,
            self.fit_at,
            self.backend,
            self.sigma,
            self.blur_size,
            self.blur_sigma,
            self.n_source,
            self.n_target,
            self.image_side,
            self.snapshots,
        )
    }

    pub fn hash(&self) -> u64 {
        fnv1a(self.canonical().as_bytes())
    }
}

/// FNV-1a, 64-bit: stable across platforms and toolchain versions, unlike
/// the std hasher.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for task in [Task::Gen2d, Task::Denoise, Task::Deblur, Task::Transport] {
            ExperimentConfig::defaults(task).validate().unwrap();
        }
    }

    #[test]
    fn ini_roundtrip_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.ini");
        std::fs::write(&path, "# comment\nseed = 7\nsteps=5\nfit_at = alternating\n").unwrap();
        let mut cfg = ExperimentConfig::defaults(Task::Gen2d);
        cfg.apply_file(&path).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.steps, 5);
        assert_eq!(cfg.fit_at.resolve(5), vec![0, 2, 4]);
        // flag-style override wins over the file
        cfg.apply_kv("seed", "9").unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut cfg = ExperimentConfig::defaults(Task::Gen2d);
        assert!(cfg.apply_kv("tpyo", "1").is_err());
    }

    #[test]
    fn backend_parsing() {
        assert_eq!(parse_backend("exact", 1).unwrap(), Backend::Exact);
        match parse_backend("perturbed:0.05", 3).unwrap() {
            Backend::Perturbed { sigma_dual, seed } => {
                assert_eq!(sigma_dual, 0.05);
                assert_eq!(seed, 3);
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_backend("sinkhorn", 0).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::defaults(Task::Gen2d);
        let mut b = ExperimentConfig::defaults(Task::Gen2d);
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn schedule_forms() {
        assert_eq!(FitSchedule::parse("all").unwrap().resolve(3), vec![0, 1, 2]);
        assert_eq!(FitSchedule::parse("alternating").unwrap().resolve(5), vec![0, 2, 4]);
        assert_eq!(FitSchedule::parse("0,3,4").unwrap().resolve(5), vec![0, 3, 4]);
    }
}
