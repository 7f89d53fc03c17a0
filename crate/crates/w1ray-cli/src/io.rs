//! CSV file formats.
//!
//! Every file starts with a `# w1ray <kind> v1 ...` comment line carrying
//! machine-readable key=value metadata, followed by a column header and data
//! rows. Floats are written with Rust's shortest-roundtrip formatting and a
//! `.` decimal separator, so re-reading reproduces the values bit-exactly
//! and re-running a deterministic pipeline reproduces the files byte-exactly.
//!
//! Point clouds: `# w1ray points v1 dim=<d> [shape=<H>x<W>]` then one
//! `w,x1,...,xd` row per atom. Image atoms use the same format with
//! `shape` recording the row-major raster layout.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use w1ray_core::exact_ot::{DualSolution, TransportPlan};
use w1ray_core::map_recovery::RecoveredMap;
use w1ray_core::measures::EmpiricalMeasure;
use w1ray_core::potential::RayInfo;
use w1ray_core::ttc::TtcMetrics;

pub const FORMAT_VERSION: &str = "v1";

fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t.parse::<f64>().with_context(|| format!("bad float {t:?}")),
    }
}

/// Writes a measure as a point-cloud CSV; `shape` records the raster layout
/// of image atoms.
pub fn write_points(
    path: &Path,
    m: &EmpiricalMeasure,
    shape: Option<(usize, usize)>,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# w1ray points {FORMAT_VERSION} dim={}", m.dim()));
    if let Some((h, w)) = shape {
        out.push_str(&format!(" shape={h}x{w}"));
    }
    out.push('\n');
    let mut cols = vec!["w".to_string()];
    cols.extend((1..=m.dim()).map(|k| format!("x{k}")));
    out.push_str(&cols.join(","));
    out.push('\n');
    for (p, &w) in m.points().iter().zip(m.weights()) {
        out.push_str(&fmt_f64(w));
        for v in p {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Reads a point-cloud CSV back into a measure plus the recorded raster
/// shape, if any.
pub fn read_points(path: &Path) -> Result<(EmpiricalMeasure, Option<(usize, usize)>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty file")?;
    if !header.starts_with("# w1ray points") {
        bail!("not a w1ray points file: {}", path.display());
    }
    let mut dim: Option<usize> = None;
    let mut shape: Option<(usize, usize)> = None;
    for token in header.split_whitespace() {
        if let Some(d) = token.strip_prefix("dim=") {
            dim = Some(d.parse().context("bad dim= in header")?);
        }
        if let Some(s) = token.strip_prefix("shape=") {
            let (h, w) = s.split_once('x').context("bad shape= in header")?;
            shape = Some((h.parse()?, w.parse()?));
        }
    }
    let dim = dim.context("header missing dim=")?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('w') {
            continue; // column header or comment
        }
        let mut fields = line.split(',');
        let w = parse_f64(fields.next().context("missing weight")?)?;
        let coords: Vec<f64> = fields.map(parse_f64).collect::<Result<_>>()?;
        if coords.len() != dim {
            bail!("row has {} coords, header says dim={}", coords.len(), dim);
        }
        weights.push(w);
        points.push(coords);
    }
    let m = EmpiricalMeasure::new(points, Some(weights))?;
    Ok((m, shape))
}

pub fn write_plan(path: &Path, plan: &TransportPlan) -> Result<()> {
    let mut out = format!("# w1ray plan {FORMAT_VERSION}\ni,j,mass\n");
    for e in &plan.entries {
        out.push_str(&format!("{},{},{}\n", e.source, e.target, fmt_f64(e.mass)));
    }
    write_atomic(path, &out)
}

pub fn write_duals(path: &Path, duals: &DualSolution) -> Result<()> {
    let mut out = format!("# w1ray duals {FORMAT_VERSION}\nside,index,value\n");
    for (i, &u) in duals.source_values.iter().enumerate() {
        out.push_str(&format!("source,{i},{}\n", fmt_f64(u)));
    }
    for (j, &v) in duals.target_values.iter().enumerate() {
        out.push_str(&format!("target,{j},{}\n", fmt_f64(v)));
    }
    write_atomic(path, &out)
}

/// Reads the `target` rows of a duals file, in index order.
pub fn read_target_duals(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values: Vec<(usize, f64)> = Vec::new();
    for line in text.lines().skip(1) {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("side") {
            continue;
        }
        let mut fields = line.split(',');
        let side = fields.next().context("missing side")?;
        let index: usize = fields.next().context("missing index")?.parse()?;
        let value = parse_f64(fields.next().context("missing value")?)?;
        if side == "target" {
            values.push((index, value));
        }
    }
    values.sort_by_key(|&(i, _)| i);
    Ok(values.into_iter().map(|(_, v)| v).collect())
}

pub fn write_solve_summary(path: &Path, w1: f64, gap: f64, iterations: usize) -> Result<()> {
    let out = format!(
        "# w1ray summary {FORMAT_VERSION}\nw1,gap,iterations\n{},{},{}\n",
        fmt_f64(w1),
        fmt_f64(gap),
        iterations
    );
    write_atomic(path, &out)
}

/// One output row of the `rays` subcommand. Tie rows carry the tie-broken
/// direction with `alpha`/`beta` of that branch left as NaN.
pub struct RayRow {
    pub point: Vec<f64>,
    pub grad: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub active_atom: usize,
    pub tie: bool,
}

impl RayRow {
    pub fn from_info(info: &RayInfo) -> Self {
        RayRow {
            point: info.point.clone(),
            grad: info.grad.clone(),
            alpha: info.alpha,
            beta: info.beta,
            active_atom: info.active_atom,
            tie: false,
        }
    }
}

pub fn write_rays(path: &Path, dim: usize, rows: &[RayRow]) -> Result<()> {
    let mut cols: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
    cols.extend((1..=dim).map(|k| format!("g{k}")));
    cols.extend(["alpha", "beta", "active_atom", "tie_flag"].map(String::from));
    let mut out = format!("# w1ray rays {FORMAT_VERSION} dim={dim}\n{}\n", cols.join(","));
    for r in rows {
        let mut fields: Vec<String> = r.point.iter().map(|&v| fmt_f64(v)).collect();
        fields.extend(r.grad.iter().map(|&v| fmt_f64(v)));
        fields.push(if r.alpha.is_nan() { "nan".into() } else { fmt_f64(r.alpha) });
        fields.push(if r.beta.is_nan() { "nan".into() } else { fmt_f64(r.beta) });
        fields.push(r.active_atom.to_string());
        fields.push(if r.tie { "1".into() } else { "0".into() });
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    write_atomic(path, &out)
}

pub fn write_map(path: &Path, rm: &RecoveredMap) -> Result<()> {
    let mut out = format!("# w1ray map {FORMAT_VERSION}\nsource_index,target_index,alpha,tie_flag\n");
    for (i, a) in rm.assignments.iter().enumerate() {
        let target = a.target.map(|t| t as i64).unwrap_or(-1);
        out.push_str(&format!("{i},{target},{},{}\n", fmt_f64(a.alpha), u8::from(a.tie)));
    }
    write_atomic(path, &out)
}

/// Generic `metric,value` report file.
pub fn write_report(path: &Path, kind: &str, rows: &[(String, String)]) -> Result<()> {
    let mut out = format!("# w1ray {kind} {FORMAT_VERSION}\nmetric,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{v}\n"));
    }
    write_atomic(path, &out)
}

/// Per-stage metrics table with the experiment's config hash and seed in the
/// header, one row per stage.
pub fn write_metrics(path: &Path, metrics: &TtcMetrics, config_hash: u64, seed: u64) -> Result<()> {
    let mut out = format!(
        "# w1ray metrics {FORMAT_VERSION} config={config_hash:016x} seed={seed}\n\
         stage,w1_before,w1_after,eta,fraction_long,fitted,runtime_sec\n"
    );
    for m in &metrics.stages {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            m.stage,
            fmt_f64(m.w1_before),
            fmt_f64(m.w1_after),
            fmt_f64(m.eta),
            fmt_f64(m.fraction_long),
            u8::from(m.fitted),
            fmt_f64(m.runtime_sec),
        ));
    }
    if let Some(stop) = &metrics.stop {
        out.push_str(&format!("# stopped: {stop:?}\n"));
    }
    write_atomic(path, &out)
}

/// The harness summary schema:
/// `task,seed,N,backend,w1_initial,w1_final,psnr_baseline,psnr_final`.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub task: String,
    pub seed: u64,
    pub n_stages: usize,
    pub backend: String,
    pub w1_initial: f64,
    pub w1_final: f64,
    pub psnr_baseline: Option<f64>,
    pub psnr_final: Option<f64>,
}

pub fn write_summary(path: &Path, config_hash: u64, row: &SummaryRow) -> Result<()> {
    let fmt_opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let out = format!(
        "# w1ray summary {FORMAT_VERSION} config={config_hash:016x} seed={}\n\
         task,seed,N,backend,w1_initial,w1_final,psnr_baseline,psnr_final\n\
         {},{},{},{},{},{},{},{}\n",
        row.seed,
        row.task,
        row.seed,
        row.n_stages,
        row.backend,
        fmt_f64(row.w1_initial),
        fmt_f64(row.w1_final),
        fmt_opt(row.psnr_baseline),
        fmt_opt(row.psnr_final),
    );
    write_atomic(path, &out)
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f =
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use w1ray_core::measures::make_empirical;

    #[test]
    fn points_roundtrip_bitexact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = make_empirical(
            vec![vec![0.1, -2.5e-7], vec![core::f64::consts::PI, 4.0]],
            Some(vec![0.25, 0.75]),
        )
        .unwrap();
        write_points(&path, &m, None).unwrap();
        let (back, shape) = read_points(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(shape, None);
    }

    #[test]
    fn points_shape_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.csv");
        let m = make_empirical(vec![vec![0.5; 4]], None).unwrap();
        write_points(&path, &m, Some((2, 2))).unwrap();
        let (_, shape) = read_points(&path).unwrap();
        assert_eq!(shape, Some((2, 2)));
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# w1ray points v1 dim=4 shape=2x2\n"));
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        assert!(read_points(&path).is_err());
    }

    #[test]
    fn rejects_wrong_dim_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "# w1ray points v1 dim=2\nw,x1,x2\n0.5,1.0\n").unwrap();
        assert!(read_points(&path).is_err());
    }

    #[test]
    fn duals_roundtrip_targets() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let duals = DualSolution {
            source_values: vec![1.5, 2.5],
            target_values: vec![0.0, 0.125, 7.25],
            w1: 3.0,
        };
        write_duals(&path, &duals).unwrap();
        assert_eq!(read_target_duals(&path).unwrap(), vec![0.0, 0.125, 7.25]);
    }

    #[test]
    fn rewriting_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let m = make_empirical(vec![vec![0.123456789012345, 1.0]], None).unwrap();
        write_points(&a, &m, None).unwrap();
        write_points(&b, &m, None).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
