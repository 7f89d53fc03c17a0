//! Empirical probability measures, synthetic generators and corruption models.
//!
//! An [`EmpiricalMeasure`] is a weighted point cloud in `R^d`. The working
//! domain `Omega` is never given explicitly by callers; it is taken to be the
//! axis-aligned bounding box of all relevant atoms, expanded by a margin
//! (10% per side by default) — see [`BoundingBox`].

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;
use crate::{Error, Result};

/// Weight-normalization tolerance enforced by constructors.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Default per-side expansion factor for [`BoundingBox::from_point_sets`].
pub const OMEGA_MARGIN: f64 = 0.1;

/// A weighted point cloud representing a probability measure on `R^d`.
///
/// Invariants (enforced at construction): at least one atom, all points of
/// equal dimension, nonnegative weights summing to 1 within [`WEIGHT_TOL`].
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    dim: usize,
}

impl EmpiricalMeasure {
    /// Builds a measure from points and optional weights (uniform when
    /// absent). Weights are normalized to sum to 1.
    pub fn new(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter("points must have dim >= 1"));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
        }
        let mut weights = match weights {
            Some(w) => {
                if w.len() != points.len() {
                    return Err(Error::LengthMismatch { expected: points.len(), got: w.len() });
                }
                for (i, &wi) in w.iter().enumerate() {
                    if wi < 0.0 || !wi.is_finite() {
                        return Err(Error::NegativeWeight { index: i, weight: wi });
                    }
                }
                w
            }
            None => vec![1.0; points.len()],
        };
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroTotalWeight);
        }
        for w in &mut weights {
            *w /= total;
        }
        // One renormalization pass is enough for the 1e-12 budget, but the
        // residual is folded into the largest weight so the sum is exact.
        let sum: f64 = weights.iter().sum();
        let resid = 1.0 - sum;
        if resid != 0.0 {
            let imax = (0..weights.len())
                .max_by(|&a, &b| weights[a].total_cmp(&weights[b]))
                .unwrap();
            weights[imax] += resid;
        }
        Ok(Self { points, weights, dim })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least one atom, by construction
    }

    /// i.i.d. draws from the categorical distribution over atoms.
    /// Deterministic given the seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::InvalidParameter("sample count must be >= 1"));
        }
        let mut cdf = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for &w in &self.weights {
            acc += w;
            cdf.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.gen_range(0.0..1.0);
            let idx = cdf.partition_point(|&c| c <= u).min(self.len() - 1);
            out.push(self.points[idx].clone());
        }
        Ok(out)
    }

    /// Applies a corruption model to every atom independently, keeping the
    /// weights. Deterministic given the spec's seed.
    pub fn corrupt(&self, spec: &CorruptionSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let points = match spec.kind {
            CorruptionKind::GaussianNoise { sigma } => self
                .points
                .iter()
                .map(|p| p.iter().map(|&x| x + sigma * math::standard_normal(&mut rng)).collect())
                .collect(),
            CorruptionKind::GaussianBlur { size, sigma } => {
                let side = int_sqrt(self.dim).ok_or(Error::NonSquareDim(self.dim))?;
                let kernel = gaussian_kernel(size, sigma);
                self.points.iter().map(|p| blur_image(p, side, size, &kernel)).collect()
            }
        };
        Ok(Self { points, weights: self.weights.clone(), dim: self.dim })
    }

    /// Bounding box of this measure's atoms with the default margin.
    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::from_point_sets(&[&self.points], OMEGA_MARGIN)
    }
}

/// Convenience constructor matching the measure contract directly.
pub fn make_empirical(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<EmpiricalMeasure> {
    EmpiricalMeasure::new(points, weights)
}

/// Axis-aligned box standing in for the compact domain `Omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    /// Smallest box containing every point of every set, expanded by
    /// `margin` times the per-axis extent on each side.
    pub fn from_point_sets(sets: &[&[Vec<f64>]], margin: f64) -> Self {
        let dim = sets
            .iter()
            .flat_map(|s| s.iter())
            .next()
            .map(|p| p.len())
            .unwrap_or(0);
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for set in sets {
            for p in set.iter() {
                for k in 0..dim {
                    if p[k] < lo[k] {
                        lo[k] = p[k];
                    }
                    if p[k] > hi[k] {
                        hi[k] = p[k];
                    }
                }
            }
        }
        for k in 0..dim {
            let extent = hi[k] - lo[k];
            lo[k] -= margin * extent;
            hi[k] += margin * extent;
        }
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Diameter `d0 = |hi - lo|`, the diagonal length.
    pub fn diameter(&self) -> f64 {
        math::dist(&self.hi, &self.lo)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&x, (&l, &h))| x >= l && x <= h)
    }

    /// Uniform draw from the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| if h > l { rng.gen_range(l..h) } else { l })
            .collect()
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        let lo = self.lo.iter().zip(&other.lo).map(|(&a, &b)| a.min(b)).collect();
        let hi = self.hi.iter().zip(&other.hi).map(|(&a, &b)| a.max(b)).collect();
        BoundingBox { lo, hi }
    }
}

/// Corruption model applied to every atom of a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorruptionKind {
    /// i.i.d. additive Gaussian noise per coordinate, std `sigma`.
    /// Values are not clipped afterwards, so the additive model stays exact.
    GaussianNoise { sigma: f64 },
    /// `size x size` Gaussian blur with std `sigma`, replicate padding.
    /// Atoms must be flattened square grayscale images (row-major).
    GaussianBlur { size: usize, sigma: f64 },
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            CorruptionKind::GaussianNoise { sigma } => {
                if !(sigma > 0.0) {
                    return Err(Error::InvalidParameter("noise sigma must be > 0"));
                }
            }
            CorruptionKind::GaussianBlur { size, sigma } => {
                if !(sigma > 0.0) {
                    return Err(Error::InvalidParameter("blur sigma must be > 0"));
                }
                if size < 3 || size % 2 == 0 {
                    return Err(Error::InvalidParameter("blur size must be odd and >= 3"));
                }
            }
        }
        Ok(())
    }
}

fn int_sqrt(d: usize) -> Option<usize> {
    let s = math::round(math::sqrt(d as f64)) as usize;
    (s * s == d).then_some(s)
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as isize;
    let mut k = Vec::with_capacity(size * size);
    let mut total = 0.0;
    for i in -half..=half {
        for j in -half..=half {
            let v = math::exp(-((i * i + j * j) as f64) / (2.0 * sigma * sigma));
            k.push(v);
            total += v;
        }
    }
    for v in &mut k {
        *v /= total;
    }
    k
}

fn blur_image(img: &[f64], side: usize, ksize: usize, kernel: &[f64]) -> Vec<f64> {
    let half = (ksize / 2) as isize;
    let s = side as isize;
    let mut out = Vec::with_capacity(img.len());
    for r in 0..s {
        for c in 0..s {
            let mut acc = 0.0;
            let mut ki = 0;
            for dr in -half..=half {
                for dc in -half..=half {
                    // replicate padding
                    let rr = (r + dr).clamp(0, s - 1) as usize;
                    let cc = (c + dc).clamp(0, s - 1) as usize;
                    acc += kernel[ki] * img[rr * side + cc];
                    ki += 1;
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Peak signal-to-noise ratio in dB for `[0,1]`-valued vectors (peak 1).
/// Returns `f64::INFINITY` when the inputs are bitwise equal.
pub fn psnr(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
    }
    if x.is_empty() {
        return Err(Error::InvalidParameter("psnr needs at least one coordinate"));
    }
    let mut mse = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        mse += d * d;
    }
    mse /= x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * math::log10(mse))
}

/// Named synthetic dataset generators. All are deterministic in
/// `(params, seed)` and place atoms inside a small fixed bounding box.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthSpec {
    /// Two interleaved half circles with additive Gaussian jitter.
    TwoMoons { n: usize, noise: f64 },
    /// `n` atoms equally spaced on a circle of radius `radius` centered at
    /// the origin.
    Ring { n: usize, radius: f64 },
    /// `rows x cols` grid of atoms spanning the unit square.
    AtomGrid { rows: usize, cols: usize },
    /// `count` grayscale `side x side` toy images in `[0,1]^(side^2)`:
    /// stripes, checkerboards, blobs and linear ramps.
    ToyImages { count: usize, side: usize },
}

/// Builds a synthetic dataset with uniform weights.
pub fn synth_dataset(spec: &SynthSpec, seed: u64) -> Result<EmpiricalMeasure> {
    let points = match *spec {
        SynthSpec::TwoMoons { n, noise } => {
            if n < 1 {
                return Err(Error::InvalidParameter("two_moons needs n >= 1"));
            }
            if noise < 0.0 {
                return Err(Error::InvalidParameter("two_moons noise must be >= 0"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n_outer = n / 2 + n % 2;
            let n_inner = n / 2;
            let mut pts = Vec::with_capacity(n);
            for i in 0..n_outer {
                let t = core::f64::consts::PI * i as f64 / n_outer.max(1) as f64;
                pts.push(vec![math::cos(t), math::sin(t)]);
            }
            for i in 0..n_inner {
                let t = core::f64::consts::PI * i as f64 / n_inner.max(1) as f64;
                pts.push(vec![1.0 - math::cos(t), 0.5 - math::sin(t)]);
            }
            for p in &mut pts {
                for x in p.iter_mut() {
                    *x += noise * math::standard_normal(&mut rng);
                }
            }
            pts
        }
        SynthSpec::Ring { n, radius } => {
            if n < 1 {
                return Err(Error::InvalidParameter("ring needs n >= 1"));
            }
            if !(radius > 0.0) {
                return Err(Error::InvalidParameter("ring radius must be > 0"));
            }
            (0..n)
                .map(|i| {
                    let t = 2.0 * core::f64::consts::PI * i as f64 / n as f64;
                    vec![radius * math::cos(t), radius * math::sin(t)]
                })
                .collect()
        }
        SynthSpec::AtomGrid { rows, cols } => {
            if rows < 1 || cols < 1 {
                return Err(Error::InvalidParameter("atom_grid needs rows, cols >= 1"));
            }
            let mut pts = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for c in 0..cols {
                    let x = if cols > 1 { c as f64 / (cols - 1) as f64 } else { 0.5 };
                    let y = if rows > 1 { r as f64 / (rows - 1) as f64 } else { 0.5 };
                    pts.push(vec![x, y]);
                }
            }
            pts
        }
        SynthSpec::ToyImages { count, side } => {
            if count < 1 || side < 2 {
                return Err(Error::InvalidParameter("toy_images needs count >= 1, side >= 2"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| toy_image(side, &mut rng)).collect()
        }
    };
    EmpiricalMeasure::new(points, None)
}

fn toy_image<R: Rng + ?Sized>(side: usize, rng: &mut R) -> Vec<f64> {
    let family = rng.gen_range(0u32..4);
    let s = side as f64;
    let mut img = Vec::with_capacity(side * side);
    match family {
        0 => {
            // stripes: random orientation, period and phase
            let horizontal = rng.gen::<bool>();
            let period = rng.gen_range(2..=side.max(3));
            let phase = rng.gen_range(0..period);
            let (hi, lo) = (rng.gen_range(0.7..1.0), rng.gen_range(0.0..0.3));
            for r in 0..side {
                for c in 0..side {
                    let k = if horizontal { r } else { c };
                    img.push(if (k + phase) % period < period / 2 { hi } else { lo });
                }
            }
        }
        1 => {
            // checkerboard
            let cell = rng.gen_range(1..=(side / 2).max(1));
            let (hi, lo) = (rng.gen_range(0.7..1.0), rng.gen_range(0.0..0.3));
            for r in 0..side {
                for c in 0..side {
                    img.push(if (r / cell + c / cell) % 2 == 0 { hi } else { lo });
                }
            }
        }
        2 => {
            // gaussian blob
            let cx = rng.gen_range(0.2 * s..0.8 * s);
            let cy = rng.gen_range(0.2 * s..0.8 * s);
            let w = rng.gen_range(0.1 * s..0.35 * s);
            for r in 0..side {
                for c in 0..side {
                    let d2 = (r as f64 - cy) * (r as f64 - cy) + (c as f64 - cx) * (c as f64 - cx);
                    img.push(math::exp(-d2 / (2.0 * w * w)));
                }
            }
        }
        _ => {
            // linear ramp with random direction
            let ang = rng.gen_range(0.0..core::f64::consts::TAU);
            let (dx, dy) = (math::cos(ang), math::sin(ang));
            for r in 0..side {
                for c in 0..side {
                    let t = (c as f64 * dx + r as f64 * dy) / (s * core::f64::consts::SQRT_2);
                    img.push((0.5 + t).clamp(0.0, 1.0));
                }
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;

    #[test]
    fn uniform_default_weights() {
        let m = make_empirical(vec![vec![0.0, 0.0], vec![1.0, 0.0]], None).unwrap();
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn weights_normalize() {
        let m = make_empirical(vec![vec![3.0, 4.0]], Some(vec![2.0])).unwrap();
        assert_eq!(m.weights(), &[1.0]);
    }

    #[test]
    fn mixed_dims_rejected() {
        let err = make_empirical(vec![vec![0.0, 0.0], vec![1.0, 0.0, 2.0]], None).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, got: 3 });
    }

    #[test]
    fn negative_weight_rejected() {
        let err =
            make_empirical(vec![vec![0.0], vec![1.0]], Some(vec![1.0, -0.5])).unwrap_err();
        assert!(matches!(err, Error::NegativeWeight { index: 1, .. }));
    }

    #[test]
    fn zero_total_weight_rejected() {
        let err = make_empirical(vec![vec![0.0]], Some(vec![0.0])).unwrap_err();
        assert_eq!(err, Error::ZeroTotalWeight);
    }

    #[test]
    fn weights_sum_to_one_exactly() {
        let w: Vec<f64> = (1..=17).map(|i| i as f64 * 0.137).collect();
        let pts: Vec<Vec<f64>> = (0..17).map(|i| vec![i as f64]).collect();
        let m = make_empirical(pts, Some(w)).unwrap();
        let total: f64 = m.weights().iter().sum();
        assert!((total - 1.0).abs() <= WEIGHT_TOL);
    }

    #[test]
    fn sample_degenerate_support() {
        let m = make_empirical(vec![vec![7.0, -1.0]], None).unwrap();
        let s = m.sample(3, 1).unwrap();
        assert_eq!(s, vec![vec![7.0, -1.0]; 3]);
    }

    #[test]
    fn sample_never_draws_zero_weight_atom() {
        let m = make_empirical(vec![vec![0.0], vec![1.0]], Some(vec![1.0, 0.0])).unwrap();
        for p in m.sample(100, 5).unwrap() {
            assert_eq!(p, vec![0.0]);
        }
    }

    #[test]
    fn sample_law_of_large_numbers() {
        // Direct-count oracle: atom-0 frequency of a uniform two-atom measure.
        let m = make_empirical(vec![vec![0.0], vec![1.0]], None).unwrap();
        let draws = m.sample(100_000, 42).unwrap();
        let count0 = draws.iter().filter(|p| p[0] == 0.0).count();
        let freq = count0 as f64 / draws.len() as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn sample_deterministic() {
        let m = make_empirical(vec![vec![0.0], vec![1.0], vec![2.0]], None).unwrap();
        assert_eq!(m.sample(50, 9).unwrap(), m.sample(50, 9).unwrap());
    }

    #[test]
    fn corrupt_rejects_zero_sigma() {
        let m = make_empirical(vec![vec![0.5]], None).unwrap();
        let spec = CorruptionSpec { kind: CorruptionKind::GaussianNoise { sigma: 0.0 }, seed: 0 };
        assert!(m.corrupt(&spec).is_err());
    }

    #[test]
    fn corrupt_rejects_even_blur() {
        let spec = CorruptionSpec {
            kind: CorruptionKind::GaussianBlur { size: 4, sigma: 1.0 },
            seed: 0,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn blur_rejects_non_square_dim() {
        let m = make_empirical(vec![vec![0.0; 12]], None).unwrap();
        let spec = CorruptionSpec {
            kind: CorruptionKind::GaussianBlur { size: 3, sigma: 1.0 },
            seed: 0,
        };
        assert_eq!(m.corrupt(&spec).unwrap_err(), Error::NonSquareDim(12));
    }

    #[test]
    fn blur_preserves_constant_images() {
        // Replicate padding keeps a constant image exactly constant.
        let m = make_empirical(vec![vec![0.37; 64]], None).unwrap();
        let spec = CorruptionSpec {
            kind: CorruptionKind::GaussianBlur { size: 5, sigma: 2.0 },
            seed: 0,
        };
        let b = m.corrupt(&spec).unwrap();
        for v in &b.points()[0][..] {
            assert!((v - 0.37).abs() < 1e-12);
        }
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let x = vec![0.2, 0.4, 0.9];
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_constant_offset() {
        // offset 0.1 everywhere -> MSE 0.01 -> 20 dB
        let x = vec![0.3; 10];
        let y = vec![0.4; 10];
        assert!((psnr(&x, &y).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_dimension_mismatch() {
        assert!(psnr(&[0.0], &[0.0, 1.0]).is_err());
    }

    // Noise PSNR law: mean PSNR of sigma-corrupted [0,1] images is
    // -20 log10(sigma) within 0.1 dB. These are the Table-1 noisy baselines.
    fn mean_noisy_psnr(sigma: f64, d: usize, trials: usize, seed: u64) -> f64 {
        let clean = vec![vec![0.5; d]];
        let m = make_empirical(clean, None).unwrap();
        let mut acc = 0.0;
        for t in 0..trials {
            let spec = CorruptionSpec {
                kind: CorruptionKind::GaussianNoise { sigma },
                seed: seed + t as u64,
            };
            let noisy = m.corrupt(&spec).unwrap();
            acc += psnr(&noisy.points()[0], &m.points()[0]).unwrap();
        }
        acc / trials as f64
    }

    #[test]
    fn noise_psnr_law_sigma_01() {
        let p = mean_noisy_psnr(0.1, 1024, 120, 7);
        assert!((p - 20.0).abs() < 0.1, "psnr {p}");
    }

    #[test]
    fn noise_psnr_law_sigma_02() {
        let p = mean_noisy_psnr(0.2, 1024, 120, 8);
        assert!((p - 14.0).abs() < 0.1, "psnr {p}");
    }

    #[test]
    fn noise_psnr_high_dim_sigma_015() {
        // 128*128*3 coordinates, 200 trials, expected 16.48 dB.
        let p = mean_noisy_psnr(0.15, 128 * 128 * 3, 200, 9);
        assert!((p - 16.5).abs() < 0.1, "psnr {p}");
    }

    #[test]
    fn atom_grid_corners() {
        let m = synth_dataset(&SynthSpec::AtomGrid { rows: 2, cols: 2 }, 0).unwrap();
        assert_eq!(m.len(), 4);
        assert_eq!(m.weights(), &[0.25; 4]);
        assert!(m.points().contains(&vec![0.0, 0.0]));
        assert!(m.points().contains(&vec![1.0, 1.0]));
    }

    #[test]
    fn ring_chord_lengths() {
        let n = 8;
        let m = synth_dataset(&SynthSpec::Ring { n, radius: 1.0 }, 0).unwrap();
        let pts = m.points();
        for i in 0..n {
            for j in (i + 1)..n {
                let sep = (j - i).min(n - (j - i));
                let chord = 2.0 * math::sin(core::f64::consts::PI * sep as f64 / n as f64);
                assert!((math::dist(&pts[i], &pts[j]) - chord).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_moons_deterministic() {
        let a = synth_dataset(&SynthSpec::TwoMoons { n: 200, noise: 0.05 }, 3).unwrap();
        let b = synth_dataset(&SynthSpec::TwoMoons { n: 200, noise: 0.05 }, 3).unwrap();
        assert_eq!(a, b); // bitwise-identical points and weights
    }

    #[test]
    fn toy_images_in_unit_range() {
        let m = synth_dataset(&SynthSpec::ToyImages { count: 16, side: 8 }, 11).unwrap();
        assert_eq!(m.dim(), 64);
        for p in m.points() {
            for &v in p {
                assert!((0.0..=1.0).contains(&v), "value {v} out of range");
            }
        }
    }

    #[test]
    fn bounding_box_margin_and_diameter() {
        let m = make_empirical(vec![vec![0.0, 0.0], vec![2.0, 1.0]], None).unwrap();
        let bb = m.bounding_box();
        assert_eq!(bb.lo, vec![-0.2, -0.1]);
        assert_eq!(bb.hi, vec![2.2, 1.1]);
        assert!((bb.diameter() - math::dist(&bb.lo, &bb.hi)).abs() < 1e-15);
        assert!(bb.contains(&[1.0, 0.5]));
        assert!(!bb.contains(&[3.0, 0.5]));
    }
}
