//! Scalar and small-vector numerics shared across the crate.
//!
//! Transcendental functions route through `std` when available and through
//! `libm` otherwise, so the crate builds without `std`. Euclidean distances
//! switch to compensated (Kahan) accumulation above [`KAHAN_DIM`] coordinates
//! to keep norms exact enough for high-dimensional image atoms.

use alloc::vec::Vec;
use rand::Rng;

/// Dimension above which squared-norm accumulation is compensated.
pub const KAHAN_DIM: usize = 64;

macro_rules! shim {
    ($($name:ident => $libm:ident),*) => {
        $(
            #[inline]
            pub fn $name(x: f64) -> f64 {
                #[cfg(feature = "std")]
                { x.$name() }
                #[cfg(not(feature = "std"))]
                { libm::$libm(x) }
            }
        )*
    };
}

shim!(sqrt => sqrt, exp => exp, ln => log, log10 => log10, sin => sin,
      cos => cos, floor => floor, round => round);

#[inline]
pub fn abs(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.abs()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::fabs(x)
    }
}

/// Euclidean distance |a - b| with compensated accumulation for long vectors.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() > KAHAN_DIM {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for (x, y) in a.iter().zip(b) {
            let d = x - y;
            let term = d * d - comp;
            let t = sum + term;
            comp = (t - sum) - term;
            sum = t;
        }
        sqrt(sum)
    } else {
        let mut sum = 0.0;
        for (x, y) in a.iter().zip(b) {
            let d = x - y;
            sum += d * d;
        }
        sqrt(sum)
    }
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in a {
        let term = x * x - comp;
        let t = sum + term;
        comp = (t - sum) - term;
        sum = t;
    }
    sqrt(sum)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// a + s * b, elementwise.
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// Standard normal draw via Box-Muller. Two uniforms per call keeps the
/// stream layout independent of any cached spare value, so output is a pure
/// function of the RNG position.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    sqrt(-2.0 * ln(u1)) * cos(2.0 * core::f64::consts::PI * u2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dist_pythagorean() {
        assert!((dist(&[0.0, 0.0], &[3.0, 4.0]) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn kahan_matches_plain_on_long_vectors() {
        let a: Vec<f64> = (0..200).map(|i| (i as f64) * 0.013).collect();
        let b: Vec<f64> = (0..200).map(|i| (i as f64) * 0.007 + 0.2).collect();
        let plain: f64 = sqrt(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum());
        assert!((dist(&a, &b) - plain).abs() < 1e-10);
    }

    #[test]
    fn normal_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = standard_normal(&mut rng);
            s1 += z;
            s2 += z * z;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}
