//! The 1-Lipschitz potential induced by discrete dual values, and its
//! transport-ray geometry.
//!
//! Given target atoms `y_j` with values `v_j`, the inf-convolution
//!
//! ```text
//! u0(x) = min_j ( v_j + |x - y_j| )
//! ```
//!
//! is 1-Lipschitz by construction, and when the `v_j` are optimal duals of a
//! semi-discrete instance it is a Kantorovich potential for that instance.
//! Everything here is closed-form: the gradient is the unit vector from the
//! active atom to `x`, the ray length `alpha` is the distance to the active
//! atom (extended through exactly-colinear atoms), and the upward length
//! `beta` solves a scalar triangle equation per atom.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::exact_ot::DualSolution;
use crate::math;
use crate::measures::{BoundingBox, EmpiricalMeasure, OMEGA_MARGIN};
use crate::{Error, Result};

/// Numerical knobs for gradient and ray computations. Defaults are tuned for
/// double precision with dimensions up to a few thousand.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Value gap below which two atoms are considered co-active.
    pub tie: f64,
    /// Angular tolerance for colinearity of co-active atoms.
    pub angular: f64,
    /// Absolute slack allowed in saturation identities.
    pub saturation: f64,
    /// Query points closer than this to an atom count as being *at* it.
    pub atom_radius: f64,
    /// Step for finite-difference fallbacks.
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tie: 1e-10,
            angular: 1e-10,
            saturation: 1e-9,
            atom_radius: 1e-12,
            fd_step: 1e-6,
        }
    }
}

/// Target atoms plus dual values defining the inf-convolution potential.
/// Immutable; evaluation and diagnostics are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePotential {
    atoms: Vec<Vec<f64>>,
    values: Vec<f64>,
    dim: usize,
    domain: BoundingBox,
}

impl DiscretePotential {
    /// Potential over the atoms' own bounding box (default margin).
    pub fn new(atoms: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        let domain = BoundingBox::from_point_sets(&[&atoms], OMEGA_MARGIN);
        Self::with_domain(atoms, values, domain)
    }

    /// Potential over an explicit compact domain (should cover the atoms).
    pub fn with_domain(
        atoms: Vec<Vec<f64>>,
        values: Vec<f64>,
        domain: BoundingBox,
    ) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let dim = atoms[0].len();
        for a in &atoms {
            if a.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: a.len() });
            }
        }
        if values.len() != atoms.len() {
            return Err(Error::LengthMismatch { expected: atoms.len(), got: values.len() });
        }
        if domain.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: domain.dim() });
        }
        Ok(Self { atoms, values, dim, domain })
    }

    /// The canonical potential of a solved instance: `nu`'s atoms carry the
    /// optimal target duals, and the domain covers both measures.
    pub fn from_duals(
        duals: &DualSolution,
        mu: &EmpiricalMeasure,
        nu: &EmpiricalMeasure,
    ) -> Result<Self> {
        let domain = BoundingBox::from_point_sets(&[mu.points(), nu.points()], OMEGA_MARGIN);
        Self::with_domain(nu.points().to_vec(), duals.target_values.clone(), domain)
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &BoundingBox {
        &self.domain
    }

    /// Same atoms with every value shifted by `c` (a gauge change; gradients
    /// and rays are unaffected).
    pub fn shifted(&self, c: f64) -> Self {
        let mut p = self.clone();
        for v in &mut p.values {
            *v += c;
        }
        p
    }

    /// `u0(x) = min_j (v_j + |x - y_j|)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.scan(x).value)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    fn scan(&self, x: &[f64]) -> Scan {
        let mut best = f64::INFINITY;
        let mut second = f64::INFINITY;
        let mut active = 0;
        let mut active_dist = 0.0;
        for (j, y) in self.atoms.iter().enumerate() {
            let d = math::dist(x, y);
            let val = self.values[j] + d;
            if val < best {
                second = best;
                best = val;
                active = j;
                active_dist = d;
            } else if val < second {
                second = val;
            }
        }
        Scan { value: best, second, active, active_dist }
    }

    pub(crate) fn tie_gap(&self, x: &[f64]) -> f64 {
        let s = self.scan(x);
        s.second - s.value
    }

    /// Gradient of the potential at `x`, with tie diagnostics.
    ///
    /// Several co-active atoms that all lie in the same direction from `x`
    /// (a ray passing through an atom) still give a well-defined gradient;
    /// only co-active atoms in genuinely different directions make the point
    /// nondifferentiable, in which case the reported direction is the
    /// tie-broken one (lowest co-active atom index).
    pub fn gradient(&self, x: &[f64]) -> Result<Gradient> {
        self.gradient_with(x, &Tolerances::default())
    }

    pub fn gradient_with(&self, x: &[f64], tol: &Tolerances) -> Result<Gradient> {
        self.check_dim(x)?;
        let scan = self.scan(x);
        if scan.active_dist <= tol.atom_radius {
            return Err(Error::AtAtom { atom: scan.active });
        }
        let gap = scan.second - scan.value;
        if gap > tol.tie {
            let y = &self.atoms[scan.active];
            let dir: Vec<f64> =
                x.iter().zip(y).map(|(&a, &b)| (a - b) / scan.active_dist).collect();
            return Ok(Gradient { direction: dir, active_atom: scan.active, tie: false, gap });
        }

        // Co-active set: atoms within the tie tolerance of the minimum.
        let mut coactive: Vec<(usize, f64)> = Vec::new(); // (index, dist)
        for (j, y) in self.atoms.iter().enumerate() {
            let d = math::dist(x, y);
            if self.values[j] + d <= scan.value + tol.tie {
                coactive.push((j, d));
            }
        }
        let &(near, near_dist) = coactive
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("co-active set contains the active atom");
        if near_dist <= tol.atom_radius {
            return Err(Error::AtAtom { atom: near });
        }
        let dir: Vec<f64> = {
            let y = &self.atoms[near];
            x.iter().zip(y).map(|(&a, &b)| (a - b) / near_dist).collect()
        };
        let mut colinear = true;
        for &(j, d) in &coactive {
            // perpendicular offset of atom j from the line through x along dir
            let w = math::sub(x, &self.atoms[j]);
            let along = math::dot(&w, &dir);
            let perp_sq = (math::dot(&w, &w) - along * along).max(0.0);
            if along <= 0.0 || math::sqrt(perp_sq) > tol.angular * d.max(1.0) {
                colinear = false;
                break;
            }
        }
        if colinear {
            Ok(Gradient { direction: dir, active_atom: near, tie: false, gap })
        } else {
            // Tie-broken: lowest co-active atom index.
            let &(lowest, low_dist) = coactive.iter().min_by_key(|&&(j, _)| j).unwrap();
            let y = &self.atoms[lowest];
            let dir = x.iter().zip(y).map(|(&a, &b)| (a - b) / low_dist).collect();
            Ok(Gradient { direction: dir, active_atom: lowest, tie: true, gap })
        }
    }

    /// Transport-ray data at a differentiable point.
    pub fn ray_info(&self, x: &[f64]) -> Result<RayInfo> {
        self.ray_info_with(x, &Tolerances::default())
    }

    pub fn ray_info_with(&self, x: &[f64], tol: &Tolerances) -> Result<RayInfo> {
        let grad = self.gradient_with(x, tol)?;
        if grad.tie {
            return Err(Error::Nondifferentiable { gap: grad.gap });
        }
        let u0x = self.evaluate(x)?;
        let g = &grad.direction;

        // alpha: distance to the active atom, extended through any atom that
        // is exactly colinear below x and keeps the saturation identity
        // v_k + |x - y_k| = u0(x).
        let mut alpha = math::dist(x, &self.atoms[grad.active_atom]);
        for (k, y) in self.atoms.iter().enumerate() {
            let w = math::sub(x, y);
            let s = math::norm(&w);
            if s <= alpha {
                continue;
            }
            let along = math::dot(&w, g);
            let perp_sq = (s * s - along * along).max(0.0);
            let colinear_below = along > 0.0 && math::sqrt(perp_sq) <= tol.angular * s.max(1.0);
            let ray_active = math::abs(self.values[k] + s - u0x) <= tol.saturation;
            if colinear_below && ray_active {
                alpha = s;
            }
        }

        // beta: first atom to undercut the upward saturation line u0(x) + t.
        // Atom k crosses where v_k + |x + t g - y_k| = u0(x) + t; squaring
        // cancels the quadratic term and leaves a linear equation in t.
        let d0 = self.domain.diameter();
        let mut beta = d0;
        for (k, y) in self.atoms.iter().enumerate() {
            let w = math::sub(x, y);
            let s2 = math::dot(&w, &w);
            let along = math::dot(&w, g);
            let cprime = u0x - self.values[k];
            let den = 2.0 * (along - cprime);
            if math::abs(den) < 1e-300 {
                continue;
            }
            let t = (cprime * cprime - s2) / den;
            if t > tol.atom_radius && cprime + t >= 0.0 && t < beta {
                beta = t;
            }
        }

        Ok(RayInfo {
            point: x.to_vec(),
            grad: grad.direction,
            alpha,
            beta,
            active_atom: grad.active_atom,
        })
    }
}

struct Scan {
    value: f64,
    second: f64,
    active: usize,
    active_dist: f64,
}

/// Unit gradient with tie diagnostics. `tie == true` means the potential is
/// nondifferentiable at the point and `direction` is the tie-broken choice.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub direction: Vec<f64>,
    pub active_atom: usize,
    pub tie: bool,
    /// Value gap to the second-best atom (0 at exact ties).
    pub gap: f64,
}

/// Per-point transport-ray geometry.
///
/// `alpha` is the distance along `-grad` to the lower ray end (saturation
/// `u0(x) - u0(x - t grad) = t` holds exactly on `[0, alpha]`); `beta` is the
/// distance along `+grad` to the upper end, capped at the domain diameter.
#[derive(Debug, Clone)]
pub struct RayInfo {
    pub point: Vec<f64>,
    pub grad: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub active_atom: usize,
}

/// `(|g| - 1)_+^2`, the one-sided gradient penalty.
pub fn gradient_penalty(grad: &[f64]) -> f64 {
    let excess = (math::norm(grad) - 1.0).max(0.0);
    excess * excess
}

/// Gradient penalty of the potential at `z`, falling back to central finite
/// differences at nondifferentiable points (where the difference quotient
/// norm cannot exceed 1, so the penalty is still 0 up to rounding).
pub fn grad_penalty(p: &DiscretePotential, z: &[f64]) -> Result<f64> {
    let tol = Tolerances::default();
    match p.gradient_with(z, &tol) {
        Ok(g) if !g.tie => Ok(gradient_penalty(&g.direction)),
        Ok(_) | Err(Error::AtAtom { .. }) => {
            let fd = fd_gradient(p, z, tol.fd_step)?;
            Ok(gradient_penalty(&fd))
        }
        Err(e) => Err(e),
    }
}

/// Central finite-difference gradient of the potential.
pub fn fd_gradient(p: &DiscretePotential, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut g = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        xp[k] = x[k] + h;
        let up = p.evaluate(&xp)?;
        xp[k] = x[k] - h;
        let um = p.evaluate(&xp)?;
        xp[k] = x[k];
        g.push((up - um) / (2.0 * h));
    }
    Ok(g)
}

/// The minibatch W1 estimator
/// `(1/M) sum_j u(x_j) - u(y_j) - lambda G(grad u(xt_j))` with
/// `xt_j = (1 - t_j) x_j + t_j y_j`.
pub fn w1_minibatch_estimate(
    p: &DiscretePotential,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    ts: &[f64],
    lambda: f64,
) -> Result<f64> {
    if ys.len() != xs.len() {
        return Err(Error::LengthMismatch { expected: xs.len(), got: ys.len() });
    }
    if ts.len() != xs.len() {
        return Err(Error::LengthMismatch { expected: xs.len(), got: ts.len() });
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter("lambda must be >= 0"));
    }
    if xs.is_empty() {
        return Err(Error::InvalidParameter("batch must be nonempty"));
    }
    let mut acc = 0.0;
    for ((x, y), &t) in xs.iter().zip(ys).zip(ts) {
        let mid: Vec<f64> = x.iter().zip(y).map(|(&a, &b)| (1.0 - t) * a + t * b).collect();
        acc += p.evaluate(x)? - p.evaluate(y)? - lambda * grad_penalty(p, &mid)?;
    }
    Ok(acc / xs.len() as f64)
}

/// Full-population (weighted) form of the estimator. The penalty interpolates
/// pair atom `i` of `mu` with atom `i mod |nu|` of `nu` at `t = 1/2`; for any
/// inf-convolution potential the penalty vanishes, which is exactly what
/// makes the estimate equal the dual objective.
pub fn w1_population_estimate(
    p: &DiscretePotential,
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    lambda: f64,
) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter("lambda must be >= 0"));
    }
    let mut acc = 0.0;
    for (i, (x, &w)) in mu.points().iter().zip(mu.weights()).enumerate() {
        let y = &nu.points()[i % nu.len()];
        let mid: Vec<f64> = x.iter().zip(y).map(|(&a, &b)| 0.5 * (a + b)).collect();
        acc += w * (p.evaluate(x)? - lambda * grad_penalty(p, &mid)?);
    }
    for (y, &w) in nu.points().iter().zip(nu.weights()) {
        acc -= w * p.evaluate(y)?;
    }
    Ok(acc)
}

/// Max deviation of the potential from its affine interpolant along the
/// transport ray through `x`, sampled at `n_points` parameters.
pub fn check_affine_on_ray(p: &DiscretePotential, x: &[f64], n_points: usize) -> Result<f64> {
    let info = p.ray_info(x)?;
    let u0x = p.evaluate(x)?;
    let mut worst = 0.0f64;
    let n = n_points.max(2);
    for i in 0..n {
        let t = -info.alpha + (info.alpha + info.beta) * i as f64 / (n - 1) as f64;
        let z = math::axpy(x, t, &info.grad);
        let dev = math::abs(p.evaluate(&z)? - (u0x + t));
        if dev > worst {
            worst = dev;
        }
    }
    Ok(worst)
}

/// Result of sampling the gradient-Lipschitz bound on `A_j`.
#[derive(Debug, Clone)]
pub struct AjReport {
    pub j: usize,
    /// `4j`, the bound being checked.
    pub bound: f64,
    /// Worst observed `|grad u(z) - grad u(z')| / |z - z'|` over member pairs.
    pub observed_ratio: Option<f64>,
    pub members: usize,
    pub attempts: usize,
    /// No members found within the sample budget.
    pub vacuous: bool,
    pub pass: bool,
}

/// Rejection-samples points of `A_j = { z : min(alpha(z), beta(z)) > 1/j }`
/// inside the domain and bounds the gradient's Lipschitz ratio over all
/// sampled pairs.
pub fn check_grad_lipschitz_aj(
    p: &DiscretePotential,
    j: usize,
    samples: usize,
    seed: u64,
) -> Result<AjReport> {
    if j == 0 {
        return Err(Error::InvalidParameter("j must be >= 1"));
    }
    let threshold = 1.0 / j as f64;
    let bound = 4.0 * j as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = samples.saturating_mul(60).max(1000);
    let mut members: Vec<(Vec<f64>, Vec<f64>)> = Vec::new(); // (point, grad)
    let mut attempts = 0;
    while members.len() < samples && attempts < budget {
        attempts += 1;
        let z = p.domain().sample(&mut rng);
        let Ok(info) = p.ray_info(&z) else { continue };
        if info.alpha.min(info.beta) > threshold {
            members.push((z, info.grad));
        }
    }
    if members.is_empty() {
        return Ok(AjReport {
            j,
            bound,
            observed_ratio: None,
            members: 0,
            attempts,
            vacuous: true,
            pass: true,
        });
    }
    let mut worst = 0.0f64;
    for a in 0..members.len() {
        for b in (a + 1)..members.len() {
            let dz = math::dist(&members[a].0, &members[b].0);
            if dz < 1e-12 {
                continue;
            }
            let ratio = math::dist(&members[a].1, &members[b].1) / dz;
            if ratio > worst {
                worst = ratio;
            }
        }
    }
    Ok(AjReport {
        j,
        bound,
        observed_ratio: Some(worst),
        members: members.len(),
        attempts,
        vacuous: false,
        pass: worst <= bound + 1e-6,
    })
}

/// Closest-approach audit of sampled transport rays: distinct rays that pass
/// within `crossing_tol` of each other at interior parameters must do so on
/// the tie set (rays may legitimately share endpoints).
#[derive(Debug, Clone)]
pub struct RayCrossingReport {
    pub rays: usize,
    pub pairs_checked: usize,
    pub interior_near_crossings: usize,
    /// Largest tie gap seen at an interior near-crossing.
    pub worst_gap: f64,
    pub pass: bool,
}

pub fn check_ray_crossings(
    p: &DiscretePotential,
    points: &[Vec<f64>],
    crossing_tol: f64,
    gap_tol: f64,
) -> Result<RayCrossingReport> {
    let mut rays = Vec::new();
    for x in points {
        match p.ray_info(x) {
            Ok(info) => {
                let lo = math::axpy(x, -info.alpha, &info.grad);
                let hi = math::axpy(x, info.beta, &info.grad);
                rays.push((lo, hi));
            }
            Err(Error::Nondifferentiable { .. }) | Err(Error::AtAtom { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let mut pairs = 0;
    let mut crossings = 0;
    let mut worst_gap = 0.0f64;
    for a in 0..rays.len() {
        for b in (a + 1)..rays.len() {
            pairs += 1;
            let (alo, ahi) = &rays[a];
            let (blo, bhi) = &rays[b];
            // Shared endpoints are allowed crossing points.
            if math::dist(alo, blo) <= crossing_tol || math::dist(ahi, bhi) <= crossing_tol {
                continue;
            }
            let (s, t, gap_dist) = segment_closest(alo, ahi, blo, bhi);
            if gap_dist > crossing_tol {
                continue;
            }
            let margin = 1e-6;
            if !(margin..=1.0 - margin).contains(&s) || !(margin..=1.0 - margin).contains(&t) {
                continue;
            }
            crossings += 1;
            let pa = lerp(alo, ahi, s);
            let pb = lerp(blo, bhi, t);
            let midpoint: Vec<f64> = pa.iter().zip(&pb).map(|(&x, &y)| 0.5 * (x + y)).collect();
            let gap = p.tie_gap(&midpoint);
            if gap > worst_gap {
                worst_gap = gap;
            }
        }
    }
    Ok(RayCrossingReport {
        rays: rays.len(),
        pairs_checked: pairs,
        interior_near_crossings: crossings,
        worst_gap,
        pass: worst_gap < gap_tol,
    })
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| x + t * (y - x)).collect()
}

/// Closest approach of segments `[p0,p1]` and `[q0,q1]`; returns the clamped
/// parameters and the distance.
fn segment_closest(p0: &[f64], p1: &[f64], q0: &[f64], q1: &[f64]) -> (f64, f64, f64) {
    let d1 = math::sub(p1, p0);
    let d2 = math::sub(q1, q0);
    let r = math::sub(p0, q0);
    let a = math::dot(&d1, &d1);
    let e = math::dot(&d2, &d2);
    let f = math::dot(&d2, &r);
    let (mut s, mut t);
    if a <= 1e-30 && e <= 1e-30 {
        s = 0.0;
        t = 0.0;
    } else if a <= 1e-30 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = math::dot(&d1, &r);
        if e <= 1e-30 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = math::dot(&d1, &d2);
            let denom = a * e - b * b;
            s = if denom > 1e-30 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    let pa = lerp(p0, p1, s);
    let pb = lerp(q0, q1, t);
    (s, t, math::dist(&pa, &pb))
}
