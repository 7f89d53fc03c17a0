//! Exact discrete Wasserstein-1 solver.
//!
//! [`solve_w1`] solves both the primal transportation problem and its dual on
//! a pair of empirical measures, returning the optimal plan and the optimal
//! dual potentials (the discrete restriction of a Kantorovich potential).
//! [`hungarian_oracle`] is an independent cross-check for small uniform
//! instances and shares no code with the simplex path.

mod hungarian;
mod simplex;

use alloc::vec::Vec;

use crate::math;
use crate::measures::EmpiricalMeasure;
use crate::{Error, Result};

pub use hungarian::hungarian_oracle;

/// One positive cell of a transport plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

/// An optimal coupling. `entries` lists only strictly positive cells; a basic
/// solution has at most `n_source + n_target - 1` of them.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub entries: Vec<PlanEntry>,
    pub cost: f64,
}

impl TransportPlan {
    /// Positive mass received by each target, and sent by each source.
    pub fn marginals(&self, n_source: usize, n_target: usize) -> (Vec<f64>, Vec<f64>) {
        let mut row = alloc::vec![0.0; n_source];
        let mut col = alloc::vec![0.0; n_target];
        for e in &self.entries {
            row[e.source] += e.mass;
            col[e.target] += e.mass;
        }
        (row, col)
    }

    /// Targets of source `i`, by decreasing mass.
    pub fn row(&self, source: usize) -> Vec<PlanEntry> {
        let mut r: Vec<PlanEntry> =
            self.entries.iter().copied().filter(|e| e.source == source).collect();
        r.sort_by(|a, b| b.mass.total_cmp(&a.mass));
        r
    }
}

/// Optimal dual values. Feasibility `u_i - v_j <= |x_i - y_j|`, strong
/// duality and complementary slackness all hold within solver tolerance;
/// [`validate_duals`] measures them. Gauge-fixed so that `min_j v_j = 0`.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub source_values: Vec<f64>,
    pub target_values: Vec<f64>,
    pub w1: f64,
}

/// Pivot count and other run facts, for reporting.
#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub pivots: usize,
}

/// Dense Euclidean cost matrix between two atom sets (row-major).
pub fn cost_matrix(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Vec<f64> {
    let mut cost = Vec::with_capacity(mu.len() * nu.len());
    for x in mu.points() {
        for y in nu.points() {
            cost.push(math::dist(x, y));
        }
    }
    cost
}

/// Solves `W1(mu, nu)` exactly. See [`solve_w1_detailed`] for run stats.
pub fn solve_w1(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<(TransportPlan, DualSolution)> {
    let (plan, duals, _) = solve_w1_detailed(mu, nu)?;
    Ok((plan, duals))
}

/// Solves the transportation LP and extracts plan, duals and stats.
///
/// Internally the smaller atom set is placed on the row side (the northwest
/// staircase degenerates badly on tall matrices); the orientation is purely
/// an implementation detail and the returned plan and duals always refer to
/// `(mu, nu)` order.
pub fn solve_w1_detailed(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
) -> Result<(TransportPlan, DualSolution, SolveStats)> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), got: nu.dim() });
    }
    let transpose = mu.len() > nu.len();
    let (a, b) = if transpose { (nu, mu) } else { (mu, nu) };
    let n_cols = b.len();
    let cost = cost_matrix(a, b);
    let sol = simplex::Simplex::new(&cost, a.len(), n_cols).solve(a.weights(), b.weights())?;

    // Arcs at or below the degeneracy threshold had their dual constraints
    // loosened by the strict-complementarity repair; they carry no mass.
    let mut entries = Vec::new();
    let mut total = 0.0;
    for &(i, j, flow) in &sol.basic {
        if flow > 1e-12 {
            let (source, target) = if transpose { (j, i) } else { (i, j) };
            entries.push(PlanEntry { source, target, mass: flow });
            total += flow * cost[i * n_cols + j];
        }
    }
    entries.sort_by_key(|e| (e.source, e.target));
    let plan = TransportPlan { entries, cost: total };

    // Map potentials back to (mu, nu) orientation: with sides swapped the
    // feasible system is u'_j - v'_i <= c_ij, so u_i = -v'_i, v_j = -u'_j.
    let (mut source_values, mut target_values): (Vec<f64>, Vec<f64>) = if transpose {
        (
            sol.sink_potentials.iter().map(|&v| -v).collect(),
            sol.source_potentials.iter().map(|&u| -u).collect(),
        )
    } else {
        (sol.source_potentials, sol.sink_potentials)
    };

    // Gauge fix: potentials are defined up to an additive constant.
    let shift = target_values.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    for u in &mut source_values {
        *u -= shift;
    }
    for v in &mut target_values {
        *v -= shift;
    }

    let duals = DualSolution { source_values, target_values, w1: total };
    Ok((plan, duals, SolveStats { pivots: sol.pivots }))
}

/// Numerical certificate for a (plan, duals) pair.
#[derive(Debug, Clone)]
pub struct DualityReport {
    /// `max_ij (u_i - v_j - |x_i - y_j|)`; feasible when <= tolerance.
    pub max_feasibility_violation: f64,
    /// `|primal cost - dual objective|`.
    pub duality_gap: f64,
    /// Worst `|u_i - v_j - |x_i - y_j||` over entries with mass > 1e-12.
    pub max_slackness_violation: f64,
    pub max_row_sum_error: f64,
    pub max_col_sum_error: f64,
    pub passes: bool,
}

pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const DUALITY_GAP_TOL: f64 = 1e-9;
pub const SLACKNESS_TOL: f64 = 1e-8;
pub const MARGINAL_TOL: f64 = 1e-9;

/// Recomputes every certificate quantity from scratch (distances included).
pub fn validate_duals(
    plan: &TransportPlan,
    duals: &DualSolution,
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
) -> DualityReport {
    let mut max_feas = f64::NEG_INFINITY;
    for (i, x) in mu.points().iter().enumerate() {
        for (j, y) in nu.points().iter().enumerate() {
            let slack = duals.source_values[i] - duals.target_values[j] - math::dist(x, y);
            if slack > max_feas {
                max_feas = slack;
            }
        }
    }

    let dual_obj: f64 = mu
        .weights()
        .iter()
        .zip(&duals.source_values)
        .map(|(&w, &u)| w * u)
        .sum::<f64>()
        - nu.weights().iter().zip(&duals.target_values).map(|(&w, &v)| w * v).sum::<f64>();

    let mut primal = 0.0;
    let mut max_slack = 0.0f64;
    for e in &plan.entries {
        let c = math::dist(&mu.points()[e.source], &nu.points()[e.target]);
        primal += e.mass * c;
        if e.mass > 1e-12 {
            let s =
                math::abs(duals.source_values[e.source] - duals.target_values[e.target] - c);
            if s > max_slack {
                max_slack = s;
            }
        }
    }
    let duality_gap = math::abs(primal - dual_obj);

    let (row, col) = plan.marginals(mu.len(), nu.len());
    let max_row_sum_error = row
        .iter()
        .zip(mu.weights())
        .fold(0.0f64, |a, (&r, &w)| a.max(math::abs(r - w)));
    let max_col_sum_error = col
        .iter()
        .zip(nu.weights())
        .fold(0.0f64, |a, (&c, &w)| a.max(math::abs(c - w)));

    let passes = max_feas <= FEASIBILITY_TOL
        && duality_gap <= DUALITY_GAP_TOL
        && max_slack <= SLACKNESS_TOL
        && max_row_sum_error <= MARGINAL_TOL
        && max_col_sum_error <= MARGINAL_TOL;

    DualityReport {
        max_feasibility_violation: max_feas,
        duality_gap,
        max_slackness_violation: max_slack,
        max_row_sum_error,
        max_col_sum_error,
        passes,
    }
}
