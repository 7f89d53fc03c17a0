//! Independent matching oracle for small uniform instances.
//!
//! For `n <= 8` the cost is minimized by exhaustive permutation search; for
//! `9 <= n <= 12` by the classical O(n^3) assignment algorithm with row/column
//! potentials. Neither path shares anything with the transportation simplex,
//! which is the point: this is the cross-check.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::measures::EmpiricalMeasure;
use crate::{Error, Result};

const MAX_ORACLE_N: usize = 12;
const BRUTE_FORCE_N: usize = 8;

/// Exact `W1` of two uniform measures with equal atom counts `n <= 12`,
/// computed as min-cost perfect matching cost divided by `n`.
pub fn hungarian_oracle(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), got: nu.dim() });
    }
    let n = mu.len();
    if nu.len() != n {
        return Err(Error::OracleContract("atom counts must be equal"));
    }
    if n > MAX_ORACLE_N {
        return Err(Error::OracleContract("oracle limited to n <= 12"));
    }
    let uniform = 1.0 / n as f64;
    let is_uniform = |w: &[f64]| w.iter().all(|&x| math::abs(x - uniform) <= 1e-12);
    if !is_uniform(mu.weights()) || !is_uniform(nu.weights()) {
        return Err(Error::OracleContract("weights must be uniform on both sides"));
    }

    let mut cost = vec![0.0; n * n];
    for (i, x) in mu.points().iter().enumerate() {
        for (j, y) in nu.points().iter().enumerate() {
            cost[i * n + j] = math::dist(x, y);
        }
    }
    let total = if n <= BRUTE_FORCE_N {
        brute_force_matching(&cost, n)
    } else {
        assignment_matching(&cost, n)
    };
    Ok(total / n as f64)
}

/// Minimum over all n! assignments, by in-place permutation enumeration.
fn brute_force_matching(cost: &[f64], n: usize) -> f64 {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, cost, n, &mut best);
    best
}

fn permute(perm: &mut [usize], k: usize, cost: &[f64], n: usize, best: &mut f64) {
    if k == n {
        let total: f64 = (0..n).map(|i| cost[i * n + perm[i]]).sum();
        if total < *best {
            *best = total;
        }
        return;
    }
    for i in k..n {
        perm.swap(k, i);
        permute(perm, k + 1, cost, n, best);
        perm.swap(k, i);
    }
}

/// O(n^3) assignment with potentials (rows and columns 1-indexed; column 0
/// is the virtual unmatched column).
fn assignment_matching(cost: &[f64], n: usize) -> f64 {
    let at = |i: usize, j: usize| cost[(i - 1) * n + (j - 1)];
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched = vec![0usize; n + 1]; // matched[j] = row assigned to column j
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = at(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| at(matched[j], j)).sum()
}
