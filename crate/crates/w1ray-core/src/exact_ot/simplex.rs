//! Transportation simplex on the dense bipartite transportation polytope.
//!
//! Nodes `0..m` are sources, `m..m+n` are sinks. The basis is a spanning tree
//! of `m + n - 1` cells; node potentials `(u, v)` satisfy `u_i - v_j = c_ij`
//! on basic cells and are recomputed from the tree every pivot, so no error
//! accumulates across iterations.
//!
//! Entering cells are priced blockwise (most negative reduced cost within a
//! rolling block). If the objective stalls on degenerate pivots for too long
//! the pricing switches permanently to Bland's rule (first negative cell in a
//! fixed scan order), which cannot cycle. Supplies are perturbed by
//! `1e-13 * min positive weight` before the solve and the perturbation is
//! removed afterwards by re-solving the tree flows against the original
//! marginals.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub(crate) struct SimplexSolution {
    /// Basic cells `(i, j, flow)` with flows for the *original* marginals.
    pub basic: Vec<(usize, usize, f64)>,
    pub source_potentials: Vec<f64>,
    pub sink_potentials: Vec<f64>,
    pub pivots: usize,
}

struct Arc {
    i: usize,
    j: usize,
    flow: f64,
}

pub(crate) struct Simplex<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64], // m x n row-major
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>, // node -> arc ids
    u: Vec<f64>,
    v: Vec<f64>,
    tol: f64,
    scan_from: usize,
    bland: bool,
    stall: usize,
}

const STALL_LIMIT: usize = 256;

impl<'a> Simplex<'a> {
    pub fn new(cost: &'a [f64], m: usize, n: usize) -> Self {
        debug_assert_eq!(cost.len(), m * n);
        let max_cost = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        Simplex {
            m,
            n,
            cost,
            arcs: Vec::with_capacity(m + n),
            adj: vec![Vec::new(); m + n],
            u: vec![0.0; m],
            v: vec![0.0; n],
            tol: 1e-12 * (1.0 + max_cost),
            scan_from: 0,
            bland: false,
            stall: 0,
        }
    }

    pub fn solve(mut self, supply: &[f64], demand: &[f64]) -> Result<SimplexSolution> {
        let (m, n) = (self.m, self.n);
        debug_assert_eq!(supply.len(), m);
        debug_assert_eq!(demand.len(), n);

        // Perturb supplies to break degeneracy; the extra mass drains into
        // the last demand so the problem stays balanced.
        let min_pos = supply
            .iter()
            .chain(demand)
            .filter(|&&w| w > 0.0)
            .fold(f64::INFINITY, |a, &w| a.min(w));
        let eps = 1e-13 * if min_pos.is_finite() { min_pos } else { 1.0 };
        let supply_p: Vec<f64> = supply.iter().map(|&s| s + eps).collect();
        let mut demand_p: Vec<f64> = demand.to_vec();
        demand_p[n - 1] += eps * m as f64;

        self.northwest_corner(&supply_p, &demand_p);

        let max_pivots = 10_000 + 100 * (m + n) + 2 * m * n;
        let mut pivots = 0;
        loop {
            self.compute_potentials();
            let entering = self.price();
            let Some((ei, ej)) = entering else { break };
            if pivots >= max_pivots {
                return Err(Error::SolverStalled { pivots });
            }
            self.pivot(ei, ej);
            pivots += 1;
        }

        self.restore_flows(supply, demand);
        self.compute_potentials();
        self.repair_strict_complementarity();

        let basic = self.arcs.iter().map(|a| (a.i, a.j, a.flow)).collect();
        Ok(SimplexSolution {
            basic,
            source_potentials: self.u,
            sink_potentials: self.v,
            pivots,
        })
    }

    /// Moves the duals to the relative interior of the optimal face.
    ///
    /// Tree potentials saturate `u_i - v_j = c_ij` on every basic cell, even
    /// zero-flow ones left over from degeneracy. Those phantom equalities put
    /// sources on artificial tie ridges of the induced potential. For each
    /// zero-flow basic arc, cutting the tree there splits the nodes into two
    /// components with zero net mass across the cut, so shifting the
    /// source-side component down by any feasible amount keeps the duals
    /// optimal; shifting by half the minimum cross-cut slack makes the
    /// phantom constraint strictly slack without tightening anything to zero.
    fn repair_strict_complementarity(&mut self) {
        let (m, n) = (self.m, self.n);
        let flow_tol = 1e-12;
        let degenerate: Vec<usize> = (0..self.arcs.len())
            .filter(|&a| self.arcs[a].flow.abs() <= flow_tol)
            .collect();
        let cost_scale = 1.0 + self.cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        for &aid in &degenerate {
            let (i0, j0) = (self.arcs[aid].i, self.arcs[aid].j);
            // Component containing the arc's source endpoint, arc removed.
            let mut in_a = vec![false; m + n];
            let mut stack = vec![i0];
            in_a[i0] = true;
            while let Some(nd) = stack.pop() {
                for &other_arc in &self.adj[nd] {
                    if other_arc == aid {
                        continue;
                    }
                    let arc = &self.arcs[other_arc];
                    let other = if nd == arc.i { m + arc.j } else { arc.i };
                    if !in_a[other] {
                        in_a[other] = true;
                        stack.push(other);
                    }
                }
            }
            debug_assert!(!in_a[m + j0]);
            // Constraints that tighten: sources outside A against sinks in A.
            let mut min_slack = cost_scale;
            for i in 0..m {
                if in_a[i] {
                    continue;
                }
                for j in 0..n {
                    if !in_a[m + j] {
                        continue;
                    }
                    let slack = self.cost[i * n + j] - self.u[i] + self.v[j];
                    if slack < min_slack {
                        min_slack = slack;
                    }
                }
            }
            let delta = 0.5 * min_slack;
            if delta <= 0.0 {
                continue; // cannot separate this cut; every optimal dual ties
            }
            for (nd, &inside) in in_a.iter().enumerate() {
                if inside {
                    if nd < m {
                        self.u[nd] -= delta;
                    } else {
                        self.v[nd - m] -= delta;
                    }
                }
            }
        }
    }

    fn push_arc(&mut self, i: usize, j: usize, flow: f64) {
        let id = self.arcs.len();
        self.arcs.push(Arc { i, j, flow });
        self.adj[i].push(id);
        self.adj[self.m + j].push(id);
    }

    fn northwest_corner(&mut self, supply: &[f64], demand: &[f64]) {
        let (m, n) = (self.m, self.n);
        let (mut i, mut j) = (0, 0);
        let mut rs = supply[0];
        let mut rd = demand[0];
        loop {
            let q = rs.min(rd).max(0.0);
            self.push_arc(i, j, q);
            if i == m - 1 && j == n - 1 {
                break;
            }
            if rs <= rd && i < m - 1 {
                rd -= rs;
                i += 1;
                rs = supply[i];
            } else if j < n - 1 {
                rs -= rd;
                j += 1;
                rd = demand[j];
            } else {
                rd -= rs;
                i += 1;
                rs = supply[i];
            }
        }
        debug_assert_eq!(self.arcs.len(), m + n - 1);
    }

    /// Tree potentials from the basic-cell equalities `u_i - v_j = c_ij`.
    fn compute_potentials(&mut self) {
        let (m, n) = (self.m, self.n);
        let mut known = vec![false; m + n];
        let mut stack = Vec::with_capacity(m + n);
        self.u[0] = 0.0;
        known[0] = true;
        stack.push(0usize);
        while let Some(nd) = stack.pop() {
            for &aid in &self.adj[nd] {
                let arc = &self.arcs[aid];
                let (si, tj) = (arc.i, m + arc.j);
                let other = if nd == si { tj } else { si };
                if !known[other] {
                    let c = self.cost[arc.i * n + arc.j];
                    if other == tj {
                        self.v[arc.j] = self.u[arc.i] - c;
                    } else {
                        self.u[arc.i] = self.v[arc.j] + c;
                    }
                    known[other] = true;
                    stack.push(other);
                }
            }
        }
        debug_assert!(known.iter().all(|&k| k));
    }

    #[inline]
    fn reduced_cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j] - self.u[i] + self.v[j]
    }

    /// Entering cell, or `None` at optimality.
    fn price(&mut self) -> Option<(usize, usize)> {
        let total = self.m * self.n;
        if self.bland {
            for cell in 0..total {
                let (i, j) = (cell / self.n, cell % self.n);
                if self.reduced_cost(i, j) < -self.tol {
                    return Some((i, j));
                }
            }
            return None;
        }
        let block = 64.max(crate::math::sqrt(total as f64) as usize);
        let mut scanned = 0;
        let mut pos = self.scan_from;
        while scanned < total {
            let mut best: Option<(f64, usize, usize)> = None;
            let take = block.min(total - scanned);
            for _ in 0..take {
                let (i, j) = (pos / self.n, pos % self.n);
                let rc = self.reduced_cost(i, j);
                if rc < -self.tol && best.is_none_or(|(b, _, _)| rc < b) {
                    best = Some((rc, i, j));
                }
                pos += 1;
                if pos == total {
                    pos = 0;
                }
            }
            scanned += take;
            if let Some((_, i, j)) = best {
                self.scan_from = pos;
                return Some((i, j));
            }
        }
        None
    }

    fn pivot(&mut self, ei: usize, ej: usize) {
        let m = self.m;
        // Tree path from source node `ei` to sink node `m + ej`.
        let start = ei;
        let goal = m + ej;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.adj.len()]; // (node, arc)
        let mut visited = vec![false; self.adj.len()];
        let mut queue = alloc::collections::VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(nd) = queue.pop_front() {
            if nd == goal {
                break;
            }
            for &aid in &self.adj[nd] {
                let arc = &self.arcs[aid];
                let other = if nd == arc.i { m + arc.j } else { arc.i };
                if !visited[other] {
                    visited[other] = true;
                    parent[other] = Some((nd, aid));
                    queue.push_back(other);
                }
            }
        }
        debug_assert!(visited[goal]);

        let mut path_rev = Vec::new(); // arc ids from goal back to start
        let mut nd = goal;
        while nd != start {
            let (prev, aid) = parent[nd].expect("tree path");
            path_rev.push(aid);
            nd = prev;
        }
        let path: Vec<usize> = path_rev.into_iter().rev().collect();

        // Cells alternate +/- around the cycle; the entering cell is +, so
        // path arcs at even distance from the entering source are -. The
        // leaving arc is the minimum-flow minus arc, lowest arc id on ties.
        let mut theta = f64::INFINITY;
        let mut leaving: Option<usize> = None;
        for (l, &aid) in path.iter().enumerate() {
            if l % 2 == 0 {
                let f = self.arcs[aid].flow;
                let take = match leaving {
                    None => true,
                    Some(cur) => f < theta || (f == theta && aid < cur),
                };
                if take {
                    theta = f;
                    leaving = Some(aid);
                }
            }
        }
        let leaving = leaving.expect("cycle has a leaving arc");
        let theta = theta.max(0.0);

        for (l, &aid) in path.iter().enumerate() {
            if l % 2 == 0 {
                self.arcs[aid].flow -= theta;
            } else {
                self.arcs[aid].flow += theta;
            }
        }

        if theta <= self.tol {
            self.stall += 1;
            if self.stall > STALL_LIMIT {
                self.bland = true;
            }
        } else {
            self.stall = 0;
        }

        // Replace the leaving arc with the entering one, in place.
        let (old_i, old_j) = (self.arcs[leaving].i, self.arcs[leaving].j);
        self.detach(leaving, old_i, m + old_j);
        self.arcs[leaving] = Arc { i: ei, j: ej, flow: theta };
        self.adj[ei].push(leaving);
        self.adj[m + ej].push(leaving);
    }

    fn detach(&mut self, aid: usize, node_a: usize, node_b: usize) {
        for nd in [node_a, node_b] {
            if let Some(pos) = self.adj[nd].iter().position(|&a| a == aid) {
                self.adj[nd].swap_remove(pos);
            }
        }
    }

    /// Re-solves the tree flows against the unperturbed marginals by leaf
    /// elimination. The optimal basis is unaffected (costs unchanged).
    fn restore_flows(&mut self, supply: &[f64], demand: &[f64]) {
        let (m, n) = (self.m, self.n);
        let mut residual: Vec<f64> = supply.iter().chain(demand).copied().collect();
        let mut degree: Vec<usize> = self.adj.iter().map(|a| a.len()).collect();
        let mut removed = vec![false; self.arcs.len()];
        let mut leaves: Vec<usize> =
            (0..m + n).filter(|&nd| degree[nd] == 1).collect();
        while let Some(nd) = leaves.pop() {
            let Some(&aid) = self.adj[nd].iter().find(|&&a| !removed[a]) else { continue };
            let arc = &mut self.arcs[aid];
            let other = if nd == arc.i { m + arc.j } else { arc.i };
            arc.flow = residual[nd];
            residual[other] -= residual[nd];
            residual[nd] = 0.0;
            removed[aid] = true;
            degree[nd] -= 1;
            degree[other] -= 1;
            if degree[other] == 1 {
                leaves.push(other);
            }
        }
    }
}
