//! Exact transportation simplex for balanced transport problems.
//!
//! Starts from the north-west corner basis and pivots on reduced costs
//! `c_ij - u_i - v_j`. Pricing picks the most negative reduced cost (ties to the
//! lowest cell index); after a run of degenerate pivots it switches to the
//! first negative reduced cost (Bland's rule) until progress resumes, which
//! rules out cycling.

use std::collections::VecDeque;

use crate::error::{Error, Result};

const REDUCED_COST_TOL: f64 = 1e-12;
const DEGENERATE_RUN: usize = 50;
const MAX_PIVOTS: usize = 10_000_000;

/// Feasibility tolerance on row and column sums.
pub const FEASIBILITY_TOL: f64 = 1e-10;
/// Tolerance on dual feasibility and complementary slackness.
pub const SLACKNESS_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct TransportProblem {
    pub supply: Vec<f64>,
    pub demand: Vec<f64>,
    /// Row-major `supply.len() x demand.len()` costs.
    pub cost: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportSolution {
    /// Basic cells `(row, col, flow)`; nonbasic cells carry no flow.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
    pub pivots: usize,
}

/// Optimality certificate of a solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub max_row_residual: f64,
    pub max_col_residual: f64,
    /// Most negative reduced cost over all cells (dual infeasibility when < 0).
    pub min_reduced_cost: f64,
    /// Largest |reduced cost| over cells carrying positive flow.
    pub max_slackness_violation: f64,
    /// Primal cost minus dual objective.
    pub duality_gap: f64,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.max_row_residual <= FEASIBILITY_TOL
            && self.max_col_residual <= FEASIBILITY_TOL
            && self.min_reduced_cost >= -SLACKNESS_TOL
            && self.max_slackness_violation <= SLACKNESS_TOL
            && self.duality_gap.abs() <= SLACKNESS_TOL
    }
}

struct Basis {
    rows: usize,
    cols: usize,
    flow: Vec<f64>,
    basic: Vec<bool>,
    row_adj: Vec<Vec<usize>>,
    col_adj: Vec<Vec<usize>>,
}

impl Basis {
    fn insert(&mut self, i: usize, j: usize, x: f64) {
        let c = i * self.cols + j;
        self.basic[c] = true;
        self.flow[c] = x;
        self.row_adj[i].push(j);
        self.col_adj[j].push(i);
    }

    fn remove(&mut self, i: usize, j: usize) {
        let c = i * self.cols + j;
        self.basic[c] = false;
        self.flow[c] = 0.0;
        self.row_adj[i].retain(|&x| x != j);
        self.col_adj[j].retain(|&x| x != i);
    }

    fn potentials(&self, cost: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![f64::NAN; self.rows];
        let mut v = vec![f64::NAN; self.cols];
        u[0] = 0.0;
        // node ids: rows 0..m, cols m..m+n
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            if node < self.rows {
                let i = node;
                for &j in &self.row_adj[i] {
                    if v[j].is_nan() {
                        v[j] = cost[i * self.cols + j] - u[i];
                        queue.push_back(self.rows + j);
                    }
                }
            } else {
                let j = node - self.rows;
                for &i in &self.col_adj[j] {
                    if u[i].is_nan() {
                        u[i] = cost[i * self.cols + j] - v[j];
                        queue.push_back(i);
                    }
                }
            }
        }
        (u, v)
    }

    /// Tree path from row `i` to column `j` as a list of basic cells.
    fn path(&self, i: usize, j: usize) -> Option<Vec<(usize, usize)>> {
        let total = self.rows + self.cols;
        let mut parent = vec![usize::MAX; total];
        parent[i] = i;
        let mut queue = VecDeque::from([i]);
        let goal = self.rows + j;
        while let Some(node) = queue.pop_front() {
            if node == goal {
                break;
            }
            let next: Vec<usize> = if node < self.rows {
                self.row_adj[node].iter().map(|&c| self.rows + c).collect()
            } else {
                self.col_adj[node - self.rows].clone()
            };
            for nb in next {
                if parent[nb] == usize::MAX {
                    parent[nb] = node;
                    queue.push_back(nb);
                }
            }
        }
        if parent[goal] == usize::MAX {
            return None;
        }
        let mut cells = Vec::new();
        let mut node = goal;
        while node != i {
            let p = parent[node];
            let (r, c) = if node < self.rows {
                (node, p - self.rows)
            } else {
                (p, node - self.rows)
            };
            cells.push((r, c));
            node = p;
        }
        // cells run from column j back to row i
        Some(cells)
    }
}

fn validate(problem: &TransportProblem) -> Result<()> {
    let (m, n) = (problem.supply.len(), problem.demand.len());
    if m == 0 || n == 0 {
        return Err(Error::Domain("transport problem needs supply and demand".into()));
    }
    if problem.cost.len() != m * n {
        return Err(Error::Dimension(format!(
            "cost has {} entries for a {m}x{n} problem",
            problem.cost.len()
        )));
    }
    let bad = |v: &f64| !(v.is_finite() && *v >= 0.0);
    if problem.supply.iter().any(bad) || problem.demand.iter().any(bad) {
        return Err(Error::Domain("masses must be finite and nonnegative".into()));
    }
    if problem.cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("costs must be finite".into()));
    }
    let (s, t): (f64, f64) = (problem.supply.iter().sum(), problem.demand.iter().sum());
    if s <= 0.0 || (s - t).abs() > 1e-9 * s.max(t) {
        return Err(Error::Domain(format!("unbalanced problem: supply {s}, demand {t}")));
    }
    Ok(())
}

/// Solve `min sum c_ij x_ij` subject to row sums `supply` and column sums `demand`.
pub fn solve(problem: &TransportProblem) -> Result<TransportSolution> {
    validate(problem)?;
    let (m, n) = (problem.supply.len(), problem.demand.len());
    let cost = &problem.cost;
    let s: f64 = problem.supply.iter().sum();
    let t: f64 = problem.demand.iter().sum();
    let mut ra = problem.supply.clone();
    let mut rb: Vec<f64> = problem.demand.iter().map(|b| b * (s / t)).collect();

    let mut basis = Basis {
        rows: m,
        cols: n,
        flow: vec![0.0; m * n],
        basic: vec![false; m * n],
        row_adj: vec![Vec::new(); m],
        col_adj: vec![Vec::new(); n],
    };
    // north-west corner: exactly m + n - 1 basic cells forming a spanning tree
    let (mut i, mut j) = (0, 0);
    loop {
        if i == m - 1 && j == n - 1 {
            basis.insert(i, j, ra[i].max(0.0));
            break;
        }
        let x = ra[i].min(rb[j]);
        basis.insert(i, j, x);
        ra[i] -= x;
        rb[j] -= x;
        if j == n - 1 || (i < m - 1 && ra[i] <= rb[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }

    let mut pivots = 0;
    let mut degenerate_run = 0;
    loop {
        let (u, v) = basis.potentials(cost);
        let bland = degenerate_run >= DEGENERATE_RUN;
        let mut entering: Option<(usize, f64)> = None;
        for c in 0..m * n {
            if basis.basic[c] {
                continue;
            }
            let r = cost[c] - u[c / n] - v[c % n];
            if r < -REDUCED_COST_TOL && entering.is_none_or(|(_, best)| r < best) {
                entering = Some((c, r));
                if bland {
                    break;
                }
            }
        }
        let Some((cell, _)) = entering else {
            return Ok(finish(problem, &basis, u, v, pivots));
        };
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::Internal("transportation simplex did not terminate".into()));
        }
        let (ei, ej) = (cell / n, cell % n);
        let path = basis
            .path(ei, ej)
            .ok_or_else(|| Error::Internal("basis is not a spanning tree".into()))?;
        // path[0] shares column ej with the entering cell and loses flow;
        // signs alternate from there
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (k, &(r, c)) in path.iter().enumerate() {
            if k % 2 == 0 {
                let idx = r * n + c;
                let x = basis.flow[idx];
                if x < theta || (x == theta && idx < leaving) {
                    theta = x;
                    leaving = idx;
                }
            }
        }
        let theta = theta.max(0.0);
        for (k, &(r, c)) in path.iter().enumerate() {
            let idx = r * n + c;
            if k % 2 == 0 {
                basis.flow[idx] = (basis.flow[idx] - theta).max(0.0);
            } else {
                basis.flow[idx] += theta;
            }
        }
        basis.remove(leaving / n, leaving % n);
        basis.insert(ei, ej, theta);
        degenerate_run = if theta > 0.0 { 0 } else { degenerate_run + 1 };
    }
}

fn finish(
    problem: &TransportProblem,
    basis: &Basis,
    u: Vec<f64>,
    v: Vec<f64>,
    pivots: usize,
) -> TransportSolution {
    let n = basis.cols;
    let flows: Vec<(usize, usize, f64)> = (0..basis.flow.len())
        .filter(|&c| basis.basic[c])
        .map(|c| (c / n, c % n, basis.flow[c]))
        .collect();
    let cost = flows.iter().map(|&(i, j, x)| x * problem.cost[i * n + j]).sum();
    TransportSolution {
        flows,
        cost,
        row_potentials: u,
        col_potentials: v,
        pivots,
    }
}

/// Check primal feasibility, dual feasibility and complementary slackness.
pub fn certify(problem: &TransportProblem, sol: &TransportSolution) -> Certificate {
    let (m, n) = (problem.supply.len(), problem.demand.len());
    let mut rows = vec![0.0; m];
    let mut cols = vec![0.0; n];
    let mut max_slackness_violation = 0.0f64;
    for &(i, j, x) in &sol.flows {
        rows[i] += x;
        cols[j] += x;
        if x > 0.0 {
            let r = problem.cost[i * n + j] - sol.row_potentials[i] - sol.col_potentials[j];
            max_slackness_violation = max_slackness_violation.max(r.abs());
        }
    }
    let max_row_residual = rows
        .iter()
        .zip(&problem.supply)
        .fold(0.0f64, |acc, (r, a)| acc.max((r - a).abs()));
    let max_col_residual = cols
        .iter()
        .zip(&problem.demand)
        .fold(0.0f64, |acc, (c, b)| acc.max((c - b).abs()));
    let mut min_reduced_cost = f64::INFINITY;
    for i in 0..m {
        for j in 0..n {
            let r = problem.cost[i * n + j] - sol.row_potentials[i] - sol.col_potentials[j];
            min_reduced_cost = min_reduced_cost.min(r);
        }
    }
    let dual: f64 = problem
        .supply
        .iter()
        .zip(&sol.row_potentials)
        .map(|(a, u)| a * u)
        .sum::<f64>()
        + problem
            .demand
            .iter()
            .zip(&sol.col_potentials)
            .map(|(b, v)| b * v)
            .sum::<f64>();
    Certificate {
        max_row_residual,
        max_col_residual,
        min_reduced_cost,
        max_slackness_violation,
        duality_gap: sol.cost - dual,
    }
}
