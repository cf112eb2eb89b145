//! Optimal transport between finitely supported measures under `c(x, y) = ½‖x − y‖²`,
//! and a primal oracle for the robust expected value over a transport budget.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::pwl::PwlConvex;

/// Default cap on `n·m` for [`dc_discrete`].
pub const DEFAULT_SIZE_CAP: usize = 1_000_000;

pub fn quadratic_cost(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(sq_dist(x, y) * 0.5)
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// A transport plan between two discrete measures, stored densely row by row.
#[derive(Debug, Clone)]
pub struct Coupling {
    rows: DiscreteMeasure,
    cols: DiscreteMeasure,
    plan: Vec<Vec<f64>>,
}

impl Coupling {
    pub fn rows(&self) -> &DiscreteMeasure {
        &self.rows
    }

    pub fn cols(&self) -> &DiscreteMeasure {
        &self.cols
    }

    pub fn plan(&self) -> &[Vec<f64>] {
        &self.plan
    }

    /// Nonzero entries as `(i, j, mass)` in row-major order.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, row) in self.plan.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                if m > 0.0 {
                    out.push((i, j, m));
                }
            }
        }
        out
    }

    pub fn cost(&self) -> f64 {
        let mut total = 0.0;
        for (i, row) in self.plan.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                if m > 0.0 {
                    total += m * 0.5 * sq_dist(&self.rows.atoms()[i], &self.cols.atoms()[j]);
                }
            }
        }
        total
    }

    /// Largest violation of the marginal and sign constraints.
    pub fn marginal_error(&self) -> f64 {
        let mut err = 0.0_f64;
        for (row, w) in self.plan.iter().zip(self.rows.weights()) {
            err = err.max((row.iter().sum::<f64>() - w).abs());
            err = err.max(row.iter().fold(0.0_f64, |acc, &m| acc.max(-m)));
        }
        for (j, w) in self.cols.weights().iter().enumerate() {
            let s: f64 = self.plan.iter().map(|r| r[j]).sum();
            err = err.max((s - w).abs());
        }
        err
    }
}

/// Optimal value, plan and the dual potentials certifying it.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub value: f64,
    pub coupling: Coupling,
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
    pub pivots: usize,
}

impl TransportSolution {
    /// Most negative reduced cost `c(xᵢ, yⱼ) − uᵢ − vⱼ` (zero or tiny at optimality).
    pub fn min_reduced_cost(&self) -> f64 {
        let rows = self.coupling.rows.atoms();
        let cols = self.coupling.cols.atoms();
        let mut worst = f64::INFINITY;
        for (i, x) in rows.iter().enumerate() {
            for (j, y) in cols.iter().enumerate() {
                let r = 0.5 * sq_dist(x, y) - self.row_potentials[i] - self.col_potentials[j];
                worst = worst.min(r);
            }
        }
        worst
    }
}

/// `d_c(μ, ν)` as the exact optimum of the transportation problem.
pub fn dc_discrete(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<TransportSolution> {
    dc_discrete_with_cap(mu, nu, DEFAULT_SIZE_CAP)
}

pub fn dc_discrete_with_cap(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cap: usize) -> Result<TransportSolution> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    let (n, m) = (mu.len(), nu.len());
    if n.saturating_mul(m) > cap {
        return Err(Error::SizeCap { size: n * m, cap });
    }
    let cost: Vec<Vec<f64>> = mu
        .atoms()
        .iter()
        .map(|x| nu.atoms().iter().map(|y| 0.5 * sq_dist(x, y)).collect())
        .collect();
    let mut tp = Transportation::vogel(&cost, mu.weights(), nu.weights());
    let pivots = tp.optimize(&cost)?;

    let mut plan = vec![vec![0.0; m]; n];
    for cell in &tp.basis {
        plan[cell.i][cell.j] += cell.flow.max(0.0);
    }
    let coupling = Coupling {
        rows: mu.clone(),
        cols: nu.clone(),
        plan,
    };
    Ok(TransportSolution {
        value: coupling.cost(),
        coupling,
        row_potentials: tp.u,
        col_potentials: tp.v,
        pivots,
    })
}

use crate::measures::Expectation as _;

#[derive(Debug, Clone, Copy)]
struct Cell {
    i: usize,
    j: usize,
    flow: f64,
}

/// Basis of the transportation simplex: `n + m − 1` cells forming a spanning tree
/// on the bipartite row/column graph.
struct Transportation {
    n: usize,
    m: usize,
    basis: Vec<Cell>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl Transportation {
    /// Vogel's approximation. Exactly one line is retired per allocation (two at the
    /// very end), which yields a spanning tree even when allocations are degenerate.
    fn vogel(cost: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> Self {
        let (n, m) = (supply.len(), demand.len());
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let mut row_on = vec![true; n];
        let mut col_on = vec![true; m];
        let (mut rows_left, mut cols_left) = (n, m);
        let mut basis = Vec::with_capacity(n + m - 1);

        let two_smallest = |it: &mut dyn Iterator<Item = (usize, f64)>| {
            let (mut b1, mut b2) = ((usize::MAX, f64::INFINITY), f64::INFINITY);
            for (k, c) in it {
                if c < b1.1 {
                    b2 = b1.1;
                    b1 = (k, c);
                } else if c < b2 {
                    b2 = c;
                }
            }
            let penalty = if b2.is_finite() { b2 - b1.1 } else { b1.1 };
            (b1.0, penalty)
        };

        while rows_left > 0 && cols_left > 0 {
            if rows_left == 1 && cols_left == 1 {
                let i = (0..n).find(|&i| row_on[i]).unwrap();
                let j = (0..m).find(|&j| col_on[j]).unwrap();
                basis.push(Cell { i, j, flow: s[i].min(d[j]).max(0.0) });
                break;
            }
            // (penalty, is_row, line, best cell in line)
            let mut pick: Option<(f64, bool, usize, usize)> = None;
            for i in (0..n).filter(|&i| row_on[i]) {
                let (j, p) = two_smallest(&mut (0..m).filter(|&j| col_on[j]).map(|j| (j, cost[i][j])));
                if pick.is_none_or(|b| p > b.0) {
                    pick = Some((p, true, i, j));
                }
            }
            for j in (0..m).filter(|&j| col_on[j]) {
                let (i, p) = two_smallest(&mut (0..n).filter(|&i| row_on[i]).map(|i| (i, cost[i][j])));
                if pick.is_none_or(|b| p > b.0) {
                    pick = Some((p, false, j, i));
                }
            }
            let (_, is_row, line, other) = pick.unwrap();
            let (i, j) = if is_row { (line, other) } else { (other, line) };
            let q = s[i].min(d[j]).max(0.0);
            basis.push(Cell { i, j, flow: q });
            let retire_row = if rows_left == 1 {
                false
            } else if cols_left == 1 {
                true
            } else {
                s[i] <= d[j]
            };
            if retire_row {
                row_on[i] = false;
                rows_left -= 1;
                d[j] -= q;
                s[i] = 0.0;
            } else {
                col_on[j] = false;
                cols_left -= 1;
                s[i] -= q;
                d[j] = 0.0;
            }
        }
        Self {
            n,
            m,
            basis,
            u: vec![0.0; n],
            v: vec![0.0; m],
        }
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        // node ids: rows 0..n, columns n..n+m; payload is the basis slot
        let mut adj = vec![Vec::new(); self.n + self.m];
        for (k, c) in self.basis.iter().enumerate() {
            adj[c.i].push((self.n + c.j, k));
            adj[self.n + c.j].push((c.i, k));
        }
        adj
    }

    fn potentials(&mut self, cost: &[Vec<f64>], adj: &[Vec<(usize, usize)>]) {
        let total = self.n + self.m;
        let mut known = vec![false; total];
        let mut queue = VecDeque::new();
        self.u[0] = 0.0;
        known[0] = true;
        queue.push_back(0);
        while let Some(node) = queue.pop_front() {
            for &(next, k) in &adj[node] {
                if known[next] {
                    continue;
                }
                let c = self.basis[k];
                if next >= self.n {
                    self.v[c.j] = cost[c.i][c.j] - self.u[c.i];
                } else {
                    self.u[c.i] = cost[c.i][c.j] - self.v[c.j];
                }
                known[next] = true;
                queue.push_back(next);
            }
        }
    }

    /// Basis slots on the tree path from column node `j` to row node `i`, in order.
    fn path(&self, adj: &[Vec<(usize, usize)>], i: usize, j: usize) -> Vec<usize> {
        let total = self.n + self.m;
        let start = self.n + j;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; total];
        let mut seen = vec![false; total];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            if node == i {
                break;
            }
            for &(next, k) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, k));
                    queue.push_back(next);
                }
            }
        }
        let mut slots = Vec::new();
        let mut node = i;
        while node != start {
            let (prev, k) = parent[node].expect("basis is a spanning tree");
            slots.push(k);
            node = prev;
        }
        slots.reverse();
        slots
    }

    fn optimize(&mut self, cost: &[Vec<f64>]) -> Result<usize> {
        let scale = cost
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |a, &c| a.max(c.abs()))
            .max(1.0);
        let eps = 1e-12 * scale;
        let max_pivots = 50 * (self.n + self.m) * (self.n + self.m) + 1000;
        for pivot in 0..max_pivots {
            let adj = self.adjacency();
            self.potentials(cost, &adj);

            let mut enter: Option<(usize, usize, f64)> = None;
            for (i, row) in cost.iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    let r = c - self.u[i] - self.v[j];
                    if r < -eps && enter.is_none_or(|e| r < e.2) {
                        enter = Some((i, j, r));
                    }
                }
            }
            let Some((ei, ej, _)) = enter else {
                return Ok(pivot);
            };

            // cycle: entering cell (+), then path edges alternate −, +, −, ...
            let path = self.path(&adj, ei, ej);
            let mut leave: Option<(usize, f64)> = None;
            for (pos, &k) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    let f = self.basis[k].flow;
                    if leave.is_none_or(|l| f < l.1) {
                        leave = Some((k, f));
                    }
                }
            }
            let (leave_slot, delta) = leave.expect("cycle has a decreasing edge");
            let delta = delta.max(0.0);
            for (pos, &k) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    self.basis[k].flow -= delta;
                } else {
                    self.basis[k].flow += delta;
                }
            }
            self.basis[leave_slot] = Cell {
                i: ei,
                j: ej,
                flow: delta,
            };
        }
        Err(Error::SimplexStalled(max_pivots))
    }
}

// ---------------------------------------------------------------------------
// Primal robust expected value

/// Result of the budget-constrained primal problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimalOracleReport {
    pub value: f64,
    /// Multiplier of the budget constraint; `None` when the budget does not bind.
    pub lambda: Option<f64>,
    pub budget_used: f64,
}

const BISECTION_LO: f64 = 1e-8;
const BISECTION_HI: f64 = 1e8;
const BISECTION_ITERS: usize = 200;

/// `max Σᵢⱼ πᵢⱼ f(yⱼ)` over plans moving the atoms of `nu0` onto `candidate_support`
/// with `Σ πᵢⱼ c(xᵢ, yⱼ) ≤ θ`.
///
/// The single budget row is dualized: for a multiplier λ every atom goes to its best
/// target `argmaxⱼ {f(yⱼ) − λ c(xᵢ, yⱼ)}`. Bisection on λ finds where the budget is
/// crossed, and the two assignments on either side of that breakpoint are mixed so
/// the budget holds with equality. The atoms of `nu0` are always added as candidates.
pub fn primal_robust_ev_oracle(
    f: &PwlConvex,
    nu0: &DiscreteMeasure,
    theta: f64,
    candidate_support: &[Vec<f64>],
) -> Result<PrimalOracleReport> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::InvalidTheta(theta));
    }
    if f.dim() != nu0.dim() {
        return Err(Error::DimensionMismatch {
            expected: nu0.dim(),
            got: f.dim(),
        });
    }
    if let Some(y) = candidate_support.iter().find(|y| y.len() != f.dim()) {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: y.len(),
        });
    }
    let baseline = nu0.expect_pwl(f)?;
    if theta == 0.0 {
        return Ok(PrimalOracleReport {
            value: baseline,
            lambda: None,
            budget_used: 0.0,
        });
    }

    let targets: Vec<&[f64]> = nu0
        .atoms()
        .iter()
        .map(Vec::as_slice)
        .chain(candidate_support.iter().map(Vec::as_slice))
        .collect();
    let fvals: Vec<f64> = targets.iter().map(|y| f.value_at(y)).collect();
    let costs: Vec<Vec<f64>> = nu0
        .atoms()
        .iter()
        .map(|x| targets.iter().map(|y| 0.5 * sq_dist(x, y)).collect())
        .collect();

    // (value, budget) of the Lagrangian assignment; ties go to the cheaper target when
    // `cheap` is set and to the dearer one otherwise
    let assign = |lambda: f64, cheap: bool| -> (f64, f64) {
        let mut value = 0.0;
        let mut budget = 0.0;
        for (w, row) in nu0.weights().iter().zip(&costs) {
            let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
            for (fv, &c) in fvals.iter().zip(row) {
                let score = fv - lambda * c;
                let better = score > best.0
                    || (score == best.0 && if cheap { c < best.2 } else { c > best.2 });
                if better {
                    best = (score, *fv, c);
                }
            }
            value += w * best.1;
            budget += w * best.2;
        }
        (value, budget)
    };

    let loose = assign(BISECTION_LO, false);
    if loose.1 <= theta {
        return Ok(PrimalOracleReport {
            value: loose.0,
            lambda: None,
            budget_used: loose.1,
        });
    }
    // invariant: budget(lo) > θ ≥ budget(hi)
    let (mut lo, mut hi) = (BISECTION_LO.ln(), BISECTION_HI.ln());
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if assign(mid.exp(), true).1 > theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let over = assign(lo.exp(), false);
    let under = assign(hi.exp(), true);
    let (value, budget_used) = if over.1 - under.1 > 0.0 {
        let t = ((theta - under.1) / (over.1 - under.1)).clamp(0.0, 1.0);
        (
            t * over.0 + (1.0 - t) * under.0,
            t * over.1 + (1.0 - t) * under.1,
        )
    } else {
        under
    };
    Ok(PrimalOracleReport {
        value,
        lambda: Some(hi.exp()),
        budget_used,
    })
}

/// Source atoms plus a uniform grid (`points_per_dim` per axis) over their bounding
/// box inflated by `√(2θ / min weight)`. No atom can travel further than that radius
/// without exceeding the budget on its own.
pub fn default_candidate_support(nu0: &DiscreteMeasure, theta: f64, points_per_dim: usize) -> Vec<Vec<f64>> {
    let d = nu0.dim();
    let w_min = nu0.weights().iter().copied().fold(f64::INFINITY, f64::min);
    let r = (2.0 * theta.max(0.0) / w_min).sqrt();
    let n = points_per_dim.max(2);
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let lo = nu0.atoms().iter().map(|a| a[k]).fold(f64::INFINITY, f64::min) - r;
            let hi = nu0.atoms().iter().map(|a| a[k]).fold(f64::NEG_INFINITY, f64::max) + r;
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        })
        .collect();
    let mut out: Vec<Vec<f64>> = nu0.atoms().to_vec();
    let mut idx = vec![0usize; d];
    loop {
        out.push((0..d).map(|k| axes[k][idx[k]]).collect());
        let mut k = d;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
}
