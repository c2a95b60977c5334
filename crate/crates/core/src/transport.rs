//! Exact linear optimal transport.
//!
//! [`solve_ot`] solves the balanced transport LP over `Γ(p, q)` and
//! [`solve_partial_ot`] the partial problem over
//! `Γ_≤(p, q) = {γ ≥ 0 : γ1 ≤ p, γᵀ1 ≤ q}`. Both return a vertex of the
//! feasible polytope computed by a primal network simplex on the complete
//! bipartite graph.
//!
//! The simplex keeps a strongly feasible spanning tree (Cunningham's leaving
//! arc rule), which rules out cycling on the heavily degenerate instances
//! produced by uniform masses.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Relative tolerance on `Σp = Σq` for balanced problems.
pub const BALANCE_TOL: f64 = 1e-9;

/// A nonnegative `n × m` coupling together with the marginal constraints it
/// was built against.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub matrix: Array2<f64>,
    pub row_marginal: Array1<f64>,
    pub col_marginal: Array1<f64>,
    /// Objective value of whichever problem produced the plan.
    pub objective: f64,
}

impl TransportPlan {
    pub fn new(matrix: Array2<f64>, row_marginal: Array1<f64>, col_marginal: Array1<f64>) -> Self {
        TransportPlan {
            matrix,
            row_marginal,
            col_marginal,
            objective: 0.0,
        }
    }

    pub fn zeros(p: &Array1<f64>, q: &Array1<f64>) -> Self {
        Self::new(Array2::zeros((p.len(), q.len())), p.clone(), q.clone())
    }

    pub fn shape(&self) -> (usize, usize) {
        self.matrix.dim()
    }

    /// Total transported mass `|γ|`.
    pub fn total(&self) -> f64 {
        self.matrix.sum()
    }

    pub fn row_sums(&self) -> Array1<f64> {
        self.matrix.sum_axis(Axis(1))
    }

    pub fn col_sums(&self) -> Array1<f64> {
        self.matrix.sum_axis(Axis(0))
    }

    pub fn transpose(&self) -> Self {
        TransportPlan {
            matrix: self.matrix.t().to_owned(),
            row_marginal: self.col_marginal.clone(),
            col_marginal: self.row_marginal.clone(),
            objective: self.objective,
        }
    }

    /// Checks `γ ≥ 0`, `γ1 ≤ p + tol` and `γᵀ1 ≤ q + tol`.
    pub fn check_partial(&self, tol: f64) -> Result<()> {
        if let Some(v) = self.matrix.iter().find(|v| **v < -1e-14 || !v.is_finite()) {
            return Err(Error::Infeasible(format!(
                "negative or non-finite entry {v}"
            )));
        }
        for (i, (r, p)) in self.row_sums().iter().zip(&self.row_marginal).enumerate() {
            if *r > p + tol {
                return Err(Error::Infeasible(format!("row {i} carries {r} > {p}")));
            }
        }
        for (j, (c, q)) in self.col_sums().iter().zip(&self.col_marginal).enumerate() {
            if *c > q + tol {
                return Err(Error::Infeasible(format!("column {j} carries {c} > {q}")));
            }
        }
        Ok(())
    }

    /// Checks that both marginals are met with equality up to `tol`.
    pub fn check_balanced(&self, tol: f64) -> Result<()> {
        self.check_partial(tol)?;
        for (i, (r, p)) in self.row_sums().iter().zip(&self.row_marginal).enumerate() {
            if (r - p).abs() > tol {
                return Err(Error::Infeasible(format!("row {i} carries {r} != {p}")));
            }
        }
        for (j, (c, q)) in self.col_sums().iter().zip(&self.col_marginal).enumerate() {
            if (c - q).abs() > tol {
                return Err(Error::Infeasible(format!("column {j} carries {c} != {q}")));
            }
        }
        Ok(())
    }

    /// True when every row has at most one entry above `tol`, i.e. the plan
    /// is induced by a map defined on the transported part of the source.
    pub fn is_row_monge(&self, tol: f64) -> bool {
        self.matrix
            .rows()
            .into_iter()
            .all(|row| row.iter().filter(|v| **v > tol).count() <= 1)
    }

    /// Linear cost `⟨cost, γ⟩`.
    pub fn linear_cost(&self, cost: ArrayView2<f64>) -> f64 {
        (&self.matrix * &cost).sum()
    }
}

fn validate_masses(v: ArrayView1<f64>, side: &str) -> Result<()> {
    for (index, &value) in v.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "{side} marginal entry {index} is {value}"
            )));
        }
    }
    Ok(())
}

fn validate_cost(cost: ArrayView2<f64>, n: usize, m: usize) -> Result<()> {
    if cost.dim() != (n, m) {
        return Err(Error::DimensionMismatch(format!(
            "cost is {:?} but marginals have lengths {n} and {m}",
            cost.dim()
        )));
    }
    for ((i, j), v) in cost.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NanCost(i, j));
        }
    }
    Ok(())
}

/// Exact balanced optimal transport: `min ⟨cost, γ⟩` over `Γ(p, q)`.
pub fn solve_ot(
    cost: ArrayView2<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
) -> Result<TransportPlan> {
    validate_masses(p, "row")?;
    validate_masses(q, "column")?;
    validate_cost(cost, p.len(), q.len())?;
    let (sp, sq) = (p.sum(), q.sum());
    if (sp - sq).abs() > BALANCE_TOL * sp.max(sq).max(1.0) {
        return Err(Error::MarginalMismatch { row: sp, col: sq });
    }
    let mut plan = TransportPlan::zeros(&p.to_owned(), &q.to_owned());
    if sp == 0.0 || sq == 0.0 {
        return Ok(plan);
    }
    let flows = NetworkSimplex::new(cost, p, q).run()?;
    for ((i, j), f) in flows {
        plan.matrix[[i, j]] = f;
    }
    plan.objective = plan.linear_cost(cost);
    Ok(plan)
}

/// Exact partial transport: `min ⟨cost, γ⟩` over `Γ_≤(p, q)`.
///
/// The problem is lifted to a balanced `(n+1) × (m+1)` instance whose extra
/// row carries mass `|q|` and extra column mass `|p|`, all at zero cost.
/// Mass routed through the dummy atoms is simply not transported.
pub fn solve_partial_ot(
    cost: ArrayView2<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
) -> Result<TransportPlan> {
    validate_masses(p, "row")?;
    validate_masses(q, "column")?;
    let (n, m) = (p.len(), q.len());
    validate_cost(cost, n, m)?;
    let mut plan = TransportPlan::zeros(&p.to_owned(), &q.to_owned());
    let (sp, sq) = (p.sum(), q.sum());
    if sp == 0.0 || sq == 0.0 {
        return Ok(plan);
    }
    let mut aug = Array2::zeros((n + 1, m + 1));
    aug.slice_mut(ndarray::s![..n, ..m]).assign(&cost);
    let mut pa = Array1::zeros(n + 1);
    pa.slice_mut(ndarray::s![..n]).assign(&p);
    pa[n] = sq;
    let mut qa = Array1::zeros(m + 1);
    qa.slice_mut(ndarray::s![..m]).assign(&q);
    qa[m] = sp;
    let flows = NetworkSimplex::new(aug.view(), pa.view(), qa.view()).run()?;
    for ((i, j), f) in flows {
        if i < n && j < m {
            plan.matrix[[i, j]] = f;
        }
    }
    plan.objective = plan.linear_cost(cost);
    Ok(plan)
}

const NONE: usize = usize::MAX;

/// Primal network simplex for the uncapacitated transportation problem.
///
/// Nodes `0..n` are sources, `n..n+m` sinks and `n+m` the artificial root.
/// Arc ids below `n*m` are real arcs `i -> n+j` (id `i*m + j`); id
/// `n*m + v` is the artificial arc joining node `v` to the root.
struct NetworkSimplex {
    n: usize,
    m: usize,
    /// Costs scaled to `max |c| = 1`.
    cost: Vec<f64>,
    art_cost: f64,
    parent: Vec<usize>,
    pred_arc: Vec<usize>,
    /// Tree arc from node to parent is oriented node -> parent.
    up: Vec<bool>,
    flow: Vec<f64>,
    pi: Vec<f64>,
    depth: Vec<usize>,
    in_tree: Vec<bool>,
    children: Vec<Vec<usize>>,
    next_arc: usize,
    eps: f64,
    supply_total: f64,
}

impl NetworkSimplex {
    fn new(cost: ArrayView2<f64>, p: ArrayView1<f64>, q: ArrayView1<f64>) -> Self {
        let (n, m) = cost.dim();
        let scale = cost.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let cost: Vec<f64> = cost.iter().map(|c| c / scale).collect();
        let nodes = n + m + 1;
        let root = n + m;
        let art_cost = 2.0 * nodes as f64;
        let mut s = NetworkSimplex {
            n,
            m,
            cost,
            art_cost,
            parent: vec![root; nodes],
            pred_arc: (0..nodes).map(|v| n * m + v).collect(),
            up: vec![true; nodes],
            flow: vec![0.0; nodes],
            pi: vec![0.0; nodes],
            depth: vec![1; nodes],
            in_tree: vec![false; n * m],
            children: vec![Vec::new(); nodes],
            next_arc: 0,
            eps: 1e-12,
            supply_total: p.sum(),
        };
        // sources push their supply up to the root, the root feeds each sink;
        // zero-supply arcs point up, which keeps the initial tree strongly feasible
        for i in 0..n {
            s.up[i] = true;
            s.flow[i] = p[i];
        }
        for j in 0..m {
            let v = n + j;
            if q[j] > 0.0 {
                s.up[v] = false;
                s.flow[v] = q[j];
            } else {
                s.up[v] = true;
                s.flow[v] = 0.0;
            }
        }
        s.parent[root] = NONE;
        s.pred_arc[root] = NONE;
        s.depth[root] = 0;
        s.refresh_tree();
        s
    }

    fn root(&self) -> usize {
        self.n + self.m
    }

    fn arc_cost(&self, arc: usize) -> f64 {
        if arc < self.n * self.m {
            self.cost[arc]
        } else {
            self.art_cost
        }
    }

    /// Recomputes children lists, depths and potentials from the parent array.
    fn refresh_tree(&mut self) {
        let root = self.root();
        for c in &mut self.children {
            c.clear();
        }
        for v in 0..root {
            let p = self.parent[v];
            self.children[p].push(v);
        }
        self.pi[root] = 0.0;
        self.depth[root] = 0;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            for idx in 0..self.children[u].len() {
                let v = self.children[u][idx];
                let c = self.arc_cost(self.pred_arc[v]);
                // reduced cost c - pi_tail + pi_head vanishes on tree arcs
                self.pi[v] = if self.up[v] {
                    self.pi[u] + c
                } else {
                    self.pi[u] - c
                };
                self.depth[v] = self.depth[u] + 1;
                stack.push(v);
            }
        }
    }

    fn reduced_cost(&self, arc: usize) -> f64 {
        let (i, j) = (arc / self.m, arc % self.m);
        self.cost[arc] - self.pi[i] + self.pi[self.n + j]
    }

    /// Block-search pricing: the most negative reduced cost inside the first
    /// block (scanning cyclically) that contains any eligible arc.
    fn find_entering(&mut self) -> Option<usize> {
        let total = self.n * self.m;
        let block = ((total as f64).sqrt().ceil() as usize).max(10).min(total);
        let mut best = NONE;
        let mut best_rc = -self.eps;
        let mut scanned = 0;
        let mut arc = self.next_arc;
        while scanned < total {
            let end = (scanned + block).min(total);
            while scanned < end {
                if !self.in_tree[arc] {
                    let rc = self.reduced_cost(arc);
                    if rc < best_rc {
                        best_rc = rc;
                        best = arc;
                    }
                }
                arc += 1;
                if arc == total {
                    arc = 0;
                }
                scanned += 1;
            }
            if best != NONE {
                self.next_arc = arc;
                return Some(best);
            }
        }
        None
    }

    fn pivot(&mut self, entering: usize) -> Result<()> {
        let k = entering / self.m;
        let l = self.n + entering % self.m;

        // apex of the cycle
        let (mut a, mut b) = (k, l);
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a];
            } else {
                b = self.parent[b];
            }
        }
        let apex = a;

        // Cunningham: the last blocking arc met when walking the cycle from
        // the apex in the direction of the entering arc
        let mut delta_k = f64::INFINITY;
        let mut leave_k = NONE;
        let mut u = k;
        while u != apex {
            if self.up[u] && self.flow[u] < delta_k {
                delta_k = self.flow[u];
                leave_k = u;
            }
            u = self.parent[u];
        }
        let mut delta_l = f64::INFINITY;
        let mut leave_l = NONE;
        let mut u = l;
        while u != apex {
            if !self.up[u] && self.flow[u] <= delta_l {
                delta_l = self.flow[u];
                leave_l = u;
            }
            u = self.parent[u];
        }
        let (leave, delta, on_k_side) = if leave_l != NONE && delta_l <= delta_k {
            (leave_l, delta_l, false)
        } else if leave_k != NONE {
            (leave_k, delta_k, true)
        } else {
            return Err(Error::Numerical("transport LP is unbounded".into()));
        };

        if delta > 0.0 {
            let mut u = k;
            while u != apex {
                if self.up[u] {
                    self.flow[u] -= delta;
                } else {
                    self.flow[u] += delta;
                }
                u = self.parent[u];
            }
            let mut u = l;
            while u != apex {
                if self.up[u] {
                    self.flow[u] += delta;
                } else {
                    self.flow[u] -= delta;
                }
                u = self.parent[u];
            }
        }
        self.flow[leave] = 0.0;

        let old_arc = self.pred_arc[leave];
        if old_arc < self.n * self.m {
            self.in_tree[old_arc] = false;
        }
        self.in_tree[entering] = true;

        // re-hang the detached subtree from the endpoint of the entering arc
        let (new_root, attach, new_up) = if on_k_side {
            (k, l, true)
        } else {
            (l, k, false)
        };
        let mut path = vec![new_root];
        let mut u = new_root;
        while u != leave {
            u = self.parent[u];
            path.push(u);
        }
        for t in (1..path.len()).rev() {
            let (child, node) = (path[t - 1], path[t]);
            self.parent[node] = child;
            self.pred_arc[node] = self.pred_arc[child];
            self.up[node] = !self.up[child];
            self.flow[node] = self.flow[child];
        }
        self.parent[new_root] = attach;
        self.pred_arc[new_root] = entering;
        self.up[new_root] = new_up;
        self.flow[new_root] = delta;

        self.refresh_tree();
        Ok(())
    }

    /// Runs to optimality and returns the positive real-arc flows.
    fn run(mut self) -> Result<Vec<((usize, usize), f64)>> {
        let nodes = self.n + self.m + 1;
        let max_pivots = 50 * (self.n * self.m + nodes) + 10_000;
        let mut pivots = 0;
        while let Some(arc) = self.find_entering() {
            self.pivot(arc)?;
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::Numerical(format!(
                    "network simplex exceeded {max_pivots} pivots"
                )));
            }
        }
        let total = self.supply_total;
        let mut out = Vec::new();
        let mut artificial = 0.0;
        for v in 0..self.root() {
            let arc = self.pred_arc[v];
            let f = self.flow[v].max(0.0);
            if arc < self.n * self.m {
                if f > 0.0 {
                    out.push(((arc / self.m, arc % self.m), f));
                }
            } else {
                artificial += f;
            }
        }
        if artificial > 1e-9 * total.max(1.0) {
            return Err(Error::Numerical(format!(
                "transport LP left {artificial} units on artificial arcs"
            )));
        }
        out.sort_by_key(|(ij, _)| *ij);
        Ok(out)
    }
}
