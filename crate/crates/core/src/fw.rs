//! Frank-Wolfe solvers for Gromov-Wasserstein (GW) and partial
//! Gromov-Wasserstein (PGW).
//!
//! Both objectives are quadratic in the plan. Writing
//! `(Mγ)_ij = Σ_{i'j'} (g_A[i][i'] - g_B[j][j'])² γ_i'j'`, the GW objective is
//! `⟨Mγ, γ⟩` and PGW adds `λ(|p|² + |q|² - 2|γ|²)`. `Mγ` is assembled in
//! `O(n²m + nm²)` from the factored form
//! `(g_A∘g_A) r ⊕ (g_B∘g_B) c - 2 g_A γ g_B`.
//!
//! Each iteration solves a linear transport problem on the gradient (the
//! balanced LP for GW, the partial LP for PGW) and takes the exact minimizer
//! of the objective along the segment towards that vertex.

use std::cmp::Ordering;

use log::warn;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmspace::GmSpace;
use crate::transport::{solve_ot, solve_partial_ot, TransportPlan, BALANCE_TOL};

/// Slack allowed on marginal bounds when validating user-supplied plans.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FwInit {
    /// `p qᵀ / max(|p|, |q|)`
    Product,
    /// `diag(min(p_i, q_i))`, square problems only.
    Identity,
    /// A vertex of the feasible polytope picked by a randomly perturbed
    /// gauge-profile cost; the seed decides the perturbation.
    RandomFeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FwConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Number of initializations; the first uses `init`, the rest are random.
    pub restarts: usize,
    pub seed: u64,
    pub init: FwInit,
}

impl Default for FwConfig {
    fn default() -> Self {
        FwConfig {
            max_iters: 1000,
            rel_tol: 1e-9,
            restarts: 1,
            seed: 0,
            init: FwInit::Product,
        }
    }
}

impl FwConfig {
    pub fn with_init(mut self, init: FwInit) -> Self {
        self.init = init;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.rel_tol > 0.0) || self.restarts == 0 {
            return Err(Error::InvalidArgument(format!(
                "invalid solver config: max_iters={}, rel_tol={}, restarts={}",
                self.max_iters, self.rel_tol, self.restarts
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
}

/// Trace of the best Frank-Wolfe run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub objective: f64,
    pub iterations: usize,
    pub step_sizes: Vec<f64>,
    pub termination: Termination,
    /// Objective before the first step, then after every step.
    pub objective_trace: Vec<f64>,
    pub lambda: Option<f64>,
    pub restarts: usize,
}

fn check_dims(gamma: ArrayView2<f64>, a: &GmSpace, b: &GmSpace) -> Result<()> {
    if gamma.dim() != (a.len(), b.len()) {
        return Err(Error::DimensionMismatch(format!(
            "plan is {:?} but spaces have {} and {} atoms",
            gamma.dim(),
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Precomputed pieces of the quadratic form for one pair of spaces.
struct Quadratic<'a> {
    ga: &'a Array2<f64>,
    gb: &'a Array2<f64>,
    ga_sq: Array2<f64>,
    gb_sq: Array2<f64>,
}

impl<'a> Quadratic<'a> {
    fn new(a: &'a GmSpace, b: &'a GmSpace) -> Self {
        Quadratic {
            ga: a.gauge(),
            gb: b.gauge(),
            ga_sq: a.gauge().mapv(|v| v * v),
            gb_sq: b.gauge().mapv(|v| v * v),
        }
    }

    /// `Mγ` for an arbitrary (possibly signed) matrix.
    fn apply(&self, gamma: ArrayView2<f64>) -> Array2<f64> {
        let r = gamma.sum_axis(Axis(1));
        let c = gamma.sum_axis(Axis(0));
        let t1 = self.ga_sq.dot(&r);
        let t2 = self.gb_sq.dot(&c);
        let mut out = self.ga.dot(&gamma).dot(self.gb);
        out.mapv_inplace(|v| -2.0 * v);
        out += &t1.insert_axis(Axis(1));
        out += &t2.insert_axis(Axis(0));
        out
    }
}

fn inner(x: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

/// `Σ (g_A[i][i'] - g_B[j][j'])² γ_ij γ_i'j'`.
pub fn gw_objective(gamma: ArrayView2<f64>, a: &GmSpace, b: &GmSpace) -> Result<f64> {
    check_dims(gamma, a, b)?;
    let mg = Quadratic::new(a, b).apply(gamma);
    Ok(inner(mg.view(), gamma))
}

fn pgw_penalty(a: &GmSpace, b: &GmSpace, lambda: f64, transported: f64) -> f64 {
    let (pa, pb) = (a.total_mass(), b.total_mass());
    lambda * ((pa * pa - transported * transported) + (pb * pb - transported * transported))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(())
}

/// PGW objective of a plan in `Γ_≤(p, q)`.
pub fn pgw_objective(gamma: ArrayView2<f64>, a: &GmSpace, b: &GmSpace, lambda: f64) -> Result<f64> {
    check_dims(gamma, a, b)?;
    check_lambda(lambda)?;
    let plan = TransportPlan::new(gamma.to_owned(), a.mass().clone(), b.mass().clone());
    plan.check_partial(FEASIBILITY_TOL)?;
    Ok(gw_objective(gamma, a, b)? + pgw_penalty(a, b, lambda, gamma.sum()))
}

/// Gradient of [`gw_objective`]: `2 Mγ`.
pub fn gw_gradient(gamma: ArrayView2<f64>, a: &GmSpace, b: &GmSpace) -> Result<Array2<f64>> {
    check_dims(gamma, a, b)?;
    Ok(Quadratic::new(a, b).apply(gamma) * 2.0)
}

/// Gradient of [`pgw_objective`]: `2 Mγ - 4λ|γ| J`.
pub fn pgw_gradient(
    gamma: ArrayView2<f64>,
    a: &GmSpace,
    b: &GmSpace,
    lambda: f64,
) -> Result<Array2<f64>> {
    let shift = 4.0 * lambda * gamma.sum();
    Ok(gw_gradient(gamma, a, b)? - shift)
}

/// Minimizer over `[0, 1]` of `φ(t) = a t² + b t`.
pub fn quadratic_step(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        (-b / (2.0 * a)).clamp(0.0, 1.0)
    } else if a + b < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Exact line search along `γ + tδ` for the GW objective, or for PGW when
/// `lambda` is given.
pub fn fw_line_search(
    gamma: ArrayView2<f64>,
    delta: ArrayView2<f64>,
    a: &GmSpace,
    b: &GmSpace,
    lambda: Option<f64>,
) -> Result<f64> {
    check_dims(gamma, a, b)?;
    check_dims(delta, a, b)?;
    let quad = Quadratic::new(a, b);
    let m_delta = quad.apply(delta);
    let m_gamma = quad.apply(gamma);
    let (mut qa, mut qb) = (
        inner(m_delta.view(), delta),
        2.0 * inner(m_gamma.view(), delta),
    );
    if let Some(lambda) = lambda {
        let (sg, sd) = (gamma.sum(), delta.sum());
        qa -= 2.0 * lambda * sd * sd;
        qb -= 4.0 * lambda * sg * sd;
    }
    Ok(quadratic_step(qa, qb))
}

/// Which problem a Frank-Wolfe run targets.
#[derive(Clone, Copy)]
enum Problem {
    Balanced,
    Partial { lambda: f64 },
}

impl Problem {
    fn lambda(&self) -> Option<f64> {
        match self {
            Problem::Balanced => None,
            Problem::Partial { lambda } => Some(*lambda),
        }
    }
}

struct Run {
    plan: Array2<f64>,
    report: SolveReport,
}

fn frank_wolfe(
    a: &GmSpace,
    b: &GmSpace,
    problem: Problem,
    init: Array2<f64>,
    cfg: &FwConfig,
) -> Result<Run> {
    let quad = Quadratic::new(a, b);
    let (p, q) = (a.mass().view(), b.mass().view());
    let penalty = |total: f64| match problem {
        Problem::Balanced => 0.0,
        Problem::Partial { lambda } => pgw_penalty(a, b, lambda, total),
    };

    let mut gamma = init;
    let mut m_gamma = quad.apply(gamma.view());
    let mut f = inner(m_gamma.view(), gamma.view()) + penalty(gamma.sum());
    let mut trace = vec![f];
    let mut steps = Vec::new();
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        iterations += 1;
        let mut grad = &m_gamma * 2.0;
        if let Problem::Partial { lambda } = problem {
            grad -= 4.0 * lambda * gamma.sum();
        }
        let vertex = match problem {
            Problem::Balanced => solve_ot(grad.view(), p, q)?,
            Problem::Partial { .. } => solve_partial_ot(grad.view(), p, q)?,
        };
        let delta = vertex.matrix - &gamma;
        let m_delta = quad.apply(delta.view());
        let mut qa = inner(m_delta.view(), delta.view());
        let qb = inner(grad.view(), delta.view());
        if let Problem::Partial { lambda } = problem {
            let sd = delta.sum();
            qa -= 2.0 * lambda * sd * sd;
        }
        let t = quadratic_step(qa, qb);
        if t == 0.0 {
            termination = Termination::Converged;
            break;
        }
        gamma.scaled_add(t, &delta);
        m_gamma.scaled_add(t, &m_delta);
        let f_new = inner(m_gamma.view(), gamma.view()) + penalty(gamma.sum());
        steps.push(t);
        trace.push(f_new);
        let change = (f - f_new).abs();
        f = f_new;
        if change <= cfg.rel_tol * f.abs().max(1e-12) {
            termination = Termination::Converged;
            break;
        }
    }

    gamma.mapv_inplace(|v| v.max(0.0));
    // recompute from scratch so the reported value matches the returned plan
    let mg = quad.apply(gamma.view());
    let objective = inner(mg.view(), gamma.view()) + penalty(gamma.sum());
    Ok(Run {
        plan: gamma,
        report: SolveReport {
            objective,
            iterations,
            step_sizes: steps,
            termination,
            objective_trace: trace,
            lambda: problem.lambda(),
            restarts: 1,
        },
    })
}

/// Total order used to pick a canonical orientation for a pair of spaces, so
/// that solving `(A, B)` and `(B, A)` runs the same iterations.
fn canonical_order(a: &GmSpace, b: &GmSpace) -> Ordering {
    a.len()
        .cmp(&b.len())
        .then_with(|| {
            a.mass()
                .iter()
                .zip(b.mass().iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| {
            a.gauge()
                .iter()
                .zip(b.gauge().iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

fn initial_plan(
    a: &GmSpace,
    b: &GmSpace,
    problem: Problem,
    init: FwInit,
    seed: u64,
) -> Result<Array2<f64>> {
    let (p, q) = (a.mass(), b.mass());
    match init {
        FwInit::Product => {
            let scale = p.sum().max(q.sum());
            let col = p.view().insert_axis(Axis(1));
            let row = q.view().insert_axis(Axis(0));
            Ok(col.dot(&row) / scale)
        }
        FwInit::Identity => {
            if p.len() != q.len() {
                return Err(Error::InvalidArgument(format!(
                    "identity init needs square problems, got {}x{}",
                    p.len(),
                    q.len()
                )));
            }
            if let Problem::Balanced = problem {
                if let Some(i) = (0..p.len()).find(|&i| (p[i] - q[i]).abs() > FEASIBILITY_TOL) {
                    return Err(Error::InvalidArgument(format!(
                        "identity init is infeasible: p[{i}]={} but q[{i}]={}",
                        p[i], q[i]
                    )));
                }
            }
            let diag: Array1<f64> = p.iter().zip(q.iter()).map(|(x, y)| x.min(*y)).collect();
            Ok(Array2::from_diag(&diag))
        }
        FwInit::RandomFeasible => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cost = profile_cost(a, b);
            cost.mapv_inplace(|v| v + PROFILE_NOISE * rng.random::<f64>());
            let plan = match problem {
                Problem::Balanced => solve_ot(cost.view(), p.view(), q.view())?,
                Problem::Partial { .. } => {
                    // strictly negative costs, so the vertex moves as much mass as possible
                    cost.mapv_inplace(|v| v - 2.0 - PROFILE_NOISE);
                    solve_partial_ot(cost.view(), p.view(), q.view())?
                }
            };
            Ok(plan.matrix)
        }
    }
}

const PROFILE_LEVELS: usize = 64;
const PROFILE_NOISE: f64 = 0.25;

/// Quantile function of each atom's gauge-value distribution
/// `Σ_k w_k δ_{g[i][k]}`, sampled at `PROFILE_LEVELS` midpoints.
fn gauge_profiles(space: &GmSpace) -> Array2<f64> {
    let (g, w) = (space.gauge(), space.mass());
    let n = g.nrows();
    let total = w.sum();
    let mut out = Array2::zeros((n, PROFILE_LEVELS));
    let mut values: Vec<(f64, f64)> = Vec::with_capacity(n);
    for i in 0..n {
        values.clear();
        values.extend((0..n).map(|k| (g[[i, k]], w[k])));
        values.sort_by(|x, y| x.0.total_cmp(&y.0));
        let (mut acc, mut idx) = (0.0, 0);
        for l in 0..PROFILE_LEVELS {
            let level = (l as f64 + 0.5) / PROFILE_LEVELS as f64 * total;
            while idx + 1 < n && acc + values[idx].1 < level {
                acc += values[idx].1;
                idx += 1;
            }
            out[[i, l]] = values[idx].0;
        }
    }
    out
}

/// 1-D squared Wasserstein distance between the gauge profiles of every
/// pair of atoms, scaled to a maximum of 1. Random restarts perturb this
/// cost so their starting vertices already roughly respect local structure;
/// uniformly random vertices stall in poor stationary points far more often.
fn profile_cost(a: &GmSpace, b: &GmSpace) -> Array2<f64> {
    let (pa, pb) = (gauge_profiles(a), gauge_profiles(b));
    let mut cost = Array2::from_shape_fn((a.len(), b.len()), |(i, j)| {
        pa.row(i)
            .iter()
            .zip(pb.row(j).iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / PROFILE_LEVELS as f64
    });
    let max = cost.iter().copied().fold(0.0_f64, f64::max);
    if max > 0.0 {
        cost.mapv_inplace(|v| v / max);
    }
    cost
}

fn solve(
    a: &GmSpace,
    b: &GmSpace,
    problem: Problem,
    warm_start: Option<&TransportPlan>,
    cfg: &FwConfig,
) -> Result<(TransportPlan, SolveReport)> {
    cfg.validate()?;
    if let Some(w) = warm_start {
        check_dims(w.matrix.view(), a, b)?;
    }
    if canonical_order(a, b) == Ordering::Greater {
        let warm_t = warm_start.map(|w| w.transpose());
        let (plan, report) = solve(b, a, problem, warm_t.as_ref(), cfg)?;
        return Ok((plan.transpose(), report));
    }

    let mut best: Option<Run> = None;
    for r in 0..cfg.restarts {
        let init = match (r, warm_start) {
            (0, Some(w)) => w.matrix.clone(),
            (0, None) => initial_plan(a, b, problem, cfg.init, cfg.seed)?,
            _ => initial_plan(
                a,
                b,
                problem,
                FwInit::RandomFeasible,
                cfg.seed.wrapping_add(r as u64),
            )?,
        };
        let run = frank_wolfe(a, b, problem, init, cfg)?;
        let better = best
            .as_ref()
            .is_none_or(|cur| run.report.objective < cur.report.objective);
        if better {
            best = Some(run);
        }
    }
    let Run { plan, mut report } = best.expect("at least one restart");
    report.restarts = cfg.restarts;
    if !report.objective.is_finite() {
        return Err(Error::Numerical(
            "Frank-Wolfe produced a non-finite objective".into(),
        ));
    }
    let mut out = TransportPlan::new(plan, a.mass().clone(), b.mass().clone());
    out.objective = report.objective;
    Ok((out, report))
}

fn check_balanced(a: &GmSpace, b: &GmSpace) -> Result<()> {
    let (sa, sb) = (a.total_mass(), b.total_mass());
    if (sa - sb).abs() > BALANCE_TOL * sa.max(sb) {
        return Err(Error::MarginalMismatch { row: sa, col: sb });
    }
    Ok(())
}

/// Largest possible squared gauge mismatch `max (g_A - g_B)²`.
pub fn gauge_mismatch_bound(a: &GmSpace, b: &GmSpace) -> f64 {
    let range = |g: &Array2<f64>| {
        g.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(*v), hi.max(*v))
            })
    };
    let (alo, ahi) = range(a.gauge());
    let (blo, bhi) = range(b.gauge());
    let d = (ahi - blo).abs().max((bhi - alo).abs());
    d * d
}

/// GW between two spaces of equal total mass.
pub fn solve_gw(a: &GmSpace, b: &GmSpace, cfg: &FwConfig) -> Result<(TransportPlan, SolveReport)> {
    check_balanced(a, b)?;
    solve(a, b, Problem::Balanced, None, cfg)
}

/// GW starting from a given feasible plan (used as the first restart).
pub fn solve_gw_from(
    a: &GmSpace,
    b: &GmSpace,
    init: &TransportPlan,
    cfg: &FwConfig,
) -> Result<(TransportPlan, SolveReport)> {
    check_balanced(a, b)?;
    solve(a, b, Problem::Balanced, Some(init), cfg)
}

fn check_pgw_inputs(a: &GmSpace, b: &GmSpace, lambda: f64) -> Result<()> {
    check_lambda(lambda)?;
    let bound = gauge_mismatch_bound(a, b);
    if 2.0 * lambda > bound {
        warn!(
            "2λ = {} exceeds the gauge mismatch bound {bound}; PGW transports all it can",
            2.0 * lambda
        );
    }
    Ok(())
}

/// Partial GW with mass penalty `lambda`.
pub fn solve_pgw(
    a: &GmSpace,
    b: &GmSpace,
    lambda: f64,
    cfg: &FwConfig,
) -> Result<(TransportPlan, SolveReport)> {
    check_pgw_inputs(a, b, lambda)?;
    solve(a, b, Problem::Partial { lambda }, None, cfg)
}

/// Partial GW starting from a given plan in `Γ_≤(p, q)`.
pub fn solve_pgw_from(
    a: &GmSpace,
    b: &GmSpace,
    lambda: f64,
    init: &TransportPlan,
    cfg: &FwConfig,
) -> Result<(TransportPlan, SolveReport)> {
    check_pgw_inputs(a, b, lambda)?;
    init.check_partial(FEASIBILITY_TOL)?;
    solve(a, b, Problem::Partial { lambda }, Some(init), cfg)
}
