//! Reference-space construction: GW barycenters and classical MDS.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fw::{gw_objective, solve_gw, solve_gw_from, FwConfig};
use crate::gmspace::GmSpace;
use crate::transport::TransportPlan;

#[derive(Clone, Debug)]
pub struct BarycenterConfig {
    /// Number of barycenter atoms.
    pub support_size: usize,
    /// Convex weights over the inputs; empty means uniform.
    pub weights: Vec<f64>,
    pub outer_iters: usize,
    pub fw: FwConfig,
    pub seed: u64,
}

impl BarycenterConfig {
    pub fn new(support_size: usize) -> Self {
        BarycenterConfig {
            support_size,
            weights: Vec::new(),
            outer_iters: 20,
            fw: FwConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Barycenter {
    /// Precomputed gauge with uniform mass `1/n₀`.
    pub space: GmSpace,
    /// `Σ_k t_k GW(C, X_k)` after initialization and after every outer iteration.
    pub objective_trace: Vec<f64>,
    /// Final couplings from the barycenter to each input.
    pub plans: Vec<TransportPlan>,
}

fn initial_gauge(inputs: &[GmSpace], n0: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let pick = rng.random_range(0..inputs.len());
    let g = inputs[pick].gauge();
    let n = g.nrows();
    let mut idx: Vec<usize> = if n0 <= n {
        sample(rng, n, n0).into_vec()
    } else {
        let mut v: Vec<usize> = (0..n).collect();
        v.extend((n..n0).map(|_| rng.random_range(0..n)));
        v
    };
    idx.sort_unstable();
    Array2::from_shape_fn((n0, n0), |(i, j)| g[[idx[i], idx[j]]])
}

/// Closed-form minimizer over the barycenter gauge for fixed couplings:
/// `C = Σ_k t_k γ_k g_k γ_kᵀ / (w wᵀ)`, with the diagonal pinned to zero
/// when every input has a zero-diagonal gauge.
fn update_gauge(
    inputs: &[GmSpace],
    plans: &[TransportPlan],
    weights: &[f64],
    w: &Array1<f64>,
    zero_diagonal: bool,
) -> Array2<f64> {
    let n0 = w.len();
    let mut c = Array2::<f64>::zeros((n0, n0));
    for ((x, plan), t) in inputs.iter().zip(plans).zip(weights) {
        let g = &plan.matrix;
        c.scaled_add(*t, &g.dot(x.gauge()).dot(&g.t()));
    }
    for i in 0..n0 {
        for j in i..n0 {
            let v = if i == j && zero_diagonal {
                0.0
            } else {
                0.5 * (c[[i, j]] + c[[j, i]]) / (w[i] * w[j])
            };
            c[[i, j]] = v;
            c[[j, i]] = v;
        }
    }
    c
}

fn weighted_objective(
    bary: &GmSpace,
    inputs: &[GmSpace],
    plans: &[TransportPlan],
    weights: &[f64],
) -> Result<f64> {
    let mut total = 0.0;
    for ((x, plan), t) in inputs.iter().zip(plans).zip(weights) {
        total += t * gw_objective(plan.matrix.view(), bary, x)?;
    }
    Ok(total)
}

/// Fixed-support GW barycenter by block-coordinate descent: alternately
/// re-solve every coupling (warm-started from the previous one) and update
/// the barycenter gauge in closed form. Inputs must carry unit mass.
pub fn gw_barycenter(inputs: &[GmSpace], cfg: &BarycenterConfig) -> Result<Barycenter> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument(
            "barycenter of an empty input list".into(),
        ));
    }
    let n0 = cfg.support_size;
    if n0 == 0 {
        return Err(Error::InvalidArgument(
            "barycenter support must be non-empty".into(),
        ));
    }
    for (k, x) in inputs.iter().enumerate() {
        if (x.total_mass() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "input {k} has total mass {}, expected 1",
                x.total_mass()
            )));
        }
    }
    let weights = if cfg.weights.is_empty() {
        vec![1.0 / inputs.len() as f64; inputs.len()]
    } else {
        cfg.weights.clone()
    };
    if weights.len() != inputs.len()
        || weights.iter().any(|t| !(*t >= 0.0))
        || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidArgument(
            "barycenter weights must be a probability vector over the inputs".into(),
        ));
    }
    let zero_diagonal = inputs
        .iter()
        .all(|x| x.gauge().diag().iter().all(|v| *v == 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w = Array1::from_elem(n0, 1.0 / n0 as f64);
    let mut bary = GmSpace::from_gauge(initial_gauge(inputs, n0, &mut rng), w.clone())?;

    let mut plans: Vec<TransportPlan> = inputs
        .par_iter()
        .map(|x| solve_gw(&bary, x, &cfg.fw).map(|(plan, _)| plan))
        .collect::<Result<_>>()?;
    let mut trace = vec![weighted_objective(&bary, inputs, &plans, &weights)?];

    for _ in 0..cfg.outer_iters {
        let c = update_gauge(inputs, &plans, &weights, &w, zero_diagonal);
        bary = GmSpace::from_gauge(c, w.clone())?;
        plans = inputs
            .par_iter()
            .zip(plans.par_iter())
            .map(|(x, prev)| solve_gw_from(&bary, x, prev, &cfg.fw).map(|(plan, _)| plan))
            .collect::<Result<_>>()?;
        let f = weighted_objective(&bary, inputs, &plans, &weights)?;
        let prev = *trace.last().unwrap();
        trace.push(f);
        if (prev - f).abs() <= cfg.fw.rel_tol * prev.abs().max(1e-12) {
            break;
        }
    }

    Ok(Barycenter {
        space: bary,
        objective_trace: trace,
        plans,
    })
}

/// Classical multidimensional scaling of a squared-distance matrix.
///
/// Returns an `n × dim` coordinate matrix whose rows are centered at the
/// origin. Negative eigenvalues of the double-centered matrix are treated as
/// zero.
pub fn classical_mds(gauge: ArrayView2<f64>, dim: usize) -> Result<Array2<f64>> {
    let n = gauge.nrows();
    if gauge.ncols() != n || n == 0 {
        return Err(Error::DimensionMismatch(format!(
            "gauge must be square, got {:?}",
            gauge.dim()
        )));
    }
    if dim > n {
        return Err(Error::InvalidArgument(format!(
            "cannot embed {n} points in {dim} dimensions"
        )));
    }
    for i in 0..n {
        if gauge[[i, i]].abs() > 1e-9 {
            return Err(Error::MalformedInput(format!("nonzero diagonal at {i}")));
        }
        for j in 0..i {
            if (gauge[[i, j]] - gauge[[j, i]]).abs() > 1e-9 * (1.0 + gauge[[i, j]].abs()) {
                return Err(Error::MalformedInput(format!(
                    "gauge not symmetric at ({i},{j})"
                )));
            }
        }
    }
    if n == 1 {
        return Ok(Array2::zeros((1, dim)));
    }

    let row_mean: Vec<f64> = (0..n).map(|i| gauge.row(i).sum() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (gauge[[i, j]] - row_mean[i] - row_mean[j] + grand)
    });
    let b = (&b + b.transpose()) * 0.5;
    let eig = SymmetricEigen::new(b);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        eig.eigenvalues[y]
            .total_cmp(&eig.eigenvalues[x])
            .then(x.cmp(&y))
    });
    let mut coords = Array2::zeros((n, dim));
    for (k, &idx) in order.iter().take(dim).enumerate() {
        let scale = eig.eigenvalues[idx].max(0.0).sqrt();
        let v = eig.eigenvectors.column(idx);
        // fix the sign so the largest-magnitude component is positive
        let pivot = (0..n).fold(0, |best, i| {
            if v[i].abs() > v[best].abs() + 1e-12 {
                i
            } else {
                best
            }
        });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[[i, k]] = sign * v[i] * scale;
        }
    }
    Ok(coords)
}
