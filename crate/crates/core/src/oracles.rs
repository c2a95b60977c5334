//! Brute-force references for desk-scale instances.
//!
//! These never call into the Frank-Wolfe or network simplex code, so they
//! can be used to check them.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gmspace::GmSpace;
use crate::transport::TransportPlan;

pub const MAX_PERMUTATION_SIZE: usize = 8;
pub const MAX_GRID_CELLS: usize = 6;
pub const MAX_GRID_STEPS: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub argmin_description: String,
    pub enumerated_count: u64,
}

/// Direct quadruple sum for a permutation coupling with atom mass `w`.
fn permutation_cost(ga: &Array2<f64>, gb: &Array2<f64>, perm: &[usize], w: f64) -> f64 {
    let n = perm.len();
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..n {
            let d = ga[[i, k]] - gb[[perm[i], perm[k]]];
            s += d * d;
        }
    }
    s * w * w
}

/// Exact GW minimum over permutation couplings of two uniform spaces of the
/// same size and mass. For squared-Euclidean gauges this is the global GW
/// optimum, since the objective is concave along the transport polytope.
pub fn gw_permutation_oracle(a: &GmSpace, b: &GmSpace) -> Result<OracleResult> {
    let n = a.len();
    if n != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{n} vs {} atoms",
            b.len()
        )));
    }
    if n > MAX_PERMUTATION_SIZE {
        return Err(Error::SizeGuard(format!(
            "{n}! permutations exceeds the n <= {MAX_PERMUTATION_SIZE} guard"
        )));
    }
    let w = a.mass()[0];
    let uniform = a
        .mass()
        .iter()
        .chain(b.mass().iter())
        .all(|m| (m - w).abs() <= 1e-12 * w.max(1.0));
    if !uniform {
        return Err(Error::InvalidArgument(
            "permutation oracle needs uniform, equal masses".into(),
        ));
    }
    let (ga, gb) = (a.gauge(), b.gauge());
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = permutation_cost(ga, gb, &perm, w);
    let mut best_perm = perm.clone();
    let mut count = 1u64;
    // Heap's algorithm
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let v = permutation_cost(ga, gb, &perm, w);
            count += 1;
            if v < best {
                best = v;
                best_perm = perm.clone();
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(OracleResult {
        value: best,
        argmin_description: format!("permutation {best_perm:?}"),
        enumerated_count: count,
    })
}

/// Minimum of `⟨cost, γ⟩` over a grid inside `Γ_≤(p, q)`.
///
/// Cell `(i, j)` takes values `k · min(p_i, q_j) / grid_steps`; grid points
/// violating a marginal bound are skipped. The result upper-bounds the LP
/// optimum and is exact whenever an optimal vertex lies on the grid (for
/// masses on a `0.25` lattice up to 1, `grid_steps = 24` suffices).
pub fn partial_ot_grid_oracle(
    cost: ArrayView2<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    grid_steps: usize,
) -> Result<OracleResult> {
    let (n, m) = cost.dim();
    if p.len() != n || q.len() != m {
        return Err(Error::DimensionMismatch(
            "cost and marginals disagree".into(),
        ));
    }
    if n * m > MAX_GRID_CELLS || grid_steps == 0 || grid_steps > MAX_GRID_STEPS {
        return Err(Error::SizeGuard(format!(
            "{n}x{m} grid with {grid_steps} steps exceeds {MAX_GRID_CELLS} cells / {MAX_GRID_STEPS} steps"
        )));
    }
    struct Search<'a> {
        cost: ArrayView2<'a, f64>,
        steps: usize,
        m: usize,
        row_left: Vec<f64>,
        col_left: Vec<f64>,
        current: Vec<f64>,
        best: f64,
        best_plan: Vec<f64>,
        count: u64,
        /// Lower bound on what cells `idx..` can still contribute.
        tail_bound: Vec<f64>,
        step: Vec<f64>,
    }
    impl Search<'_> {
        fn go(&mut self, idx: usize, value: f64) {
            if idx == self.current.len() {
                self.count += 1;
                if value < self.best {
                    self.best = value;
                    self.best_plan = self.current.clone();
                }
                return;
            }
            if value + self.tail_bound[idx] >= self.best {
                self.count += 1;
                return;
            }
            let (i, j) = (idx / self.m, idx % self.m);
            let cap = self.row_left[i].min(self.col_left[j]);
            let h = self.step[idx];
            for k in 0..=self.steps {
                let x = k as f64 * h;
                if x > cap + 1e-12 {
                    break;
                }
                self.row_left[i] -= x;
                self.col_left[j] -= x;
                self.current[idx] = x;
                self.go(idx + 1, value + self.cost[[i, j]] * x);
                self.row_left[i] += x;
                self.col_left[j] += x;
            }
            self.current[idx] = 0.0;
        }
    }
    let step: Vec<f64> = (0..n * m)
        .map(|idx| p[idx / m].min(q[idx % m]) / grid_steps as f64)
        .collect();
    let mut tail_bound = vec![0.0; n * m + 1];
    for idx in (0..n * m).rev() {
        let (i, j) = (idx / m, idx % m);
        tail_bound[idx] = tail_bound[idx + 1] + cost[[i, j]].min(0.0) * p[i].min(q[j]);
    }
    let mut search = Search {
        cost,
        steps: grid_steps,
        m,
        row_left: p.to_vec(),
        col_left: q.to_vec(),
        current: vec![0.0; n * m],
        best: 0.0,
        best_plan: vec![0.0; n * m],
        count: 0,
        tail_bound,
        step,
    };
    search.go(0, 0.0);
    Ok(OracleResult {
        value: search.best,
        argmin_description: format!("grid plan {:?}", search.best_plan),
        enumerated_count: search.count.max(1),
    })
}

/// Random plans in `Γ_≤(p, q)`.
///
/// Each plan mixes two randomly scaled greedy vertices (cells visited in a
/// random order, each filled with what its row and column still allow).
pub fn random_feasible_plans(
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    count: usize,
    seed: u64,
) -> Vec<TransportPlan> {
    let (n, m) = (p.len(), q.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let mut vertex = |rng: &mut ChaCha8Rng| {
        cells.shuffle(rng);
        let mut row = p.to_vec();
        let mut col = q.to_vec();
        let mut g = Array2::<f64>::zeros((n, m));
        for &(i, j) in cells.iter() {
            let x = row[i].min(col[j]).max(0.0);
            g[[i, j]] = x;
            row[i] -= x;
            col[j] -= x;
        }
        g
    };
    (0..count)
        .map(|_| {
            let s1: f64 = rng.random();
            let s2: f64 = rng.random();
            let t: f64 = rng.random();
            let v1 = vertex(&mut rng) * s1;
            let v2 = vertex(&mut rng) * s2;
            // shave a few ulps so accumulated rounding cannot exceed the bounds
            let matrix = (v1 * t + v2 * (1.0 - t)) * (1.0 - 1e-12);
            TransportPlan::new(matrix, p.to_owned(), q.to_owned())
        })
        .collect()
}

/// Uniform mass vector helper for oracle instances.
pub fn uniform_mass(n: usize, total: f64) -> Array1<f64> {
    Array1::from_elem(n, total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmspace::GaugeKind;
    use ndarray::array;

    fn two_point(d: f64) -> GmSpace {
        GmSpace::from_gauge(array![[0.0, d], [d, 0.0]], array![0.5, 0.5]).unwrap()
    }

    #[test]
    fn permutation_oracle_examples() {
        let a = two_point(1.0);
        let r = gw_permutation_oracle(&a, &a).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.enumerated_count, 2);
        let r = gw_permutation_oracle(&a, &two_point(2.0)).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn permutation_oracle_guards() {
        let rows: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64]).collect();
        let big = GmSpace::from_rows(&rows, vec![1.0; 9], GaugeKind::SquaredEuclidean).unwrap();
        assert!(matches!(
            gw_permutation_oracle(&big, &big),
            Err(Error::SizeGuard(_))
        ));
        let skew = GmSpace::from_gauge(array![[0.0, 1.0], [1.0, 0.0]], array![0.2, 0.8]).unwrap();
        assert!(gw_permutation_oracle(&skew, &skew).is_err());
    }

    #[test]
    fn permutation_count_is_factorial() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let s = GmSpace::from_rows(&rows, vec![0.2; 5], GaugeKind::SquaredEuclidean).unwrap();
        assert_eq!(gw_permutation_oracle(&s, &s).unwrap().enumerated_count, 120);
    }

    #[test]
    fn grid_oracle_examples() {
        let r = partial_ot_grid_oracle(
            array![[-2.0]].view(),
            array![1.0].view(),
            array![0.3].view(),
            32,
        )
        .unwrap();
        assert!((r.value + 0.6).abs() < 0.02);
        let c = array![[1.0, 2.0], [0.5, 3.0]];
        let p = array![0.5, 0.5];
        let r = partial_ot_grid_oracle(c.view(), p.view(), p.view(), 8).unwrap();
        assert_eq!(r.value, 0.0);
        let big = Array2::<f64>::zeros((3, 3));
        let p3 = array![1.0, 1.0, 1.0];
        assert!(matches!(
            partial_ot_grid_oracle(big.view(), p3.view(), p3.view(), 4),
            Err(Error::SizeGuard(_))
        ));
        assert!(partial_ot_grid_oracle(c.view(), p.view(), p.view(), 33).is_err());
    }

    #[test]
    fn random_plans_are_feasible() {
        let plans = random_feasible_plans(array![1.0].view(), array![1.0].view(), 3, 1);
        assert_eq!(plans.len(), 3);
        for pl in &plans {
            assert!((0.0..=1.0).contains(&pl.matrix[[0, 0]]));
        }
        let p = array![0.3, 0.5, 0.2];
        let q = array![0.6, 0.1, 0.1, 0.5];
        let plans = random_feasible_plans(p.view(), q.view(), 50, 7);
        for pl in &plans {
            pl.check_partial(0.0).unwrap();
        }
        let mix = TransportPlan::new(
            (&plans[0].matrix + &plans[1].matrix) * 0.5,
            p.clone(),
            q.clone(),
        );
        mix.check_partial(1e-15).unwrap();
        assert_eq!(plans, random_feasible_plans(p.view(), q.view(), 50, 7));
    }
}
