//! Agreement metrics between distance matrices, nearest-neighbour
//! classification and kernel export.

use std::fs;
use std::path::Path;

use log::warn;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::pairwise::{labelled_csv, DistanceMatrix};

/// Pairs whose exact value is at most this are dropped from MRE and PCC.
pub const DEFAULT_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub i: String,
    pub j: String,
    pub exact: f64,
    pub approx: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mre: f64,
    pub pcc: f64,
    pub knn_accuracy: Option<f64>,
    pub per_pair_rows: Vec<PairRow>,
}

/// Pearson correlation. Constant series correlate perfectly with an
/// identical series and not at all with anything else.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return if x == y { 1.0 } else { 0.0 };
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Mean relative error and Pearson correlation of the squared values over
/// unordered pairs with `exact > floor`.
pub fn eval_mre_pcc(
    exact: &DistanceMatrix,
    approx: &DistanceMatrix,
    floor: f64,
) -> Result<EvalReport> {
    if exact.ids != approx.ids {
        return Err(Error::DimensionMismatch(
            "distance matrices list different ids".into(),
        ));
    }
    let k = exact.len();
    let mut rows = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let (e, a) = (exact.squared[[i, j]], approx.squared[[i, j]]);
            if e > floor {
                rows.push(PairRow {
                    i: exact.ids[i].clone(),
                    j: exact.ids[j].clone(),
                    exact: e,
                    approx: a,
                    relative_error: (e - a).abs() / e,
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no pair has an exact value above {floor}"
        )));
    }
    let mre = rows.iter().map(|r| r.relative_error).sum::<f64>() / rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.exact).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.approx).collect();
    Ok(EvalReport {
        mre,
        pcc: pearson(&xs, &ys),
        knn_accuracy: None,
        per_pair_rows: rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnReport {
    pub accuracy: f64,
    pub classes: Vec<String>,
    /// `confusion[t][p]` counts items of class `t` assigned to class `p`,
    /// summed over trials.
    pub confusion: Vec<Vec<usize>>,
    pub trials: usize,
}

fn class_index(labels: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut classes: Vec<String> = Vec::new();
    let idx = labels
        .iter()
        .map(|l| match classes.iter().position(|c| c == l) {
            Some(c) => c,
            None => {
                classes.push(l.clone());
                classes.len() - 1
            }
        })
        .collect();
    (classes, idx)
}

/// Index in `candidates` of the closest to `item`; ties go to the lowest
/// matrix index.
fn nearest(dm: &DistanceMatrix, item: usize, candidates: &[usize]) -> usize {
    let mut best = 0;
    for (c, &cand) in candidates.iter().enumerate().skip(1) {
        let (d, db) = (dm.values[[item, cand]], dm.values[[item, candidates[best]]]);
        if d < db || (d == db && cand < candidates[best]) {
            best = c;
        }
    }
    best
}

/// Nearest-representative classification: each trial draws one random
/// representative per class and labels every other shape after its closest
/// representative. Accuracy is averaged over trials.
pub fn knn_classify(
    dm: &DistanceMatrix,
    labels: &[String],
    trials: usize,
    seed: u64,
) -> Result<KnnReport> {
    if labels.len() != dm.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} shapes",
            labels.len(),
            dm.len()
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let (classes, class_of) = class_index(labels);
    if classes.len() < 2 {
        return Err(Error::InvalidArgument(
            "classification needs at least two labels".into(),
        ));
    }
    let members: Vec<Vec<usize>> = (0..classes.len())
        .map(|c| (0..dm.len()).filter(|&i| class_of[i] == c).collect())
        .collect();
    for (c, m) in members.iter().enumerate() {
        if m.len() < 2 {
            warn!(
                "class '{}' has a single member and contributes no test items",
                classes[c]
            );
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
    let mut acc_sum = 0.0;
    for _ in 0..trials {
        let reps: Vec<usize> = members
            .iter()
            .map(|m| m[rng.random_range(0..m.len())])
            .collect();
        let (mut correct, mut total) = (0usize, 0usize);
        for item in (0..dm.len()).filter(|i| !reps.contains(i)) {
            let predicted = nearest(dm, item, &reps);
            confusion[class_of[item]][predicted] += 1;
            correct += usize::from(predicted == class_of[item]);
            total += 1;
        }
        acc_sum += if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        };
    }
    Ok(KnnReport {
        accuracy: acc_sum / trials as f64,
        classes,
        confusion,
        trials,
    })
}

/// 1-NN accuracy of `test` items against labelled `train` items.
pub fn nearest_neighbor_accuracy(
    dm: &DistanceMatrix,
    labels: &[String],
    train: &[usize],
    test: &[usize],
) -> Result<f64> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument(
            "train and test sets must be non-empty".into(),
        ));
    }
    if labels.len() != dm.len() || train.iter().chain(test).any(|&i| i >= dm.len()) {
        return Err(Error::DimensionMismatch(
            "index or label out of range".into(),
        ));
    }
    let correct = test
        .iter()
        .filter(|&&t| labels[train[nearest(dm, t, train)]] == labels[t])
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// `exp(-σ D̂)` where `D̂` is the distance matrix min-max scaled to `[0, 1]`.
pub fn kernel_matrix(dm: &DistanceMatrix, sigma: f64) -> Result<Array2<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let lo = dm.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = dm.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    Ok(dm.values.mapv(|d| {
        let scaled = if span > 0.0 { (d - lo) / span } else { 0.0 };
        (-sigma * scaled).exp()
    }))
}

/// Writes [`kernel_matrix`] as CSV with an `id` header column.
pub fn export_kernel(
    dm: &DistanceMatrix,
    sigma: f64,
    path: impl AsRef<Path>,
) -> Result<Array2<f64>> {
    let kernel = kernel_matrix(dm, sigma)?;
    let path = path.as_ref();
    fs::write(path, labelled_csv(&dm.ids, &kernel)).map_err(|e| Error::io(path, e))?;
    Ok(kernel)
}
