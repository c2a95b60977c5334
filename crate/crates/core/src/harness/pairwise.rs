//! Pairwise distance matrices, either from direct (P)GW solves or from
//! linear embeddings against a shared reference.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fw::{solve_gw, solve_pgw, FwConfig};
use crate::harness::data::Dataset;
use crate::linearize::{algw_distance, alpgw_distance, embed_lgw, embed_lpgw, Reference};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "GW")]
    Gw,
    #[serde(rename = "PGW")]
    Pgw,
    #[serde(rename = "aLGW")]
    Algw,
    #[serde(rename = "aLPGW")]
    Alpgw,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Gw => "GW",
            Method::Pgw => "PGW",
            Method::Algw => "aLGW",
            Method::Alpgw => "aLPGW",
        }
    }

    pub fn needs_reference(&self) -> bool {
        matches!(self, Method::Algw | Method::Alpgw)
    }

    pub fn needs_lambda(&self) -> bool {
        matches!(self, Method::Pgw | Method::Alpgw)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gw" => Ok(Method::Gw),
            "pgw" => Ok(Method::Pgw),
            "algw" => Ok(Method::Algw),
            "alpgw" => Ok(Method::Alpgw),
            _ => Err(Error::InvalidArgument(format!(
                "unknown method '{s}', expected gw, pgw, algw or alpgw"
            ))),
        }
    }
}

/// Symmetric matrix of distances between named shapes.
///
/// `values` holds `sqrt(max(d², 0))`; `squared` holds the raw discrepancies.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    pub ids: Vec<String>,
    pub values: Array2<f64>,
    pub squared: Array2<f64>,
    pub method: Method,
    pub lambda: Option<f64>,
    pub reference_id: Option<String>,
    pub solver_calls: usize,
    pub wall_clock_seconds: f64,
}

/// Everything except the distances and the timing, stored next to the CSV.
#[derive(Serialize, Deserialize)]
struct Sidecar {
    method: Method,
    lambda: Option<f64>,
    reference_id: Option<String>,
    solver_calls: usize,
    squared: Vec<Vec<f64>>,
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    csv.with_file_name(name)
}

/// Writes a square matrix as CSV with an `id` header column.
pub(crate) fn labelled_csv(ids: &[String], m: &Array2<f64>) -> String {
    let mut out = String::from("id");
    for id in ids {
        write!(out, ",{id}").unwrap();
    }
    out.push('\n');
    for (id, row) in ids.iter().zip(m.rows()) {
        out.push_str(id);
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn parse_labelled_csv(text: &str) -> Result<(Vec<String>, Array2<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedInput("empty distance matrix".into()))?;
    let ids: Vec<String> = header
        .split(',')
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    let k = ids.len();
    let mut values = Array2::zeros((k, k));
    let mut count = 0;
    for (i, line) in lines.enumerate() {
        if i >= k {
            return Err(Error::MalformedInput(format!("more than {k} rows")));
        }
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default().trim();
        if id != ids[i] {
            return Err(Error::MalformedInput(format!(
                "row {i} is labelled '{id}', header says '{}'",
                ids[i]
            )));
        }
        let row: Vec<f64> = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::MalformedInput(format!("row {i}: {e}")))?;
        if row.len() != k {
            return Err(Error::MalformedInput(format!(
                "row {i} has {} values, expected {k}",
                row.len()
            )));
        }
        for (j, v) in row.into_iter().enumerate() {
            values[[i, j]] = v;
        }
        count += 1;
    }
    if count != k {
        return Err(Error::MalformedInput(format!("{count} rows for {k} ids")));
    }
    Ok((ids, values))
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn to_csv(&self) -> String {
        labelled_csv(&self.ids, &self.values)
    }

    /// Writes the distances to `path` and the squared values plus metadata
    /// to `<path>.meta.json`. Timing is left out so reruns are byte-identical.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))?;
        let meta = Sidecar {
            method: self.method,
            lambda: self.lambda,
            reference_id: self.reference_id.clone(),
            solver_calls: self.solver_calls,
            squared: self
                .squared
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
        };
        let side = sidecar_path(path);
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        fs::write(&side, text).map_err(|e| Error::io(&side, e))
    }

    /// Reads a matrix written by [`DistanceMatrix::write`]. Without a sidecar
    /// the method defaults to `default_method` and the squared values are the
    /// squares of the distances.
    pub fn read(path: impl AsRef<Path>, default_method: Method) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (ids, values) = parse_labelled_csv(&text)?;
        let side = sidecar_path(path);
        let mut dm = DistanceMatrix {
            squared: values.mapv(|v| v * v),
            ids,
            values,
            method: default_method,
            lambda: None,
            reference_id: None,
            solver_calls: 0,
            wall_clock_seconds: 0.0,
        };
        if side.exists() {
            let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
            let meta: Sidecar = serde_json::from_str(&text)?;
            let k = dm.len();
            if meta.squared.len() != k || meta.squared.iter().any(|r| r.len() != k) {
                return Err(Error::MalformedInput(format!(
                    "{} does not match a {k}x{k} matrix",
                    side.display()
                )));
            }
            dm.squared = Array2::from_shape_fn((k, k), |(i, j)| meta.squared[i][j]);
            dm.method = meta.method;
            dm.lambda = meta.lambda;
            dm.reference_id = meta.reference_id;
            dm.solver_calls = meta.solver_calls;
        }
        Ok(dm)
    }

    /// Largest `|d_ij - d_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let k = self.len();
        let mut worst = 0.0_f64;
        for i in 0..k {
            for j in 0..i {
                worst = worst.max((self.values[[i, j]] - self.values[[j, i]]).abs());
            }
        }
        worst
    }
}

#[derive(Clone, Debug, Default)]
pub struct PairwiseConfig {
    pub fw: FwConfig,
    /// Worker threads; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidArgument("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn upper_pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .collect()
}

fn fill_symmetric(k: usize, pairs: &[(usize, usize)], vals: &[f64]) -> Array2<f64> {
    let mut m = Array2::zeros((k, k));
    for (&(i, j), &v) in pairs.iter().zip(vals) {
        m[[i, j]] = v;
        m[[j, i]] = v;
    }
    m
}

/// All pairwise distances of a dataset.
///
/// GW and PGW solve every unordered pair (`K(K-1)/2` solver calls). aLGW and
/// aLPGW embed each shape once against `reference` (`K` calls) and compare
/// embeddings in closed form. Results do not depend on thread scheduling.
pub fn pairwise(
    data: &Dataset,
    method: Method,
    lambda: Option<f64>,
    reference: Option<&Reference>,
    cfg: &PairwiseConfig,
) -> Result<DistanceMatrix> {
    let lambda = if method.needs_lambda() {
        Some(lambda.ok_or_else(|| Error::InvalidArgument(format!("{method} needs --lambda")))?)
    } else {
        None
    };
    let reference = if method.needs_reference() {
        Some(
            reference
                .ok_or_else(|| Error::InvalidArgument(format!("{method} needs a reference")))?,
        )
    } else {
        None
    };
    let k = data.len();
    let pairs = upper_pairs(k);
    let calls = AtomicUsize::new(0);
    let spaces = &data.spaces;
    let start = Instant::now();

    let squared: Vec<f64> = in_pool(cfg.jobs, || -> Result<Vec<f64>> {
        match (method, lambda, reference) {
            (Method::Gw, _, _) => pairs
                .par_iter()
                .map(|&(i, j)| {
                    calls.fetch_add(1, Ordering::Relaxed);
                    solve_gw(&spaces[i], &spaces[j], &cfg.fw).map(|(_, r)| r.objective)
                })
                .collect(),
            (Method::Pgw, Some(l), _) => pairs
                .par_iter()
                .map(|&(i, j)| {
                    calls.fetch_add(1, Ordering::Relaxed);
                    solve_pgw(&spaces[i], &spaces[j], l, &cfg.fw).map(|(_, r)| r.objective)
                })
                .collect(),
            (Method::Algw, _, Some(r)) => {
                let emb = spaces
                    .par_iter()
                    .map(|s| {
                        calls.fetch_add(1, Ordering::Relaxed);
                        embed_lgw(r, s, &cfg.fw)
                    })
                    .collect::<Result<Vec<_>>>()?;
                pairs
                    .iter()
                    .map(|&(i, j)| algw_distance(&emb[i], &emb[j]))
                    .collect()
            }
            (Method::Alpgw, Some(l), Some(r)) => {
                let emb = spaces
                    .par_iter()
                    .map(|s| {
                        calls.fetch_add(1, Ordering::Relaxed);
                        embed_lpgw(r, s, l, &cfg.fw)
                    })
                    .collect::<Result<Vec<_>>>()?;
                pairs
                    .iter()
                    .map(|&(i, j)| alpgw_distance(&emb[i], &emb[j]))
                    .collect()
            }
            _ => unreachable!("lambda and reference were checked above"),
        }
    })??;

    let squared = fill_symmetric(k, &pairs, &squared);
    Ok(DistanceMatrix {
        ids: data.ids.clone(),
        values: squared.mapv(|v| v.max(0.0).sqrt()),
        squared,
        method,
        lambda,
        reference_id: reference.map(|r| r.id.clone()),
        solver_calls: calls.into_inner(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::data::ellipse_dataset;

    fn small(k: usize) -> Dataset {
        ellipse_dataset(k, 6, 9, 4).unwrap()
    }

    #[test]
    fn identical_shapes_have_zero_gw() {
        let mut data = small(1);
        data.push("copy", "x", data.spaces[0].clone());
        let dm = pairwise(&data, Method::Gw, None, None, &PairwiseConfig::default()).unwrap();
        assert!(dm.values.iter().all(|v| v.abs() < 1e-6));
        assert_eq!(dm.solver_calls, 1);
    }

    #[test]
    fn call_counts_follow_the_pipeline() {
        let data = small(5);
        let cfg = PairwiseConfig::default();
        let pgw = pairwise(&data, Method::Pgw, Some(0.5), None, &cfg).unwrap();
        assert_eq!(pgw.solver_calls, 10);
        let reference = Reference::new("r", data.spaces[0].clone());
        let lin = pairwise(&data, Method::Alpgw, Some(0.5), Some(&reference), &cfg).unwrap();
        assert_eq!(lin.solver_calls, 5);
        assert_eq!(lin.reference_id.as_deref(), Some("r"));
        assert_eq!(lin.asymmetry(), 0.0);
    }

    #[test]
    fn missing_inputs_are_rejected() {
        let data = small(2);
        let cfg = PairwiseConfig::default();
        assert!(pairwise(&data, Method::Pgw, None, None, &cfg).is_err());
        assert!(pairwise(&data, Method::Algw, None, None, &cfg).is_err());
        let jobs = PairwiseConfig {
            jobs: Some(0),
            ..PairwiseConfig::default()
        };
        assert!(pairwise(&data, Method::Gw, None, None, &jobs).is_err());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let data = small(4);
        let one = PairwiseConfig {
            jobs: Some(1),
            ..PairwiseConfig::default()
        };
        let four = PairwiseConfig {
            jobs: Some(4),
            ..PairwiseConfig::default()
        };
        let a = pairwise(&data, Method::Pgw, Some(0.2), None, &one).unwrap();
        let b = pairwise(&data, Method::Pgw, Some(0.2), None, &four).unwrap();
        assert_eq!(a.squared, b.squared);
    }

    #[test]
    fn csv_round_trip() {
        let data = small(3);
        let dm = pairwise(
            &data,
            Method::Pgw,
            Some(0.3),
            None,
            &PairwiseConfig::default(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        dm.write(&path).unwrap();
        let back = DistanceMatrix::read(&path, Method::Gw).unwrap();
        assert_eq!(back.ids, dm.ids);
        assert_eq!(back.values, dm.values);
        assert_eq!(back.squared, dm.squared);
        assert_eq!(back.method, Method::Pgw);
        assert_eq!(back.lambda, Some(0.3));
        assert!(fs::read_to_string(&path)
            .unwrap()
            .starts_with("id,ellipse_000,"));
        assert!(parse_labelled_csv("id,a\nb,0\n").is_err());
        assert!(parse_labelled_csv("id,a,b\na,0,1\n").is_err());
    }

    #[test]
    fn method_names() {
        for m in [Method::Gw, Method::Pgw, Method::Algw, Method::Alpgw] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("lgw".parse::<Method>().is_err());
    }
}
