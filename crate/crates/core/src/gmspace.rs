//! Discrete gauged measure spaces.
//!
//! A [`GmSpace`] is a finite set of atoms carrying a symmetric gauge matrix
//! (pairwise interaction) and a nonnegative mass vector. Spaces are either
//! backed by a point cloud, in which case the gauge is derived from the
//! coordinates, or carry a precomputed gauge with no coordinates.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// How the gauge matrix is obtained from the atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeKind {
    /// `g(x, x') = |x - x'|^2`
    SquaredEuclidean,
    /// `g(x, x') = <x, x'>`
    InnerProduct,
    /// Externally supplied matrix; no coordinates.
    Precomputed,
}

impl GaugeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GaugeKind::SquaredEuclidean => "squared_euclidean",
            GaugeKind::InnerProduct => "inner_product",
            GaugeKind::Precomputed => "precomputed",
        }
    }

    /// Gauge value between two coordinate vectors. Panics for `Precomputed`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            GaugeKind::SquaredEuclidean => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
            GaugeKind::InnerProduct => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            GaugeKind::Precomputed => panic!("precomputed gauges have no coordinate formula"),
        }
    }
}

impl FromStr for GaugeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "squared_euclidean" | "sqeuclidean" => Ok(GaugeKind::SquaredEuclidean),
            "inner_product" | "inner" => Ok(GaugeKind::InnerProduct),
            "precomputed" => Ok(GaugeKind::Precomputed),
            other => Err(Error::InvalidArgument(format!(
                "unknown gauge kind '{other}'"
            ))),
        }
    }
}

/// Builds the dense gauge matrix of a point cloud (rows are points).
pub fn gauge_matrix(points: ArrayView2<f64>, kind: GaugeKind) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = points.rows().into_iter().map(|r| r.to_vec()).collect();
    let n = rows.len();
    let mut g = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = match kind {
                GaugeKind::SquaredEuclidean if i == j => 0.0,
                _ => kind.eval(&rows[i], &rows[j]),
            };
            g[[i, j]] = v;
            g[[j, i]] = v;
        }
    }
    g
}

/// A discrete gauged measure space.
#[derive(Clone, Debug, PartialEq)]
pub struct GmSpace {
    points: Option<Array2<f64>>,
    gauge: Array2<f64>,
    mass: Array1<f64>,
    kind: GaugeKind,
}

fn check_mass(mass: &Array1<f64>) -> Result<()> {
    for (index, &value) in mass.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::NegativeMass { index, value });
        }
    }
    let total = mass.sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ZeroMass(total));
    }
    Ok(())
}

impl GmSpace {
    /// Builds a point-backed space. `points` has one row per atom.
    pub fn from_points(points: Array2<f64>, mass: Array1<f64>, kind: GaugeKind) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::MalformedInput(
                "a space needs at least one atom".into(),
            ));
        }
        if mass.len() != points.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} masses",
                points.nrows(),
                mass.len()
            )));
        }
        if kind == GaugeKind::Precomputed {
            return Err(Error::InvalidArgument(
                "point-backed spaces need a coordinate gauge".into(),
            ));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedInput("non-finite coordinate".into()));
        }
        check_mass(&mass)?;
        let gauge = gauge_matrix(points.view(), kind);
        Ok(GmSpace {
            points: Some(points),
            gauge,
            mass,
            kind,
        })
    }

    /// Convenience constructor from a list of coordinate rows.
    pub fn from_rows(rows: &[Vec<f64>], mass: Vec<f64>, kind: GaugeKind) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch(
                "rows have different lengths".into(),
            ));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let points = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Self::from_points(points, Array1::from(mass), kind)
    }

    /// Builds a space from an explicit gauge matrix.
    pub fn from_gauge(gauge: Array2<f64>, mass: Array1<f64>) -> Result<Self> {
        let n = gauge.nrows();
        if n == 0 || gauge.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "gauge must be square and non-empty, got {:?}",
                gauge.dim()
            )));
        }
        if mass.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "gauge is {n}x{n} but mass has {} entries",
                mass.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (gauge[[i, j]], gauge[[j, i]]);
                if !a.is_finite() {
                    return Err(Error::MalformedInput(format!(
                        "non-finite gauge entry ({i},{j})"
                    )));
                }
                if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::MalformedInput(format!(
                        "gauge is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        check_mass(&mass)?;
        Ok(GmSpace {
            points: None,
            gauge,
            mass,
            kind: GaugeKind::Precomputed,
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn points(&self) -> Option<&Array2<f64>> {
        self.points.as_ref()
    }

    /// Coordinate dimension, or `None` for precomputed spaces.
    pub fn dim(&self) -> Option<usize> {
        self.points.as_ref().map(|p| p.ncols())
    }

    pub fn gauge(&self) -> &Array2<f64> {
        &self.gauge
    }

    pub fn mass(&self) -> &Array1<f64> {
        &self.mass
    }

    pub fn kind(&self) -> GaugeKind {
        self.kind
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.sum()
    }

    /// Same atoms and gauge, different masses.
    pub fn with_mass(&self, mass: Array1<f64>) -> Result<Self> {
        if mass.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "space has {} atoms but {} masses were given",
                self.len(),
                mass.len()
            )));
        }
        check_mass(&mass)?;
        Ok(GmSpace {
            mass,
            ..self.clone()
        })
    }

    /// Rebuilds the gauge from the points under a different kind.
    pub fn regauge(&self, kind: GaugeKind) -> Result<Self> {
        match &self.points {
            Some(p) => Self::from_points(p.clone(), self.mass.clone(), kind),
            None => Err(Error::InvalidArgument(
                "precomputed spaces cannot be re-gauged".into(),
            )),
        }
    }

    /// Uniformly rescales the points so the diameter is 1.
    pub fn normalize_scale(&self) -> Result<Self> {
        let points = match (&self.points, self.kind) {
            (Some(p), GaugeKind::SquaredEuclidean) => p,
            _ => {
                return Err(Error::InvalidArgument(
                    "scale normalization needs a squared-Euclidean point cloud".into(),
                ))
            }
        };
        if self.len() < 2 {
            return Err(Error::NoScale);
        }
        let max_sq = self.gauge.iter().copied().fold(0.0_f64, f64::max);
        if !(max_sq > 0.0) {
            return Err(Error::NoScale);
        }
        let scale = 1.0 / max_sq.sqrt();
        let scaled = points.mapv(|v| v * scale);
        let mut out = Self::from_points(scaled, self.mass.clone(), self.kind)?;
        // rounding can leave the diameter a few ulps away from 1
        let max_now = out.gauge.iter().copied().fold(0.0_f64, f64::max);
        if max_now != 1.0 {
            out.gauge.mapv_inplace(|v| v / max_now);
        }
        Ok(out)
    }

    /// Scales the masses so they sum to `target_total`.
    pub fn normalize_mass(&self, target_total: f64) -> Result<Self> {
        if !(target_total > 0.0) || !target_total.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "target mass must be positive, got {target_total}"
            )));
        }
        let total = self.total_mass();
        if !(total > 0.0) {
            return Err(Error::ZeroMass(total));
        }
        let factor = target_total / total;
        Ok(GmSpace {
            mass: self.mass.mapv(|m| m * factor),
            ..self.clone()
        })
    }

    /// Parses the point-cloud CSV format: `d` coordinate columns followed by
    /// one mass column per row.
    pub fn parse_pointcloud(text: &str, header: bool, kind: GaugeKind) -> Result<Self> {
        let mut rows = Vec::new();
        let mut masses = Vec::new();
        let mut dim = None;
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        if header {
            lines.next();
        }
        for (lineno, line) in lines {
            let fields = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::MalformedInput(format!("line {}: {e}", lineno + 1)))?;
            if fields.len() < 2 {
                return Err(Error::MalformedInput(format!(
                    "line {}: expected coordinates followed by a mass",
                    lineno + 1
                )));
            }
            let d = fields.len() - 1;
            if *dim.get_or_insert(d) != d {
                return Err(Error::MalformedInput(format!(
                    "line {}: inconsistent dimension {d}",
                    lineno + 1
                )));
            }
            masses.push(fields[d]);
            rows.push(fields[..d].to_vec());
        }
        if rows.is_empty() {
            return Err(Error::MalformedInput("empty point cloud".into()));
        }
        Self::from_rows(&rows, masses, kind)
    }

    pub fn read_pointcloud(path: impl AsRef<Path>, header: bool, kind: GaugeKind) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_pointcloud(&text, header, kind)
    }

    pub fn to_pointcloud_csv(&self) -> Result<String> {
        let points = self.points.as_ref().ok_or_else(|| {
            Error::InvalidArgument("precomputed spaces have no coordinates to write".into())
        })?;
        let mut out = String::new();
        for (row, m) in points.rows().into_iter().zip(self.mass.iter()) {
            for v in row.iter() {
                write!(out, "{v},").unwrap();
            }
            writeln!(out, "{m}").unwrap();
        }
        Ok(out)
    }

    pub fn write_pointcloud(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_pointcloud_csv()?).map_err(|e| Error::io(path, e))
    }
}
