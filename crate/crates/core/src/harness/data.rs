//! Synthetic shape collections, noise corruption and manifests.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmspace::{GaugeKind, GmSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Point-cloud CSV, relative to the manifest's directory.
    pub path: String,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub shapes: Vec<ManifestEntry>,
    pub gauge_kind: GaugeKind,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Shapes held in memory, in manifest order.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub labels: Vec<String>,
    pub spaces: Vec<GmSpace>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn push(&mut self, id: impl Into<String>, label: impl Into<String>, space: GmSpace) {
        self.ids.push(id.into());
        self.labels.push(label.into());
        self.spaces.push(space);
    }

    /// Loads every shape listed in a manifest file.
    pub fn load(manifest_path: impl AsRef<Path>, header: bool) -> Result<Self> {
        let manifest_path = manifest_path.as_ref();
        let manifest = Manifest::read(manifest_path)?;
        let dir = manifest_path.parent().unwrap_or(Path::new(""));
        let mut data = Dataset::default();
        for entry in &manifest.shapes {
            let space =
                GmSpace::read_pointcloud(dir.join(&entry.path), header, manifest.gauge_kind)?;
            data.push(entry.id.clone(), entry.label.clone(), space);
        }
        if data.is_empty() {
            return Err(Error::MalformedInput(format!(
                "manifest {} lists no shapes",
                manifest_path.display()
            )));
        }
        Ok(data)
    }

    /// Writes one `<id>.csv` per shape plus `manifest.json` into `out_dir`.
    pub fn write(&self, out_dir: impl AsRef<Path>) -> Result<Manifest> {
        let out_dir = out_dir.as_ref();
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let mut shapes = Vec::with_capacity(self.len());
        for ((id, label), space) in self.ids.iter().zip(&self.labels).zip(&self.spaces) {
            let file = format!("{id}.csv");
            space.write_pointcloud(out_dir.join(&file))?;
            shapes.push(ManifestEntry {
                id: id.clone(),
                path: file,
                label: label.clone(),
            });
        }
        let gauge_kind = self
            .spaces
            .first()
            .map_or(GaugeKind::SquaredEuclidean, |s| s.kind());
        let manifest = Manifest { shapes, gauge_kind };
        manifest.write(manifest_path(out_dir))?;
        Ok(manifest)
    }

    /// The first shape of every label, in order of first appearance.
    pub fn one_per_label(&self) -> Vec<usize> {
        let mut seen: Vec<&str> = Vec::new();
        let mut picks = Vec::new();
        for (i, label) in self.labels.iter().enumerate() {
            if !seen.contains(&label.as_str()) {
                seen.push(label);
                picks.push(i);
            }
        }
        picks
    }
}

pub fn manifest_path(dir: impl AsRef<Path>) -> PathBuf {
    dir.as_ref().join("manifest.json")
}

fn check_sizes(n_min: usize, n_max: usize) -> Result<()> {
    if n_min < 3 || n_max < n_min {
        return Err(Error::InvalidArgument(format!(
            "shape sizes need 3 <= n_min <= n_max, got [{n_min}, {n_max}]"
        )));
    }
    Ok(())
}

/// Unit-mass planar shape from raw points, rescaled so its largest gauge
/// entry is 1.
fn finish_shape(points: Array2<f64>) -> Result<GmSpace> {
    let n = points.nrows();
    let mass = Array1::from_elem(n, 1.0 / n as f64);
    GmSpace::from_points(points, mass, GaugeKind::SquaredEuclidean)?.normalize_scale()
}

fn ellipse_label(ratio: f64) -> &'static str {
    if ratio < 0.55 {
        "elongated"
    } else if ratio < 0.8 {
        "oval"
    } else {
        "round"
    }
}

/// Filled ellipses with semi-axes in `[0.3, 1]`, a random rotation and a
/// uniform size in `[n_min, n_max]`, labelled by their axis ratio.
pub fn ellipse_dataset(count: usize, n_min: usize, n_max: usize, seed: u64) -> Result<Dataset> {
    check_sizes(n_min, n_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Dataset::default();
    for k in 0..count {
        let n = rng.random_range(n_min..=n_max);
        let (a, b) = (rng.random_range(0.3..=1.0), rng.random_range(0.3..=1.0));
        let theta = rng.random_range(0.0..PI);
        let (c, s) = (theta.cos(), theta.sin());
        let mut points = Array2::zeros((n, 2));
        for mut row in points.axis_iter_mut(Axis(0)) {
            // uniform in the unit disk, then stretched
            let r = rng.random::<f64>().sqrt();
            let phi = rng.random_range(0.0..2.0 * PI);
            let (x, y) = (a * r * phi.cos(), b * r * phi.sin());
            row[0] = c * x - s * y;
            row[1] = s * x + c * y;
        }
        let ratio = a.min(b) / a.max(b);
        data.push(
            format!("ellipse_{k:03}"),
            ellipse_label(ratio),
            finish_shape(points)?,
        );
    }
    Ok(data)
}

/// Generates [`ellipse_dataset`] and writes it, with its manifest, to
/// `out_dir`.
pub fn gen_ellipses(
    count: usize,
    n_min: usize,
    n_max: usize,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<Manifest> {
    ellipse_dataset(count, n_min, n_max, seed)?.write(out_dir)
}

/// Two classes: filled unit disks (`disk`) and annuli with radii in
/// `[0.6, 1]` (`ring`), `per_class` shapes each, interleaved.
pub fn disk_ring_dataset(
    per_class: usize,
    n_min: usize,
    n_max: usize,
    seed: u64,
) -> Result<Dataset> {
    check_sizes(n_min, n_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Dataset::default();
    for k in 0..per_class {
        for (label, inner) in [("disk", 0.0), ("ring", 0.6)] {
            let n = rng.random_range(n_min..=n_max);
            let mut points = Array2::zeros((n, 2));
            for mut row in points.axis_iter_mut(Axis(0)) {
                let r = rng.random_range(inner * inner..=1.0_f64).sqrt();
                let phi = rng.random_range(0.0..2.0 * PI);
                row[0] = r * phi.cos();
                row[1] = r * phi.sin();
            }
            data.push(format!("{label}_{k:03}"), label, finish_shape(points)?);
        }
    }
    Ok(data)
}

/// Appends `⌈η n⌉` points drawn uniformly from the bounding box of `space`.
/// Each new point weighs `|μ|/n`, except the last, which is trimmed so the
/// added mass is exactly `η |μ|`. Existing atoms keep their masses.
pub fn corrupt_with_noise(space: &GmSpace, eta: f64, seed: u64) -> Result<GmSpace> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise level must be >= 0, got {eta}"
        )));
    }
    let points = space.points().ok_or_else(|| {
        Error::InvalidArgument("noise can only be added to point-backed spaces".into())
    })?;
    let (n, d) = points.dim();
    // the small slack keeps η n = 3.0000000000000004 from rounding up to 4
    let extra = (eta * n as f64 - 1e-9).ceil().max(0.0) as usize;
    if extra == 0 {
        return Ok(space.clone());
    }
    let total = space.total_mass();
    let unit = total / n as f64;
    let lo = points.fold_axis(Axis(0), f64::INFINITY, |a, b| a.min(*b));
    let hi = points.fold_axis(Axis(0), f64::NEG_INFINITY, |a, b| a.max(*b));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all = Array2::zeros((n + extra, d));
    all.slice_mut(ndarray::s![..n, ..]).assign(points);
    for i in n..n + extra {
        for k in 0..d {
            all[[i, k]] = if hi[k] > lo[k] {
                rng.random_range(lo[k]..=hi[k])
            } else {
                lo[k]
            };
        }
    }
    let mut mass = Array1::zeros(n + extra);
    mass.slice_mut(ndarray::s![..n]).assign(space.mass());
    mass.slice_mut(ndarray::s![n..]).fill(unit);
    mass[n + extra - 1] = eta * total - (extra - 1) as f64 * unit;
    GmSpace::from_points(all, mass, space.kind())
}
