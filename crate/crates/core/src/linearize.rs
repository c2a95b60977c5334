//! Linear (P)GW embeddings relative to a fixed reference space.
//!
//! A target `Y` is embedded by solving (P)GW from the reference `X` to `Y`,
//! pushing every reference atom to the barycenter of its image, and storing
//! the gauge difference `K[i][i'] = g_Y(ỹ_i, ỹ_i') - g_X(x_i, x_i')`
//! together with the transported mass `q̃ = γ1`. Distances between two
//! targets then only need their embeddings, so `K` targets cost `K` solver
//! calls instead of `K(K-1)/2`.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fw::{solve_gw, solve_pgw, FwConfig};
use crate::gmspace::{GaugeKind, GmSpace};
use crate::transport::TransportPlan;

/// The fixed space every target is embedded against.
#[derive(Clone, Debug)]
pub struct Reference {
    pub id: String,
    pub space: GmSpace,
}

impl Reference {
    pub fn new(id: impl Into<String>, space: GmSpace) -> Self {
        Reference {
            id: id.into(),
            space,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ReferenceFile {
            id: self.id.clone(),
            gauge_kind: self.space.kind().as_str().to_string(),
            mass: self.space.mass().to_vec(),
            gauge: self
                .space
                .gauge()
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
            points: self
                .space
                .points()
                .map(|p| p.rows().into_iter().map(|r| r.to_vec()).collect()),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ReferenceFile = serde_json::from_str(text)?;
        let kind: GaugeKind = file.gauge_kind.parse()?;
        let space = match (file.points, kind) {
            (Some(points), GaugeKind::SquaredEuclidean | GaugeKind::InnerProduct) => {
                GmSpace::from_rows(&points, file.mass, kind)?
            }
            _ => {
                let n = file.mass.len();
                if file.gauge.len() != n || file.gauge.iter().any(|r| r.len() != n) {
                    return Err(Error::MalformedInput(format!(
                        "reference gauge must be {n}x{n}"
                    )));
                }
                let gauge = Array2::from_shape_fn((n, n), |(i, j)| file.gauge[i][j]);
                GmSpace::from_gauge(gauge, Array1::from(file.mass))?
            }
        };
        Ok(Reference::new(file.id, space))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Reads a reference saved with [`Reference::write`], or a point-cloud
    /// CSV whose file stem becomes the id.
    pub fn read(path: impl AsRef<Path>, header: bool, kind: GaugeKind) -> Result<Self> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e == "json") {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            return Self::from_json(&text);
        }
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Reference::new(
            id,
            GmSpace::read_pointcloud(path, header, kind)?,
        ))
    }
}

#[derive(Serialize, Deserialize)]
struct ReferenceFile {
    id: String,
    gauge_kind: String,
    mass: Vec<f64>,
    gauge: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<Vec<f64>>>,
}

/// `q̃_i = Σ_j γ_ij` and `ỹ_i = Σ_j γ_ij y_j / q̃_i`, with `ỹ_i = 0` on rows
/// that transport nothing.
pub fn barycentric_project(
    plan: ArrayView2<f64>,
    target_points: ArrayView2<f64>,
) -> Result<(Array2<f64>, Array1<f64>)> {
    if plan.ncols() != target_points.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "plan has {} columns but the target has {} points",
            plan.ncols(),
            target_points.nrows()
        )));
    }
    let q = plan.sum_axis(Axis(1));
    let mut projected = plan.dot(&target_points);
    for (mut row, &mass) in projected.rows_mut().into_iter().zip(q.iter()) {
        if mass > 0.0 {
            row.mapv_inplace(|v| v / mass);
        } else {
            row.fill(0.0);
        }
    }
    Ok((projected, q))
}

/// `K[i][i'] = g(ỹ_i, ỹ_i') - g_X[i][i']` where `g` is the target gauge.
fn cost_difference(
    reference: &GmSpace,
    target: &GmSpace,
    plan: ArrayView2<f64>,
) -> Result<(Array2<f64>, Array1<f64>)> {
    let points = target.points().ok_or_else(|| {
        Error::InvalidArgument(
            "embedding targets need coordinates for the barycentric projection".into(),
        )
    })?;
    let (projected, q) = barycentric_project(plan, points.view())?;
    let induced = crate::gmspace::gauge_matrix(projected.view(), target.kind());
    let mut k = induced - reference.gauge();
    // exact symmetry, whatever the rounding in the two gauges
    let n = k.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (k[[i, j]] + k[[j, i]]);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    Ok((k, q))
}

fn check_plan_shape(plan: &TransportPlan, reference: &GmSpace, target: &GmSpace) -> Result<()> {
    if plan.shape() != (reference.len(), target.len()) {
        return Err(Error::DimensionMismatch(format!(
            "plan is {:?} but reference/target have {}/{} atoms",
            plan.shape(),
            reference.len(),
            target.len()
        )));
    }
    Ok(())
}

/// Linear partial GW embedding `(K̃, q̃, |γ_c|)` of one target.
#[derive(Clone, Debug, PartialEq)]
pub struct LpgwEmbedding {
    pub reference_id: String,
    pub lambda: f64,
    pub k: Array2<f64>,
    pub q: Array1<f64>,
    /// Created mass `|ν|² - |q̃|²`.
    pub gamma_c: f64,
    pub target_total_mass: f64,
    pub gauge_kind: GaugeKind,
}

impl LpgwEmbedding {
    /// Embedding induced by a given plan from the reference to the target.
    pub fn from_plan(
        reference: &Reference,
        target: &GmSpace,
        plan: &TransportPlan,
        lambda: f64,
    ) -> Result<Self> {
        check_plan_shape(plan, &reference.space, target)?;
        let (k, q) = cost_difference(&reference.space, target, plan.matrix.view())?;
        let transported = q.sum();
        let total = target.total_mass();
        Ok(LpgwEmbedding {
            reference_id: reference.id.clone(),
            lambda,
            k,
            q,
            gamma_c: total * total - transported * transported,
            target_total_mass: total,
            gauge_kind: target.kind(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&EmbeddingFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: EmbeddingFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// On-disk layout of an [`LpgwEmbedding`].
#[derive(Serialize, Deserialize)]
struct EmbeddingFile {
    reference_id: String,
    lambda: f64,
    q: Vec<f64>,
    #[serde(rename = "K")]
    k: Vec<Vec<f64>>,
    gamma_c: f64,
    target_total_mass: f64,
    gauge_kind: String,
}

impl From<&LpgwEmbedding> for EmbeddingFile {
    fn from(e: &LpgwEmbedding) -> Self {
        EmbeddingFile {
            reference_id: e.reference_id.clone(),
            lambda: e.lambda,
            q: e.q.to_vec(),
            k: e.k.rows().into_iter().map(|r| r.to_vec()).collect(),
            gamma_c: e.gamma_c,
            target_total_mass: e.target_total_mass,
            gauge_kind: e.gauge_kind.as_str().to_string(),
        }
    }
}

impl TryFrom<EmbeddingFile> for LpgwEmbedding {
    type Error = Error;

    fn try_from(f: EmbeddingFile) -> Result<Self> {
        let n = f.q.len();
        if f.k.len() != n || f.k.iter().any(|r| r.len() != n) {
            return Err(Error::MalformedInput(format!(
                "embedding K must be {n}x{n} to match q"
            )));
        }
        let k = Array2::from_shape_vec((n, n), f.k.into_iter().flatten().collect())
            .map_err(|e| Error::MalformedInput(e.to_string()))?;
        Ok(LpgwEmbedding {
            reference_id: f.reference_id,
            lambda: f.lambda,
            k,
            q: Array1::from(f.q),
            gamma_c: f.gamma_c,
            target_total_mass: f.target_total_mass,
            gauge_kind: f.gauge_kind.parse()?,
        })
    }
}

/// Linear GW embedding: `K` plus the reference weights.
#[derive(Clone, Debug, PartialEq)]
pub struct LgwEmbedding {
    pub reference_id: String,
    pub k: Array2<f64>,
    pub weights: Array1<f64>,
}

impl LgwEmbedding {
    pub fn from_plan(
        reference: &Reference,
        target: &GmSpace,
        plan: &TransportPlan,
    ) -> Result<Self> {
        check_plan_shape(plan, &reference.space, target)?;
        let (k, _) = cost_difference(&reference.space, target, plan.matrix.view())?;
        Ok(LgwEmbedding {
            reference_id: reference.id.clone(),
            k,
            weights: reference.space.mass().clone(),
        })
    }
}

/// Solves PGW from the reference to `target` and embeds the result.
pub fn embed_lpgw(
    reference: &Reference,
    target: &GmSpace,
    lambda: f64,
    cfg: &FwConfig,
) -> Result<LpgwEmbedding> {
    let (plan, _) = solve_pgw(&reference.space, target, lambda, cfg)?;
    LpgwEmbedding::from_plan(reference, target, &plan, lambda)
}

/// Solves GW from the reference to `target` and embeds the result.
pub fn embed_lgw(reference: &Reference, target: &GmSpace, cfg: &FwConfig) -> Result<LgwEmbedding> {
    let (plan, _) = solve_gw(&reference.space, target, cfg)?;
    LgwEmbedding::from_plan(reference, target, &plan)
}

/// `wᵀ [(K¹ - K²)∘(K¹ - K²)] w`
fn weighted_sq_diff(k1: &Array2<f64>, k2: &Array2<f64>, w: &Array1<f64>) -> f64 {
    let mut acc = 0.0;
    Zip::indexed(k1).and(k2).for_each(|(i, j), a, b| {
        let d = a - b;
        acc += d * d * w[i] * w[j];
    });
    acc
}

/// Approximate LPGW discrepancy between two embeddings sharing a reference:
/// `q̃ᵀ[(K¹ - K²)²]q̃ + λ(|ν¹|² + |ν²|² - 2|q̃|²)` with `q̃ = min(q̃¹, q̃²)`.
pub fn alpgw_distance(e1: &LpgwEmbedding, e2: &LpgwEmbedding) -> Result<f64> {
    if e1.reference_id != e2.reference_id {
        return Err(Error::ReferenceMismatch(format!(
            "references '{}' and '{}'",
            e1.reference_id, e2.reference_id
        )));
    }
    if e1.lambda != e2.lambda {
        return Err(Error::ReferenceMismatch(format!(
            "lambda {} vs {}",
            e1.lambda, e2.lambda
        )));
    }
    if e1.k.dim() != e2.k.dim() || e1.q.len() != e2.q.len() {
        return Err(Error::DimensionMismatch(
            "embeddings have different sizes".into(),
        ));
    }
    let common: Array1<f64> = Zip::from(&e1.q).and(&e2.q).map_collect(|a, b| a.min(*b));
    let shared = common.sum();
    let quad = weighted_sq_diff(&e1.k, &e2.k, &common);
    let (n1, n2) = (e1.target_total_mass, e2.target_total_mass);
    Ok(quad + e1.lambda * (n1 * n1 + n2 * n2 - 2.0 * shared * shared))
}

/// Approximate LGW distance `Σ (K¹ - K²)² p₀ p₀ᵀ`.
pub fn algw_distance(e1: &LgwEmbedding, e2: &LgwEmbedding) -> Result<f64> {
    if e1.reference_id != e2.reference_id {
        return Err(Error::ReferenceMismatch(format!(
            "references '{}' and '{}'",
            e1.reference_id, e2.reference_id
        )));
    }
    if e1.k.dim() != e2.k.dim() {
        return Err(Error::DimensionMismatch(
            "embeddings have different sizes".into(),
        ));
    }
    Ok(weighted_sq_diff(&e1.k, &e2.k, &e1.weights))
}

/// PGW value reconstructed from an embedding:
/// `q̃ᵀ(K∘K)q̃ + λ(|μ|² - |q̃|² + |γ_c|)`. Exact when the plan that produced
/// the embedding is induced by a map.
pub fn recover_pgw_from_embedding(e: &LpgwEmbedding, reference_total_mass: f64) -> f64 {
    let zero = Array2::zeros(e.k.dim());
    let quad = weighted_sq_diff(&e.k, &zero, &e.q);
    let transported = e.q.sum();
    quad + e.lambda
        * (reference_total_mass * reference_total_mass - transported * transported + e.gamma_c)
}
