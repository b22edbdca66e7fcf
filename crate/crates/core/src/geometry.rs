//! Point clouds, rigid transforms and frozen k-nearest-neighbor graphs.

use nalgebra::{Matrix3, Rotation3, Unit};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spatial::KdTree;

pub type Vec3 = nalgebra::Vector3<f64>;

/// Row-major `N x D` per-point attribute table (e.g. RGB in `[0, 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Attributes {
    dim: usize,
    values: Vec<f64>,
}

impl Attributes {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("attribute dimension must be positive"));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::param(format!(
                "attribute buffer of length {} is not a multiple of dimension {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("attribute values must be finite"));
        }
        Ok(Attributes { dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::param("attribute rows have differing lengths"));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `N >= 1` positions with optional attributes and part labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<Vec3>,
    attributes: Option<Attributes>,
    part_labels: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Vec3>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::param("point cloud must contain at least one point"));
        }
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::param(format!("point {i} has a non-finite coordinate")));
        }
        Ok(PointCloud {
            positions,
            attributes: None,
            part_labels: None,
        })
    }

    pub fn with_attributes(mut self, attributes: Attributes) -> Result<Self> {
        if attributes.len() != self.len() {
            return Err(Error::param(format!(
                "attribute rows ({}) must equal point count ({})",
                attributes.len(),
                self.len()
            )));
        }
        self.attributes = Some(attributes);
        Ok(self)
    }

    pub fn with_part_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::param(format!(
                "part label count ({}) must equal point count ({})",
                labels.len(),
                self.len()
            )));
        }
        self.part_labels = Some(labels);
        Ok(self)
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn attributes(&self) -> Option<&Attributes> {
        self.attributes.as_ref()
    }

    pub fn part_labels(&self) -> Option<&[u32]> {
        self.part_labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Same attributes and labels, new positions.
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Result<Self> {
        if positions.len() != self.len() {
            return Err(Error::param("replacement positions must keep the point count"));
        }
        let mut out = PointCloud::new(positions)?;
        out.attributes = self.attributes.clone();
        out.part_labels = self.part_labels.clone();
        Ok(out)
    }

    pub fn centroid(&self) -> Vec3 {
        self.positions.iter().sum::<Vec3>() / self.len() as f64
    }
}

/// Proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl RigidTransform {
    const ORTHO_TOL: f64 = 1e-9;

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let ortho_err = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if !(ortho_err <= Self::ORTHO_TOL) || (rotation.determinant() - 1.0).abs() > Self::ORTHO_TOL {
            return Err(Error::param("rotation must be orthonormal with determinant +1"));
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(Error::param("translation must be finite"));
        }
        Ok(RigidTransform { rotation, translation })
    }

    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn translation(t: Vec3) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation by `angle` radians about `axis` through `pivot`.
    pub fn about_axis(axis: Vec3, angle: f64, pivot: Vec3) -> Result<Self> {
        if !(axis.norm() > 0.0) {
            return Err(Error::param("rotation axis must be non-zero"));
        }
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner();
        Ok(RigidTransform {
            rotation: rot,
            translation: pivot - rot * pivot,
        })
    }

    pub fn rotation_matrix(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation_vector(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }
}

pub fn apply_rigid(cloud: &PointCloud, xf: &RigidTransform) -> PointCloud {
    PointCloud {
        positions: cloud.positions.iter().map(|p| xf.apply(p)).collect(),
        attributes: cloud.attributes.clone(),
        part_labels: cloud.part_labels.clone(),
    }
}

/// Start-state k-NN structure with cached rest squared distances.
///
/// Built once and never updated: neighborhoods stay frozen at the start
/// state for the whole fit.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    k: usize,
    indices: Vec<usize>,
    rest_sq_dist: Vec<f64>,
    // CSR list of edge ids `i * k + slot` whose target is a given point.
    incoming_offsets: Vec<usize>,
    incoming_edges: Vec<usize>,
}

impl NeighborGraph {
    pub fn from_positions(positions: &[Vec3], k: usize) -> Result<Self> {
        let n = positions.len();
        if k == 0 || k >= n {
            return Err(Error::param(format!(
                "neighbor count k={k} must satisfy 1 <= k <= N-1 (N={n})"
            )));
        }
        if positions.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::param("positions must be finite"));
        }
        let tree = KdTree::new(positions);
        let rows: Vec<Vec<(usize, f64)>> = positions
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                tree.k_nearest(p, k, Some(i))
                    .into_iter()
                    .map(|nb| (nb.index, nb.sq_dist))
                    .collect()
            })
            .collect();

        let mut indices = Vec::with_capacity(n * k);
        let mut rest_sq_dist = Vec::with_capacity(n * k);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, _) in row {
                indices.push(j);
                // Recomputed from positions so the cached value is exact.
                rest_sq_dist.push((positions[i] - positions[j]).norm_squared());
            }
        }

        let mut counts = vec![0usize; n + 1];
        for &j in &indices {
            counts[j + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let incoming_offsets = counts.clone();
        let mut fill = counts;
        let mut incoming_edges = vec![0usize; indices.len()];
        for (e, &j) in indices.iter().enumerate() {
            incoming_edges[fill[j]] = e;
            fill[j] += 1;
        }

        Ok(NeighborGraph {
            k,
            indices,
            rest_sq_dist,
            incoming_offsets,
            incoming_edges,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of points the graph was built over.
    pub fn len(&self) -> usize {
        self.indices.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `NN_k(i)`, ascending by rest distance, ties by index.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn rest_sq_dists(&self, i: usize) -> &[f64] {
        &self.rest_sq_dist[i * self.k..(i + 1) * self.k]
    }

    /// All directed edges as `(i, j, rest_sq_dist)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.rest_sq_dist)
            .enumerate()
            .map(move |(e, (&j, &d))| (e / self.k, j, d))
    }

    pub(crate) fn edge_target(&self, edge: usize) -> usize {
        self.indices[edge]
    }

    pub(crate) fn edge_rest(&self, edge: usize) -> f64 {
        self.rest_sq_dist[edge]
    }

    /// Edge ids `i * k + slot` pointing at `j`, ascending.
    pub(crate) fn incoming(&self, j: usize) -> &[usize] {
        &self.incoming_edges[self.incoming_offsets[j]..self.incoming_offsets[j + 1]]
    }
}

pub fn build_neighbor_graph(cloud: &PointCloud, k: usize) -> Result<NeighborGraph> {
    NeighborGraph::from_positions(cloud.positions(), k)
}
