//! Synthetic articulated scenes with closed-form motion.
//!
//! Every part is a box of length `segment_length` along +x and square
//! cross-section `thickness`, sampled uniformly on its surface. Point `i` of
//! the start and end clouds is the same material point.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Attributes, PointCloud, RigidTransform, Vec3};
use crate::optimizer::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// One box translated by `translation`.
    RigidTranslate,
    /// One box rotated by `angle` about `axis` through `pivot`.
    RigidRotate,
    /// A static box ending at `pivot` and a moving box starting there,
    /// rotated by `angle` about `axis` through `pivot`.
    Hinge,
    /// One box starting at `pivot`, bent in the xy-plane into an arc of
    /// curvature `curvature`.
    Bend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub kind: SceneKind,
    #[serde(default = "defaults::points_per_part")]
    pub points_per_part: usize,
    #[serde(default = "defaults::segment_length")]
    pub segment_length: f64,
    #[serde(default = "defaults::thickness")]
    pub thickness: f64,
    #[serde(default = "defaults::translation")]
    pub translation: [f64; 3],
    #[serde(default = "defaults::axis")]
    pub axis: [f64; 3],
    #[serde(default)]
    pub pivot: [f64; 3],
    /// Radians, in `(-pi, pi]`.
    #[serde(default = "defaults::angle")]
    pub angle: f64,
    #[serde(default = "defaults::curvature")]
    pub curvature: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

mod defaults {
    pub fn points_per_part() -> usize {
        1000
    }
    pub fn segment_length() -> f64 {
        1.0
    }
    pub fn thickness() -> f64 {
        0.2
    }
    pub fn translation() -> [f64; 3] {
        [0.0, 0.0, 1.0]
    }
    pub fn axis() -> [f64; 3] {
        [0.0, 0.0, 1.0]
    }
    pub fn angle() -> f64 {
        std::f64::consts::FRAC_PI_2
    }
    pub fn curvature() -> f64 {
        std::f64::consts::PI / 2.0
    }
}

impl SceneSpec {
    /// A spec of `kind` with default geometry.
    pub fn new(kind: SceneKind) -> Self {
        SceneSpec {
            kind,
            points_per_part: defaults::points_per_part(),
            segment_length: defaults::segment_length(),
            thickness: defaults::thickness(),
            translation: defaults::translation(),
            axis: defaults::axis(),
            pivot: [0.0; 3],
            angle: defaults::angle(),
            curvature: defaults::curvature(),
            noise_sigma: 0.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if self.points_per_part == 0 {
            return Err(Error::param("points_per_part must be positive"));
        }
        if !(self.segment_length > 0.0) || !(self.thickness > 0.0) {
            return Err(Error::param("segment_length and thickness must be positive"));
        }
        if !(self.angle > -PI && self.angle <= PI) {
            return Err(Error::param(format!("angle {} is outside (-pi, pi]", self.angle)));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::param("noise_sigma must be >= 0"));
        }
        if !finite(&self.translation) || !finite(&self.axis) || !finite(&self.pivot) || !self.curvature.is_finite() {
            return Err(Error::param("scene vectors must be finite"));
        }
        if Vec3::from(self.axis).norm() == 0.0 {
            return Err(Error::param("rotation axis must be non-zero"));
        }
        Ok(())
    }

    fn part_count(&self) -> usize {
        match self.kind {
            SceneKind::Hinge => 2,
            _ => 1,
        }
    }

    /// Material-point positions at motion parameter `s` in `[0, 1]`.
    fn pose(&self, start: &[Vec3], labels: &[u32], s: f64) -> Result<Vec<Vec3>> {
        let pivot = Vec3::from(self.pivot);
        Ok(match self.kind {
            SceneKind::RigidTranslate => {
                let t = s * Vec3::from(self.translation);
                start.iter().map(|p| p + t).collect()
            }
            SceneKind::RigidRotate => {
                let xf = RigidTransform::about_axis(Vec3::from(self.axis), s * self.angle, pivot)?;
                start.iter().map(|p| xf.apply(p)).collect()
            }
            SceneKind::Hinge => {
                let xf = RigidTransform::about_axis(Vec3::from(self.axis), s * self.angle, pivot)?;
                start
                    .iter()
                    .zip(labels)
                    .map(|(p, &l)| if l == 1 { xf.apply(p) } else { *p })
                    .collect()
            }
            SceneKind::Bend => {
                let kappa = s * self.curvature;
                start.iter().map(|p| pivot + bend(p - pivot, kappa)).collect()
            }
        })
    }
}

/// Maps the x-axis onto an arc of curvature `kappa` tangent to +x at the
/// origin; `y` measures offset toward the center, `z` is untouched.
fn bend(local: Vec3, kappa: f64) -> Vec3 {
    if kappa.abs() < 1e-12 {
        return local;
    }
    let radius = 1.0 / kappa;
    let theta = kappa * local.x;
    let r = radius - local.y;
    Vec3::new(r * theta.sin(), radius - r * theta.cos(), local.z)
}

/// Start and end states of a generated scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub spec: SceneSpec,
    pub start: PointCloud,
    pub end: PointCloud,
}

impl Scene {
    /// Material-point positions at motion parameter `s` in `[0, 1]`.
    pub fn pose(&self, s: f64) -> Result<Vec<Vec3>> {
        self.spec
            .pose(self.start.positions(), self.start.part_labels().unwrap_or(&[]), s)
    }

    pub fn part_labels(&self) -> &[u32] {
        self.start.part_labels().unwrap_or(&[])
    }
}

fn sample_box_surface(rng: &mut impl Rng, origin: Vec3, size: Vec3) -> Vec3 {
    let areas = [size.y * size.z, size.x * size.z, size.x * size.y];
    let total: f64 = 2.0 * areas.iter().sum::<f64>();
    let mut pick = rng.random::<f64>() * total;
    let mut axis = 2;
    for (a, area) in areas.iter().enumerate() {
        if pick < 2.0 * area {
            axis = a;
            break;
        }
        pick -= 2.0 * area;
    }
    let mut unit = Vec3::new(rng.random(), rng.random(), rng.random());
    unit[axis] = if rng.random::<bool>() { 1.0 } else { 0.0 };
    origin + unit.component_mul(&size)
}

const PART_COLORS: [[f64; 3]; 2] = [[0.8, 0.35, 0.2], [0.2, 0.45, 0.85]];

pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let pivot = Vec3::from(spec.pivot);
    let size = Vec3::new(spec.segment_length, spec.thickness, spec.thickness);
    let half = Vec3::new(0.0, spec.thickness / 2.0, spec.thickness / 2.0);

    let mut positions = Vec::new();
    let mut labels = Vec::new();
    for part in 0..spec.part_count() {
        let origin = match (spec.kind, part) {
            (SceneKind::Hinge, 0) => pivot - half - Vec3::new(spec.segment_length, 0.0, 0.0),
            _ => pivot - half,
        };
        for _ in 0..spec.points_per_part {
            positions.push(sample_box_surface(&mut rng, origin, size));
            labels.push(if spec.kind == SceneKind::Hinge { part as u32 } else { 0 });
        }
    }
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::param(e.to_string()))?;
        for p in &mut positions {
            *p += Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }

    let end_positions = spec.pose(&positions, &labels, 1.0)?;
    let moving = |l: u32| spec.kind != SceneKind::Hinge || l == 1;
    let start_colors: Vec<f64> = labels.iter().flat_map(|&l| PART_COLORS[l as usize]).collect();
    // Moving parts darken slightly, standing in for a shading change.
    let end_colors: Vec<f64> = labels
        .iter()
        .flat_map(|&l| {
            let c = PART_COLORS[l as usize];
            if moving(l) { c.map(|v| 0.7 * v) } else { c }
        })
        .collect();

    let start = PointCloud::new(positions)?
        .with_part_labels(labels.clone())?
        .with_attributes(Attributes::new(3, start_colors)?)?;
    let end = PointCloud::new(end_positions)?
        .with_part_labels(labels)?
        .with_attributes(Attributes::new(3, end_colors)?)?;
    Ok(Scene {
        spec: spec.clone(),
        start,
        end,
    })
}

/// The motion sampled at `steps` evenly spaced parameters in `[0, 1]`,
/// with `alpha` computed from the positions.
pub fn ground_truth_trajectory(spec: &SceneSpec, steps: usize) -> Result<Trajectory> {
    if steps < 2 {
        return Err(Error::param("ground-truth trajectory needs at least two steps"));
    }
    let scene = generate(spec)?;
    let poses = (0..steps)
        .map(|i| scene.pose(i as f64 / (steps - 1) as f64))
        .collect::<Result<Vec<_>>>()?;
    let mut traj = Trajectory::from_checkpoints((0..steps).collect(), poses)?;
    // Exact endpoints, not re-evaluated poses.
    traj.checkpoints[0].positions = scene.start.positions().to_vec();
    traj.checkpoints[steps - 1].positions = scene.end.positions().to_vec();
    traj.start_positions = scene.start.positions().to_vec();
    traj.end_positions = scene.end.positions().to_vec();
    traj.assign_alphas()?;
    traj.with_attributes(scene.start.attributes().cloned(), scene.end.attributes().cloned())
}
