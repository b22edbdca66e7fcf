//! The fitting loop.
//!
//! Point positions are the only free parameters. Each iteration takes one
//! first-order step on `data + lambda_rigid * rigid`, then every `m`-th
//! iteration replaces positions by the local displacement average until the
//! disable policy fires. Evenly spaced checkpoints are recorded, annotated
//! with progress `alpha`, and temporally smoothed.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Attributes, NeighborGraph, PointCloud, Vec3};
use crate::interpolation::{blend_attributes, progress_alpha};
use crate::regularizers::{lda_step, rigid_loss, LossValueGrad};
use crate::spatial::KdTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataTermKind {
    /// `(1/N) sum_i |p_i - q_i|^2` against a target with the same indexing.
    #[default]
    CorrespondenceMse,
    /// Symmetric mean squared Chamfer distance to an unordered target.
    ChamferToTarget,
}

/// What the fit is pulled toward.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTerm {
    pub kind: DataTermKind,
    pub target: PointCloud,
}

impl DataTerm {
    pub fn new(kind: DataTermKind, target: PointCloud) -> Self {
        DataTerm { kind, target }
    }

    pub fn correspondence(target: PointCloud) -> Self {
        Self::new(DataTermKind::CorrespondenceMse, target)
    }

    pub fn chamfer(target: PointCloud) -> Self {
        Self::new(DataTermKind::ChamferToTarget, target)
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.kind == DataTermKind::CorrespondenceMse && self.target.len() != n {
            return Err(Error::param(format!(
                "correspondence data term needs a target of {n} points, got {}",
                self.target.len()
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, positions: &[Vec3]) -> Result<LossValueGrad> {
        if positions.is_empty() {
            return Err(Error::param("data term evaluated on an empty point set"));
        }
        self.check(positions.len())?;
        let target = self.target.positions();
        Ok(match self.kind {
            DataTermKind::CorrespondenceMse => {
                let n = positions.len() as f64;
                let mut value = 0.0;
                let gradient = positions
                    .iter()
                    .zip(target)
                    .map(|(p, q)| {
                        let d = p - q;
                        value += d.norm_squared();
                        2.0 * d / n
                    })
                    .collect();
                LossValueGrad { value: value / n, gradient }
            }
            DataTermKind::ChamferToTarget => chamfer_value_grad(positions, target),
        })
    }
}

// Matches are recomputed per call and held fixed for differentiation.
fn chamfer_value_grad(source: &[Vec3], target: &[Vec3]) -> LossValueGrad {
    let na = source.len() as f64;
    let nb = target.len() as f64;
    let target_tree = KdTree::new(target);
    let source_tree = KdTree::new(source);
    let mut gradient = vec![Vec3::zeros(); source.len()];
    let mut forward = 0.0;
    for (i, p) in source.iter().enumerate() {
        let nn = target_tree.nearest(p);
        forward += nn.sq_dist;
        gradient[i] += 2.0 * (p - target[nn.index]) / na;
    }
    let mut backward = 0.0;
    for q in target {
        let nn = source_tree.nearest(q);
        backward += nn.sq_dist;
        gradient[nn.index] += 2.0 * (source[nn.index] - q) / nb;
    }
    LossValueGrad {
        value: forward / na + backward / nb,
        gradient,
    }
}

/// Data term plus `lambda_rigid` times the local distance preservation loss.
pub fn total_loss(
    positions: &[Vec3],
    data: &DataTerm,
    graph: &NeighborGraph,
    lambda_rigid: f64,
) -> Result<LossValueGrad> {
    let data_part = data.evaluate(positions)?;
    let rigid = rigid_loss(positions, graph)?;
    Ok(data_part.add_scaled(&rigid, lambda_rigid))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    PlainGd,
    /// Adam with decay rates (0.9, 0.999).
    #[default]
    AdaptiveMoment,
}

/// When local displacement averaging is switched off for good.
///
/// Fires at the end of the first iteration where either the mean per-point
/// displacement over the trailing `m` iterations drops below
/// `displacement_threshold`, or the iteration reaches
/// `iteration_fraction * max_iterations`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdasDisablePolicy {
    pub displacement_threshold: f64,
    pub iteration_fraction: f64,
}

impl Default for LdasDisablePolicy {
    fn default() -> Self {
        LdasDisablePolicy {
            displacement_threshold: 1e-4,
            iteration_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub lambda_rigid: f64,
    pub k: usize,
    pub m: usize,
    pub step_size: f64,
    pub max_iterations: usize,
    pub checkpoint_count: usize,
    pub ldas_enabled: bool,
    pub ldas_disable: LdasDisablePolicy,
    pub smoothing_window: usize,
    /// Smooth over every optimizer iterate around each checkpoint instead of
    /// over the recorded checkpoints.
    pub smooth_all_iterates: bool,
    pub optimizer: OptimizerKind,
    pub data_term: DataTermKind,
    pub rng_seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda_rigid: 5.0,
            k: 200,
            m: 100,
            step_size: 1e-3,
            max_iterations: 2000,
            checkpoint_count: 24,
            ldas_enabled: true,
            ldas_disable: LdasDisablePolicy::default(),
            smoothing_window: 7,
            smooth_all_iterates: false,
            optimizer: OptimizerKind::default(),
            data_term: DataTermKind::default(),
            rng_seed: 0,
        }
    }
}

impl FitConfig {
    /// The unregularized baseline: no rigidity term and no averaging.
    pub fn unregularized(mut self) -> Self {
        self.lambda_rigid = 0.0;
        self.ldas_enabled = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::param(msg));
        if !(self.lambda_rigid >= 0.0 && self.lambda_rigid.is_finite()) {
            return fail("lambda_rigid must be finite and >= 0");
        }
        if self.k == 0 {
            return fail("k must be positive");
        }
        if self.m == 0 {
            return fail("m must be positive");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return fail("step_size must be finite and > 0");
        }
        if self.max_iterations == 0 {
            return fail("max_iterations must be >= 1 (at least two checkpoints are recorded)");
        }
        if self.checkpoint_count < 2 {
            return fail("checkpoint_count must be >= 2");
        }
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return fail("smoothing_window must be an odd positive integer");
        }
        let p = &self.ldas_disable;
        if !(p.displacement_threshold >= 0.0) || !(p.iteration_fraction >= 0.0) {
            return fail("LDAS disable thresholds must be >= 0");
        }
        Ok(())
    }

    /// Iterations at which checkpoints are recorded: evenly spaced over
    /// `[0, max_iterations]`, both ends included, duplicates dropped.
    pub fn checkpoint_iterations(&self) -> Vec<usize> {
        let t = self.max_iterations;
        let c = self.checkpoint_count - 1;
        let mut out: Vec<usize> = (0..=c).map(|i| (i * t + c / 2) / c).collect();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: usize,
    pub positions: Vec<Vec3>,
    pub alpha: f64,
}

/// Ordered checkpoints of a deformation from `start_positions` to
/// `end_positions`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub checkpoints: Vec<Checkpoint>,
    /// The fit configuration, absent for analytic trajectories.
    pub config: Option<FitConfig>,
    pub start_positions: Vec<Vec3>,
    pub end_positions: Vec<Vec3>,
    /// Set when total displacement was zero and `alpha` is the iteration
    /// fraction instead.
    pub alpha_fallback: bool,
    pub start_attributes: Option<Attributes>,
    pub end_attributes: Option<Attributes>,
}

impl Trajectory {
    /// Builds a trajectory and annotates every checkpoint with `alpha`.
    ///
    /// `start_positions` is the first checkpoint and `end_positions` the last.
    pub fn from_checkpoints(iterations: Vec<usize>, positions: Vec<Vec<Vec3>>) -> Result<Self> {
        if iterations.len() != positions.len() {
            return Err(Error::param("iteration and position lists differ in length"));
        }
        if iterations.len() < 2 {
            return Err(Error::param("a trajectory needs at least two checkpoints"));
        }
        if iterations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("checkpoint iterations must be strictly increasing"));
        }
        let n = positions[0].len();
        if n == 0 || positions.iter().any(|p| p.len() != n) {
            return Err(Error::param("all checkpoints must have the same non-zero point count"));
        }
        let mut traj = Trajectory {
            start_positions: positions[0].clone(),
            end_positions: positions.last().unwrap().clone(),
            checkpoints: iterations
                .into_iter()
                .zip(positions)
                .map(|(iteration, positions)| Checkpoint {
                    iteration,
                    positions,
                    alpha: 0.0,
                })
                .collect(),
            config: None,
            alpha_fallback: false,
            start_attributes: None,
            end_attributes: None,
        };
        traj.assign_alphas()?;
        Ok(traj)
    }

    pub fn with_attributes(mut self, start: Option<Attributes>, end: Option<Attributes>) -> Result<Self> {
        let n = self.point_count();
        for a in start.iter().chain(end.iter()) {
            if a.len() != n {
                return Err(Error::param("trajectory attributes must have one row per point"));
            }
        }
        self.start_attributes = start;
        self.end_attributes = end;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }

    pub fn point_count(&self) -> usize {
        self.start_positions.len()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.alpha).collect()
    }

    /// Recomputes `alpha` for every checkpoint from its positions, falling
    /// back to the iteration fraction when nothing moved.
    pub fn assign_alphas(&mut self) -> Result<()> {
        let first = self.checkpoints.first().map_or(0, |c| c.iteration);
        let span = self.checkpoints.last().map_or(0, |c| c.iteration) - first;
        let mut fallback = false;
        for ckpt in &mut self.checkpoints {
            ckpt.alpha = match progress_alpha(&ckpt.positions, &self.start_positions, &self.end_positions)? {
                Some(a) => a,
                None => {
                    fallback = true;
                    if span == 0 {
                        0.0
                    } else {
                        (ckpt.iteration - first) as f64 / span as f64
                    }
                }
            };
        }
        self.alpha_fallback = fallback;
        Ok(())
    }

    /// Checkpoint `i` as a point cloud, attributes blended at its `alpha`
    /// (clamped to `[0, 1]`) when both endpoint attribute sets exist.
    pub fn checkpoint_cloud(&self, i: usize) -> Result<PointCloud> {
        let ckpt = &self.checkpoints[i];
        let cloud = PointCloud::new(ckpt.positions.clone())?;
        match (&self.start_attributes, &self.end_attributes) {
            (Some(a), Some(b)) => cloud.with_attributes(blend_attributes(a, b, ckpt.alpha.clamp(0.0, 1.0))?),
            _ => Ok(cloud),
        }
    }
}

/// One optimizer iteration, as reported to progress callbacks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationEvent {
    pub iteration: usize,
    /// Total loss at the positions the step started from.
    pub loss: f64,
    pub data_loss: f64,
    pub rigid_loss: f64,
    pub ldas_applied: bool,
    /// Whether averaging is still enabled after this iteration.
    pub ldas_active: bool,
    /// Mean per-point displacement over this iteration.
    pub mean_displacement: f64,
}

enum Stepper {
    Gd {
        lr: f64,
    },
    Adam {
        lr: f64,
        first: Vec<Vec3>,
        second: Vec<Vec3>,
        steps: i32,
    },
}

impl Stepper {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(kind: OptimizerKind, lr: f64, n: usize) -> Self {
        match kind {
            OptimizerKind::PlainGd => Stepper::Gd { lr },
            OptimizerKind::AdaptiveMoment => Stepper::Adam {
                lr,
                first: vec![Vec3::zeros(); n],
                second: vec![Vec3::zeros(); n],
                steps: 0,
            },
        }
    }

    fn step(&mut self, positions: &mut [Vec3], grad: &[Vec3]) {
        match self {
            Stepper::Gd { lr } => {
                for (p, g) in positions.iter_mut().zip(grad) {
                    *p -= *lr * g;
                }
            }
            Stepper::Adam {
                lr,
                first,
                second,
                steps,
            } => {
                *steps += 1;
                let bc1 = 1.0 - Self::BETA1.powi(*steps);
                let bc2 = 1.0 - Self::BETA2.powi(*steps);
                for i in 0..positions.len() {
                    let g = grad[i];
                    first[i] = Self::BETA1 * first[i] + (1.0 - Self::BETA1) * g;
                    second[i] = Self::BETA2 * second[i] + (1.0 - Self::BETA2) * g.component_mul(&g);
                    let m_hat = first[i] / bc1;
                    let v_hat = second[i] / bc2;
                    for c in 0..3 {
                        positions[i][c] -= *lr * m_hat[c] / (v_hat[c].sqrt() + Self::EPS);
                    }
                }
            }
        }
    }
}

struct DisableTracker {
    window: usize,
    threshold: f64,
    fraction_iteration: usize,
    recent: VecDeque<f64>,
    sum: f64,
}

impl DisableTracker {
    fn new(config: &FitConfig) -> Self {
        DisableTracker {
            window: config.m,
            threshold: config.ldas_disable.displacement_threshold,
            fraction_iteration: (config.ldas_disable.iteration_fraction * config.max_iterations as f64).ceil()
                as usize,
            recent: VecDeque::with_capacity(config.m + 1),
            sum: 0.0,
        }
    }

    /// Records one iteration; true once averaging should be switched off.
    fn observe(&mut self, iteration: usize, displacement: f64) -> bool {
        self.recent.push_back(displacement);
        self.sum += displacement;
        if self.recent.len() > self.window {
            self.sum -= self.recent.pop_front().unwrap();
        }
        let converged = self.recent.len() == self.window && self.sum / (self.window as f64) < self.threshold;
        converged || iteration >= self.fraction_iteration
    }
}

fn is_finite(positions: &[Vec3]) -> bool {
    positions.iter().all(|p| p.iter().all(|c| c.is_finite()))
}

pub fn fit(start: &PointCloud, data: &DataTerm, config: &FitConfig) -> Result<Trajectory> {
    fit_with_progress(start, data, config, |_| {})
}

/// [`fit`], reporting every iteration to `progress`.
pub fn fit_with_progress(
    start: &PointCloud,
    data: &DataTerm,
    config: &FitConfig,
    mut progress: impl FnMut(&IterationEvent),
) -> Result<Trajectory> {
    config.validate()?;
    let n = start.len();
    if config.k >= n {
        return Err(Error::param(format!("k={} requires more than {} points", config.k, n)));
    }
    data.check(n)?;
    let graph = NeighborGraph::from_positions(start.positions(), config.k)?;

    let schedule = config.checkpoint_iterations();
    let total = config.max_iterations;
    let half = config.smoothing_window / 2;
    // Iterates needed for per-iterate smoothing: a window around each checkpoint.
    let keep: BTreeSet<usize> = if config.smooth_all_iterates {
        schedule
            .iter()
            .flat_map(|&c| {
                let h = half.min(c).min(total - c);
                c - h..=c + h
            })
            .collect()
    } else {
        schedule.iter().copied().collect()
    };

    let start_pos = start.positions().to_vec();
    let mut positions = start_pos.clone();
    let mut stepper = Stepper::new(config.optimizer, config.step_size, n);
    let mut tracker = DisableTracker::new(config);
    let mut ldas_active = config.ldas_enabled;
    let mut kept: BTreeMap<usize, Vec<Vec3>> = BTreeMap::new();
    kept.insert(0, positions.clone());

    for iteration in 1..=total {
        let data_part = data.evaluate(&positions)?;
        let rigid = if config.lambda_rigid > 0.0 {
            rigid_loss(&positions, &graph)?
        } else {
            LossValueGrad::zeros(n)
        };
        let rigid_value = rigid.value;
        let data_value = data_part.value;
        let loss = data_part.add_scaled(&rigid, config.lambda_rigid);
        if !loss.value.is_finite() {
            return Err(Error::Divergence {
                iteration,
                value: loss.value,
            });
        }

        let before = positions.clone();
        stepper.step(&mut positions, &loss.gradient);
        let ldas_applied = ldas_active && iteration.is_multiple_of(config.m);
        if ldas_applied {
            positions = lda_step(&positions, &start_pos, &graph)?;
        }
        if !is_finite(&positions) {
            return Err(Error::Divergence {
                iteration,
                value: f64::NAN,
            });
        }

        let mean_displacement = positions
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).norm())
            .sum::<f64>()
            / n as f64;
        if ldas_active && tracker.observe(iteration, mean_displacement) {
            ldas_active = false;
        }

        progress(&IterationEvent {
            iteration,
            loss: loss.value,
            data_loss: data_value,
            rigid_loss: rigid_value,
            ldas_applied,
            ldas_active,
            mean_displacement,
        });

        if keep.contains(&iteration) {
            kept.insert(iteration, positions.clone());
        }
    }

    let end_positions = positions;
    let checkpoint_positions: Vec<Vec<Vec3>> = if config.smooth_all_iterates {
        schedule
            .iter()
            .map(|&c| {
                let h = half.min(c).min(total - c);
                let frames: Vec<&[Vec3]> = (c - h..=c + h).map(|t| kept[&t].as_slice()).collect();
                window_mean(&frames)
            })
            .collect()
    } else {
        schedule.iter().map(|t| kept[t].clone()).collect()
    };

    let mut traj = Trajectory::from_checkpoints(schedule, checkpoint_positions)?;
    traj.end_positions = end_positions;
    let mut recorded = config.clone();
    recorded.data_term = data.kind;
    traj.config = Some(recorded);
    let end_attrs = data
        .target
        .attributes()
        .filter(|a| a.len() == n && start.attributes().is_some_and(|s| s.dim() == a.dim()));
    if let Some(end_attrs) = end_attrs {
        traj = traj.with_attributes(start.attributes().cloned(), Some(end_attrs.clone()))?;
    }

    if config.smooth_all_iterates {
        traj.assign_alphas()?;
        Ok(traj)
    } else {
        temporal_smooth(&traj, config.smoothing_window)
    }
}

/// Mean of `frames`, accumulated as offsets from the middle frame so that
/// identical frames average to themselves bitwise.
fn window_mean(frames: &[&[Vec3]]) -> Vec<Vec3> {
    let center = frames[frames.len() / 2];
    let inv = 1.0 / frames.len() as f64;
    center
        .iter()
        .enumerate()
        .map(|(i, c)| c + frames.iter().map(|f| f[i] - c).sum::<Vec3>() * inv)
        .collect()
}

/// Centered moving average over checkpoints.
///
/// Near the ends the window is truncated symmetrically, so the first and
/// last checkpoints are never altered. `alpha` is recomputed from the
/// smoothed positions unless the trajectory uses the iteration-fraction
/// fallback.
pub fn temporal_smooth(trajectory: &Trajectory, window: usize) -> Result<Trajectory> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::param(format!("smoothing window must be odd and positive, got {window}")));
    }
    let count = trajectory.len();
    let half = window / 2;
    let mut out = trajectory.clone();
    for (i, ckpt) in out.checkpoints.iter_mut().enumerate() {
        let h = half.min(i).min(count.saturating_sub(1) - i);
        if h == 0 {
            continue;
        }
        let frames: Vec<&[Vec3]> = trajectory.checkpoints[i - h..=i + h]
            .iter()
            .map(|c| c.positions.as_slice())
            .collect();
        ckpt.positions = window_mean(&frames);
    }
    if !trajectory.alpha_fallback {
        out.assign_alphas()?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidTransform;
    use crate::regularizers::{max_rest_deviation, DeviationMeasure};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(
            (0..n)
                .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
                .collect(),
        )
        .unwrap()
    }

    fn small_config() -> FitConfig {
        FitConfig {
            k: 6,
            m: 20,
            max_iterations: 200,
            checkpoint_count: 9,
            ..FitConfig::default()
        }
    }

    #[test]
    fn total_loss_hand_value() {
        let start = vec![Vec3::zeros(), Vec3::x()];
        let graph = NeighborGraph::from_positions(&start, 1).unwrap();
        let target = PointCloud::new(vec![Vec3::zeros(), 3.0 * Vec3::x()]).unwrap();
        let data = DataTerm::correspondence(target);
        let current = vec![Vec3::zeros(), 2.0 * Vec3::x()];
        // data: (0 + 1) / 2 = 0.5; rigid: (|1-4| + |1-4|) / 2 = 3.
        let l = total_loss(&current, &data, &graph, 5.0).unwrap();
        assert_abs_diff_eq!(l.value, 0.5 + 5.0 * 3.0, epsilon = 1e-14);
        let pure = total_loss(&current, &data, &graph, 0.0).unwrap();
        assert_eq!(pure, data.evaluate(&current).unwrap());
    }

    #[test]
    fn perfect_fit_at_rest_is_zero() {
        let cloud = random_cloud(20, 1);
        let graph = build_graph(&cloud, 3);
        let data = DataTerm::correspondence(cloud.clone());
        assert_eq!(total_loss(cloud.positions(), &data, &graph, 5.0).unwrap().value, 0.0);
    }

    fn build_graph(cloud: &PointCloud, k: usize) -> NeighborGraph {
        NeighborGraph::from_positions(cloud.positions(), k).unwrap()
    }

    #[test]
    fn correspondence_size_mismatch() {
        let cloud = random_cloud(10, 2);
        let data = DataTerm::correspondence(random_cloud(9, 3));
        let graph = build_graph(&cloud, 3);
        assert!(matches!(
            total_loss(cloud.positions(), &data, &graph, 1.0),
            Err(Error::Parameter(_))
        ));
        let single = PointCloud::new(vec![Vec3::zeros()]).unwrap();
        let target = PointCloud::new(vec![Vec3::x()]).unwrap();
        assert!(matches!(
            fit(&single, &DataTerm::correspondence(target), &FitConfig { k: 1, ..small_config() }),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn chamfer_gradient_matches_finite_differences() {
        let src = random_cloud(15, 4);
        let tgt = random_cloud(11, 5);
        let data = DataTerm::chamfer(tgt);
        let p = src.positions().to_vec();
        let l = data.evaluate(&p).unwrap();
        let h = 1e-7;
        for i in 0..p.len() {
            for c in 0..3 {
                let mut a = p.clone();
                a[i][c] += h;
                let mut b = p.clone();
                b[i][c] -= h;
                let fd = (data.evaluate(&a).unwrap().value - data.evaluate(&b).unwrap().value) / (2.0 * h);
                assert_abs_diff_eq!(l.gradient[i][c], fd, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn checkpoint_schedule() {
        let cfg = FitConfig {
            max_iterations: 230,
            checkpoint_count: 24,
            ..FitConfig::default()
        };
        let s = cfg.checkpoint_iterations();
        assert_eq!(s.len(), 24);
        assert_eq!(s[0], 0);
        assert_eq!(*s.last().unwrap(), 230);
        let short = FitConfig {
            max_iterations: 3,
            ..cfg
        };
        assert_eq!(short.checkpoint_iterations(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn zero_motion_fit() {
        let cloud = random_cloud(30, 6);
        let traj = fit(&cloud, &DataTerm::correspondence(cloud.clone()), &small_config()).unwrap();
        assert!(traj.alpha_fallback);
        for c in &traj.checkpoints {
            for (p, q) in c.positions.iter().zip(cloud.positions()) {
                assert_eq!(p, q);
            }
            assert_abs_diff_eq!(c.alpha, c.iteration as f64 / 200.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn translation_fit_reaches_target_rigidly() {
        let cloud = random_cloud(60, 7);
        let target = crate::geometry::apply_rigid(&cloud, &RigidTransform::translation(Vec3::z()));
        let cfg = FitConfig {
            k: 8,
            step_size: 5e-3,
            max_iterations: 1500,
            ..FitConfig::default()
        };
        let graph = build_graph(&cloud, 8);
        let traj = fit(&cloud, &DataTerm::correspondence(target.clone()), &cfg).unwrap();
        let worst = traj.end_positions.iter().zip(target.positions()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-3, "final error {worst}");
        for c in &traj.checkpoints {
            let dev = max_rest_deviation(&c.positions, &graph, DeviationMeasure::Absolute, None).unwrap();
            assert!(dev < 1e-6, "deviation {dev} at iteration {}", c.iteration);
        }
        assert_eq!(traj.checkpoints[0].alpha, 0.0);
        assert_eq!(traj.checkpoints.last().unwrap().alpha, 1.0);
    }

    #[test]
    fn plain_gd_descends_monotonically() {
        let cloud = random_cloud(40, 8);
        let target = PointCloud::new(
            cloud
                .positions()
                .iter()
                .map(|p| Vec3::new(p.x * 1.5, p.y - p.z, p.z + 0.3))
                .collect(),
        )
        .unwrap();
        let cfg = FitConfig {
            k: 4,
            optimizer: OptimizerKind::PlainGd,
            step_size: 1.0,
            max_iterations: 300,
            ..FitConfig::default()
        }
        .unregularized();
        let mut losses = Vec::new();
        fit_with_progress(&cloud, &DataTerm::correspondence(target), &cfg, |e| losses.push(e.loss)).unwrap();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn ldas_count_and_disable() {
        let cloud = random_cloud(50, 9);
        let target = crate::geometry::apply_rigid(
            &cloud,
            &RigidTransform::about_axis(Vec3::z(), 0.5, Vec3::zeros()).unwrap(),
        );
        let cfg = FitConfig {
            k: 5,
            m: 10,
            max_iterations: 300,
            ..FitConfig::default()
        };
        let mut applied = Vec::new();
        let mut disabled_at = None;
        fit_with_progress(&cloud, &DataTerm::correspondence(target), &cfg, |e| {
            if e.ldas_applied {
                applied.push(e.iteration);
                assert!(disabled_at.is_none(), "averaging after disable");
            }
            if !e.ldas_active && disabled_at.is_none() {
                disabled_at = Some(e.iteration);
            }
        })
        .unwrap();
        let disabled_at = disabled_at.expect("policy never fired");
        assert!(disabled_at <= 240);
        assert_eq!(applied.len(), disabled_at / cfg.m);
        assert!(applied.iter().all(|t| t % cfg.m == 0));
    }

    #[test]
    fn divergence_is_reported() {
        let cloud = random_cloud(20, 10);
        let target = random_cloud(20, 11);
        let cfg = FitConfig {
            k: 3,
            optimizer: OptimizerKind::PlainGd,
            step_size: 1e3,
            max_iterations: 500,
            ..FitConfig::default()
        };
        let err = fit(&cloud, &DataTerm::correspondence(target), &cfg).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn k_too_large() {
        let cloud = random_cloud(5, 12);
        let cfg = FitConfig { k: 5, ..small_config() };
        assert!(matches!(
            fit(&cloud, &DataTerm::correspondence(cloud.clone()), &cfg),
            Err(Error::Parameter(_))
        ));
    }

    fn line_trajectory(count: usize, f: impl Fn(usize) -> f64) -> Trajectory {
        let positions = (0..count).map(|i| vec![Vec3::new(f(i), 0.0, 0.0), Vec3::new(-1.0, 2.0, 0.0)]).collect();
        Trajectory::from_checkpoints((0..count).collect(), positions).unwrap()
    }

    #[test]
    fn smoothing_affine_and_identity() {
        let traj = line_trajectory(12, |i| 0.5 + 0.25 * i as f64);
        let smoothed = temporal_smooth(&traj, 7).unwrap();
        for (a, b) in smoothed.checkpoints.iter().zip(&traj.checkpoints) {
            assert_abs_diff_eq!(a.positions[0], b.positions[0], epsilon = 1e-12);
        }
        assert_eq!(temporal_smooth(&traj, 1).unwrap(), traj);
        assert!(matches!(temporal_smooth(&traj, 4), Err(Error::Parameter(_))));
    }

    #[test]
    fn smoothing_spike() {
        let traj = line_trajectory(9, |i| if i == 4 { 7.0 } else { 0.0 });
        let smoothed = temporal_smooth(&traj, 7).unwrap();
        assert_abs_diff_eq!(smoothed.checkpoints[4].positions[0].x, 1.0, epsilon = 1e-15);
        assert_eq!(smoothed.checkpoints[0].positions, traj.checkpoints[0].positions);
        assert_eq!(smoothed.checkpoints[8].positions, traj.checkpoints[8].positions);
    }

    #[test]
    fn smoothing_window_larger_than_trajectory() {
        let traj = line_trajectory(3, |i| [0.0, 3.0, 0.0][i]);
        let smoothed = temporal_smooth(&traj, 7).unwrap();
        assert_abs_diff_eq!(smoothed.checkpoints[1].positions[0].x, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn per_iterate_smoothing_pins_endpoints() {
        let cloud = random_cloud(30, 13);
        let target = crate::geometry::apply_rigid(&cloud, &RigidTransform::translation(Vec3::x()));
        let cfg = FitConfig {
            k: 5,
            max_iterations: 100,
            checkpoint_count: 5,
            smooth_all_iterates: true,
            ..FitConfig::default()
        };
        let traj = fit(&cloud, &DataTerm::correspondence(target), &cfg).unwrap();
        assert_eq!(traj.checkpoints[0].positions, cloud.positions());
        assert_eq!(traj.checkpoints.last().unwrap().positions, traj.end_positions);
        assert_eq!(traj.checkpoints.last().unwrap().alpha, 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        for bad in [
            FitConfig { max_iterations: 0, ..FitConfig::default() },
            FitConfig { checkpoint_count: 1, ..FitConfig::default() },
            FitConfig { smoothing_window: 6, ..FitConfig::default() },
            FitConfig { step_size: 0.0, ..FitConfig::default() },
            FitConfig { lambda_rigid: -1.0, ..FitConfig::default() },
            FitConfig { m: 0, ..FitConfig::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn config_json_is_strict() {
        let cfg: FitConfig = serde_json::from_str(r#"{"lambda_rigid": 2.5, "k": 70}"#).unwrap();
        assert_eq!(cfg.lambda_rigid, 2.5);
        assert_eq!(cfg.m, 100);
        assert!(serde_json::from_str::<FitConfig>(r#"{"lambda_rigd": 2.5}"#).is_err());
    }
}
