//! Geometry distances and the scene interpolation metric.
//!
//! Conventions:
//!
//! - Chamfer: symmetric, mean-normalized, squared Euclidean nearest-neighbor
//!   distances.
//! - EMD: unit mass per point, linear Euclidean ground cost, equal-size
//!   clouds, normalized by the point count.
//!
//! The scene interpolation metric scores each checkpoint with
//! `f_t = (1 - a_t) d(P_start, P_t) + a_t d(P_end, P_t)` and integrates
//! `f` over `a` with the trapezoidal rule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};
use crate::optimizer::Trajectory;
use crate::spatial::KdTree;

/// Largest cloud `emd_exact` accepts by default; the solver is cubic.
pub const DEFAULT_EXACT_EMD_MAX_POINTS: usize = 2000;

pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("chamfer distance needs non-empty clouds"));
    }
    Ok(mean_nn_sq_dist(a.positions(), b.positions()) + mean_nn_sq_dist(b.positions(), a.positions()))
}

fn mean_nn_sq_dist(from: &[Vec3], to: &[Vec3]) -> f64 {
    let tree = KdTree::new(to);
    let dists: Vec<f64> = from.par_iter().map(|p| tree.nearest(p).sq_dist).collect();
    dists.iter().sum::<f64>() / from.len() as f64
}

fn cost_matrix(a: &[Vec3], b: &[Vec3]) -> Vec<f64> {
    a.par_iter()
        .flat_map_iter(|p| b.iter().map(move |q| (p - q).norm()))
        .collect()
}

/// Minimum-cost perfect matching on a square `n x n` row-major cost matrix,
/// by shortest augmenting paths with dual potentials. Returns `row -> col`.
fn optimal_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    // 1-based arrays; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched_row[0] = row;
        let mut col0 = 0;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = matched_row[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            let cost_row = &cost[(r - 1) * n..r * n];
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let slack = cost_row[col - 1] - u[r] - v[col];
                if slack < min_slack[col] {
                    min_slack[col] = slack;
                    way[col] = col0;
                }
                if min_slack[col] < delta {
                    delta = min_slack[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[matched_row[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_slack[col] -= delta;
                }
            }
            col0 = col1;
            if matched_row[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            matched_row[col0] = matched_row[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        assignment[matched_row[col] - 1] = col - 1;
    }
    assignment
}

pub fn emd_exact(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    emd_exact_bounded(a, b, DEFAULT_EXACT_EMD_MAX_POINTS)
}

/// [`emd_exact`] with an explicit size bound.
pub fn emd_exact_bounded(a: &PointCloud, b: &PointCloud, max_points: usize) -> Result<f64> {
    let n = a.len();
    if n != b.len() {
        return Err(Error::param(format!(
            "exact EMD needs equal-size clouds, got {} and {}",
            n,
            b.len()
        )));
    }
    if n > max_points {
        return Err(Error::param(format!(
            "exact EMD limited to {max_points} points, got {n}; use the entropic solver"
        )));
    }
    let cost = cost_matrix(a.positions(), b.positions());
    let assignment = optimal_assignment(&cost, n);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok(total / n as f64)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Transport cost of the entropically regularized plan, by log-domain
/// Sinkhorn iterations with uniform marginals and linear ground cost.
///
/// Every 10 iterations the row marginals are checked; iteration stops once
/// they match to `1e-12` (L1).
pub fn emd_entropic(a: &PointCloud, b: &PointCloud, epsilon: f64, iterations: usize) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param("entropic EMD needs a finite epsilon > 0"));
    }
    if iterations == 0 {
        return Err(Error::param("entropic EMD needs at least one iteration"));
    }
    let (n, m) = (a.len(), b.len());
    let cost = cost_matrix(a.positions(), b.positions());
    // Potentials are kept in units of epsilon against the scaled cost.
    let scaled: Vec<f64> = cost.iter().map(|c| c / epsilon).collect();
    let scaled_t: Vec<f64> = (0..m * n).map(|t| scaled[(t % n) * m + t / n]).collect();
    let log_a = -(n as f64).ln();
    let log_b = -(m as f64).ln();
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    let log_plan = |u: &[f64], v: &[f64], i: usize, j: usize| u[i] + v[j] - scaled[i * m + j] + log_a + log_b;

    for iteration in 1..=iterations {
        u = scaled
            .par_chunks(m)
            .map(|row| -log_sum_exp(row.iter().zip(&v).map(|(k, vj)| vj - k + log_b)))
            .collect();
        v = scaled_t
            .par_chunks(n)
            .map(|col| -log_sum_exp(col.iter().zip(&u).map(|(k, ui)| ui - k + log_a)))
            .collect();
        if !iteration.is_multiple_of(10) && iteration != iterations {
            continue;
        }
        // Columns are exact after the v-update; check rows.
        let row_err: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let mass: f64 = (0..m).map(|j| log_plan(&u, &v, i, j).exp()).sum();
                (mass - 1.0 / n as f64).abs()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        if !row_err.is_finite() {
            return Err(Error::Numerical(format!(
                "Sinkhorn scaling failed at epsilon={epsilon}; try a larger epsilon"
            )));
        }
        if row_err < 1e-12 {
            break;
        }
    }

    let per_row: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| (0..m).map(|j| log_plan(&u, &v, i, j).exp() * cost[i * m + j]).sum())
        .collect();
    let value: f64 = per_row.iter().sum();
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "Sinkhorn plan is not finite at epsilon={epsilon}; try a larger epsilon"
        )));
    }
    Ok(value)
}

/// Mean Euclidean distance over all pairs `(a_i, b_j)`.
pub fn mean_pairwise_distance(a: &PointCloud, b: &PointCloud) -> f64 {
    cost_matrix(a.positions(), b.positions()).iter().sum::<f64>() / (a.len() * b.len()) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    #[serde(rename = "cd")]
    Chamfer,
    EmdExact,
    EmdEntropic,
}

/// A geometry distance `d(., .)` for the scene interpolation metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distance {
    Chamfer,
    EmdExact,
    EmdEntropic { epsilon: f64, iterations: usize },
}

impl Distance {
    pub fn kind(&self) -> DistanceKind {
        match self {
            Distance::Chamfer => DistanceKind::Chamfer,
            Distance::EmdExact => DistanceKind::EmdExact,
            Distance::EmdEntropic { .. } => DistanceKind::EmdEntropic,
        }
    }

    pub fn evaluate(&self, a: &PointCloud, b: &PointCloud) -> Result<f64> {
        match *self {
            Distance::Chamfer => chamfer(a, b),
            Distance::EmdExact => emd_exact(a, b),
            Distance::EmdEntropic { epsilon, iterations } => emd_entropic(a, b, epsilon, iterations),
        }
    }
}

/// `(1 - alpha) d(p_start, p_t) + alpha d(p_end, p_t)` for `alpha` in `[0, 1]`.
pub fn step_quality(
    p_t: &PointCloud,
    p_start: &PointCloud,
    p_end: &PointCloud,
    alpha: f64,
    d: &Distance,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param(format!("step quality weight {alpha} is outside [0, 1]")));
    }
    blended_quality(p_t, p_start, p_end, alpha, d)
}

fn blended_quality(p_t: &PointCloud, p_start: &PointCloud, p_end: &PointCloud, alpha: f64, d: &Distance) -> Result<f64> {
    Ok((1.0 - alpha) * d.evaluate(p_start, p_t)? + alpha * d.evaluate(p_end, p_t)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub iteration: usize,
    pub alpha: f64,
    pub f_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricReport {
    pub distance_kind: DistanceKind,
    pub per_checkpoint: Vec<StepRecord>,
    pub aggregate: f64,
}

/// `sum_t (a_t - a_{t-1}) (f_t + f_{t-1}) / 2`
pub fn trapezoid(steps: &[StepRecord]) -> f64 {
    steps
        .windows(2)
        .map(|w| (w[1].alpha - w[0].alpha) * (w[1].f_value + w[0].f_value) / 2.0)
        .sum()
}

/// Scores every checkpoint of `trajectory` against the two ground-truth
/// states and integrates over the stored `alpha` values.
///
/// Stored values are used as-is, including any transient overshoot above 1.
pub fn si_metric(
    trajectory: &Trajectory,
    gt_start: &PointCloud,
    gt_end: &PointCloud,
    d: &Distance,
) -> Result<MetricReport> {
    if trajectory.len() < 2 {
        return Err(Error::param("scene interpolation metric needs at least two checkpoints"));
    }
    let per_checkpoint = trajectory
        .checkpoints
        .par_iter()
        .map(|c| {
            let cloud = PointCloud::new(c.positions.clone())?;
            Ok(StepRecord {
                iteration: c.iteration,
                alpha: c.alpha,
                f_value: blended_quality(&cloud, gt_start, gt_end, c.alpha, d)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport {
        distance_kind: d.kind(),
        aggregate: trapezoid(&per_checkpoint),
        per_checkpoint,
    })
}
