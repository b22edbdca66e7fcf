//! Local rigidity regularizers over the frozen start-state neighbor graph.
//!
//! Both operate on squared inter-point distances `d = |p_i - p_j|^2`:
//!
//! - [`rigid_loss`]: `(1 / kN) * sum_i sum_{j in NN_k(i)} |d0_ij - dt_ij|`
//!   with its analytic subgradient (`sign(0) = 0`, with a relative
//!   tolerance for rounding noise).
//! - [`lda_step`]: replaces each point's displacement from the start state
//!   by the mean displacement of its start-state neighbors (the point itself
//!   excluded).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{NeighborGraph, Vec3};

/// A loss value together with its gradient with respect to positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValueGrad {
    pub value: f64,
    pub gradient: Vec<Vec3>,
}

impl LossValueGrad {
    pub fn zeros(n: usize) -> Self {
        LossValueGrad {
            value: 0.0,
            gradient: vec![Vec3::zeros(); n],
        }
    }

    /// `self + weight * other`, gradients included.
    pub fn add_scaled(mut self, other: &LossValueGrad, weight: f64) -> Self {
        self.value += weight * other.value;
        for (g, o) in self.gradient.iter_mut().zip(&other.gradient) {
            *g += weight * o;
        }
        self
    }
}

fn check_len(positions: &[Vec3], graph: &NeighborGraph, what: &str) -> Result<()> {
    if positions.len() != graph.len() {
        return Err(Error::param(format!(
            "{what} has {} points but the neighbor graph has {}",
            positions.len(),
            graph.len()
        )));
    }
    Ok(())
}

/// Residuals within this fraction of the larger squared distance count as
/// zero for the subgradient, so rounding noise after a rigid motion does not
/// produce a full-magnitude sign.
pub const REST_RELATIVE_TOLERANCE: f64 = 1e-9;

fn sign(residual: f64, scale: f64) -> f64 {
    if residual.abs() <= REST_RELATIVE_TOLERANCE * scale {
        0.0
    } else {
        residual.signum()
    }
}

pub fn rigid_loss(positions: &[Vec3], graph: &NeighborGraph) -> Result<LossValueGrad> {
    check_len(positions, graph, "positions")?;
    let n = positions.len();
    let k = graph.k();
    let scale = 2.0 / (k * n) as f64;

    // d(|d0 - dt|)/d(p_i) = -sign(d0 - dt) * 2 (p_i - p_j); the negation goes to p_j.
    let edge_coeff = |e: usize, i: usize| -> (f64, Vec3) {
        let j = graph.edge_target(e);
        let diff = positions[i] - positions[j];
        let (d0, dt) = (graph.edge_rest(e), diff.norm_squared());
        let residual = d0 - dt;
        (residual, -sign(residual, d0.max(dt)) * scale * diff)
    };

    // Per-point gather over outgoing and incoming edges keeps the reduction
    // order fixed, so the parallel result equals the serial one bitwise.
    let per_point: Vec<(f64, Vec3)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut value = 0.0;
            let mut grad = Vec3::zeros();
            for e in i * k..(i + 1) * k {
                let (residual, g) = edge_coeff(e, i);
                value += residual.abs();
                grad += g;
            }
            for &e in graph.incoming(i) {
                let (_, g) = edge_coeff(e, e / k);
                grad -= g;
            }
            (value, grad)
        })
        .collect();

    let total: f64 = per_point.iter().map(|(v, _)| v).sum();
    Ok(LossValueGrad {
        value: total / (k * n) as f64,
        gradient: per_point.into_iter().map(|(_, g)| g).collect(),
    })
}

pub fn lda_step(positions_t: &[Vec3], positions_0: &[Vec3], graph: &NeighborGraph) -> Result<Vec<Vec3>> {
    check_len(positions_t, graph, "current positions")?;
    check_len(positions_0, graph, "start positions")?;
    let inv_k = 1.0 / graph.k() as f64;
    Ok((0..positions_t.len())
        .into_par_iter()
        .map(|i| {
            let mean_disp = graph
                .neighbors(i)
                .iter()
                .map(|&j| positions_t[j] - positions_0[j])
                .sum::<Vec3>()
                * inv_k;
            positions_0[i] + mean_disp
        })
        .collect())
}

/// How [`max_rest_deviation`] measures a pair's change in squared distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviationMeasure {
    /// `|d0 - dt|`
    Absolute,
    /// `|d0 - dt| / d0`; pairs with `d0 <= 1e-12` are skipped.
    Relative,
}

/// Largest deviation of squared neighbor distances from their rest values.
///
/// With `part_labels`, only pairs whose endpoints share a label count.
pub fn max_rest_deviation(
    positions: &[Vec3],
    graph: &NeighborGraph,
    measure: DeviationMeasure,
    part_labels: Option<&[u32]>,
) -> Result<f64> {
    check_len(positions, graph, "positions")?;
    if let Some(labels) = part_labels {
        if labels.len() != positions.len() {
            return Err(Error::param("part labels must match point count"));
        }
    }
    let mut worst = 0.0f64;
    for (i, j, d0) in graph.edges() {
        if part_labels.is_some_and(|l| l[i] != l[j]) {
            continue;
        }
        let dev = (d0 - (positions[i] - positions[j]).norm_squared()).abs();
        let dev = match measure {
            DeviationMeasure::Absolute => dev,
            DeviationMeasure::Relative if d0 > 1e-12 => dev / d0,
            DeviationMeasure::Relative => continue,
        };
        worst = worst.max(dev);
    }
    Ok(worst)
}
