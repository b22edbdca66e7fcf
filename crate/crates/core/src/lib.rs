//! Point-level scene interpolation.
//!
//! Deforms a start-state point cloud toward an end state by regularized
//! gradient descent on point positions, records the resulting Lagrangian
//! trajectory, and scores trajectories with the scene interpolation metric
//! (SI-CD / SI-EMD).
//!
//! The pieces, bottom-up:
//!
//! - [`geometry`]: point clouds, rigid transforms, frozen k-NN graphs.
//! - [`regularizers`]: local distance preservation loss and the local
//!   displacement averaging step.
//! - [`optimizer`]: the fitting loop, checkpointing and temporal smoothing.
//! - [`interpolation`]: progress `alpha`, state sampling, attribute blending.
//! - [`metrics`]: Chamfer, exact and entropic EMD, SI aggregation.
//! - [`scenes`]: synthetic articulated scenes with closed-form motion.
//! - [`io`] and [`cli`]: PLY, JSON manifests/reports, command line.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod interpolation;
pub mod io;
pub mod metrics;
pub mod optimizer;
pub mod regularizers;
pub mod scenes;
mod spatial;

pub use error::{Error, Result};
pub use geometry::{apply_rigid, build_neighbor_graph, Attributes, NeighborGraph, PointCloud, RigidTransform, Vec3};
pub use interpolation::{blend_attributes, progress_alpha, sample_state};
pub use metrics::{chamfer, emd_entropic, emd_exact, si_metric, step_quality, Distance, MetricReport};
pub use optimizer::{
    fit, fit_with_progress, temporal_smooth, total_loss, Checkpoint, DataTerm, DataTermKind, FitConfig,
    IterationEvent, LdasDisablePolicy, OptimizerKind, Trajectory,
};
pub use regularizers::{lda_step, rigid_loss, LossValueGrad};
pub use scenes::{generate, ground_truth_trajectory, Scene, SceneKind, SceneSpec};
