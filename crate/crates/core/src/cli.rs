//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage or parameter errors, 1 for runtime
//! failures. Diagnostics go to stderr.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::interpolation::sample_state;
use crate::io::{
    read_json, read_ply, read_trajectory, write_json, write_ply, write_report, write_trajectory, Conventions,
    ReportDocument,
};
use crate::metrics::{mean_pairwise_distance, si_metric, Distance};
use crate::optimizer::{fit_with_progress, temporal_smooth, DataTerm, DataTermKind, FitConfig};
use crate::scenes::{generate, ground_truth_trajectory, SceneSpec};

pub const FIT_LOG_FILE: &str = "fit_log.jsonl";

#[derive(Debug, Parser)]
#[command(name = "pointmorph", version, about = "Point-level scene interpolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DataTermArg {
    Mse,
    Chamfer,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistanceArg {
    Cd,
    Emd,
    EmdEntropic,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene from a JSON spec.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the closed-form trajectory with this many steps.
        #[arg(long)]
        gt_steps: Option<usize>,
    },
    /// Fit a trajectory from a start cloud toward a target cloud.
    Fit {
        #[arg(long)]
        start: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// JSON fit configuration; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lambda_rigid: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        step_size: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        checkpoints: Option<usize>,
        #[arg(long, value_enum)]
        data_term: Option<DataTermArg>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Temporally smooth a trajectory directory.
    Smooth {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long, default_value_t = 7)]
        window: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trajectory with the scene interpolation metric.
    Metrics {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        gt_start: PathBuf,
        #[arg(long)]
        gt_end: PathBuf,
        #[arg(long, value_enum, default_value = "cd")]
        distance: DistanceArg,
        /// Entropic regularization; defaults to 0.01 x mean pairwise
        /// distance between the ground-truth clouds.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 2000)]
        sinkhorn_iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the state at a given progress value.
    Sample {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { spec, out, gt_steps } => {
            let spec: SceneSpec = read_json(&spec)?;
            let scene = generate(&spec)?;
            create_dir(&out)?;
            write_ply(&scene.start, out.join("start.ply"))?;
            write_ply(&scene.end, out.join("end.ply"))?;
            write_json(&spec, &out.join("spec.json"))?;
            if let Some(steps) = gt_steps {
                write_trajectory(&ground_truth_trajectory(&spec, steps)?, out.join("ground_truth"))?;
            }
            println!("wrote {} points per state to {}", scene.start.len(), out.display());
        }
        Command::Fit {
            start,
            target,
            config,
            out,
            lambda_rigid,
            k,
            m,
            step_size,
            iters,
            checkpoints,
            data_term,
            seed,
        } => {
            let mut cfg: FitConfig = match config {
                Some(path) => read_json(&path)?,
                None => FitConfig::default(),
            };
            if let Some(v) = lambda_rigid {
                cfg.lambda_rigid = v;
            }
            if let Some(v) = k {
                cfg.k = v;
            }
            if let Some(v) = m {
                cfg.m = v;
            }
            if let Some(v) = step_size {
                cfg.step_size = v;
            }
            if let Some(v) = iters {
                cfg.max_iterations = v;
            }
            if let Some(v) = checkpoints {
                cfg.checkpoint_count = v;
            }
            if let Some(v) = data_term {
                cfg.data_term = match v {
                    DataTermArg::Mse => DataTermKind::CorrespondenceMse,
                    DataTermArg::Chamfer => DataTermKind::ChamferToTarget,
                };
            }
            if let Some(v) = seed {
                cfg.rng_seed = v;
            }
            cfg.validate()?;

            let start = read_ply(&start)?;
            let target = read_ply(&target)?;
            create_dir(&out)?;
            let log_path = out.join(FIT_LOG_FILE);
            let mut log = BufWriter::new(File::create(&log_path).map_err(|e| Error::io(&log_path, e))?);
            let mut log_error = None;
            let data = DataTerm::new(cfg.data_term, target);
            let traj = fit_with_progress(&start, &data, &cfg, |event| {
                if log_error.is_none() {
                    let line = serde_json::to_string(event).expect("iteration events serialize");
                    if let Err(e) = writeln!(log, "{line}") {
                        log_error = Some(e);
                    }
                }
            })?;
            if let Some(e) = log_error {
                return Err(Error::io(&log_path, e));
            }
            log.flush().map_err(|e| Error::io(&log_path, e))?;
            write_trajectory(&traj, &out)?;
            println!("wrote {} checkpoints to {}", traj.len(), out.display());
        }
        Command::Smooth { traj, window, out } => {
            let smoothed = temporal_smooth(&read_trajectory(&traj)?, window)?;
            write_trajectory(&smoothed, &out)?;
        }
        Command::Metrics {
            traj,
            gt_start,
            gt_end,
            distance,
            epsilon,
            sinkhorn_iters,
            out,
        } => {
            let traj = read_trajectory(&traj)?;
            let gt_start = read_ply(&gt_start)?;
            let gt_end = read_ply(&gt_end)?;
            let mut conventions = Conventions::standard();
            let d = match distance {
                DistanceArg::Cd => Distance::Chamfer,
                DistanceArg::Emd => Distance::EmdExact,
                DistanceArg::EmdEntropic => {
                    let epsilon = epsilon.unwrap_or_else(|| 0.01 * mean_pairwise_distance(&gt_start, &gt_end));
                    conventions.entropic_epsilon = Some(epsilon);
                    conventions.entropic_iterations = Some(sinkhorn_iters);
                    Distance::EmdEntropic {
                        epsilon,
                        iterations: sinkhorn_iters,
                    }
                }
            };
            let report = si_metric(&traj, &gt_start, &gt_end, &d)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_dir(parent)?;
            }
            write_report(&ReportDocument::new(&report, conventions), &out)?;
            println!("aggregate {}", report.aggregate);
        }
        Command::Sample { traj, alpha, out } => {
            let cloud: PointCloud = sample_state(&read_trajectory(&traj)?, alpha)?;
            write_ply(&cloud, &out)?;
        }
    }
    Ok(())
}
