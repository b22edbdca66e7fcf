//! Scores three hinge trajectories with SI-CD and SI-EMD: the closed-form
//! ground truth, a regularized fit, and a trajectory frozen at the start.
//!
//! Usage: `cargo run --release --example scene_metric`

use pointmorph::metrics::mean_pairwise_distance;
use pointmorph::{
    fit, generate, ground_truth_trajectory, si_metric, DataTerm, Distance, FitConfig, SceneKind, SceneSpec, Trajectory,
};

fn main() -> pointmorph::Result<()> {
    let spec = SceneSpec {
        points_per_part: 250,
        ..SceneSpec::new(SceneKind::Hinge)
    };
    let scene = generate(&spec)?;
    let config = FitConfig {
        k: 50,
        max_iterations: 1500,
        ..FitConfig::default()
    };

    let ground_truth = ground_truth_trajectory(&spec, config.checkpoint_count)?;
    let fitted = fit(&scene.start, &DataTerm::correspondence(scene.end.clone()), &config)?;
    let frozen = Trajectory::from_checkpoints(
        (0..config.checkpoint_count).collect(),
        vec![scene.start.positions().to_vec(); config.checkpoint_count],
    )?;

    let epsilon = 0.01 * mean_pairwise_distance(&scene.start, &scene.end);
    let distances = [
        ("SI-CD", Distance::Chamfer),
        ("SI-EMD", Distance::EmdExact),
        ("SI-EMD (entropic)", Distance::EmdEntropic { epsilon, iterations: 300 }),
    ];
    for (label, traj) in [("ground truth", &ground_truth), ("fitted", &fitted), ("frozen", &frozen)] {
        let scores: Vec<String> = distances
            .iter()
            .map(|(name, d)| Ok(format!("{name} {:.4e}", si_metric(traj, &scene.start, &scene.end, d)?.aggregate)))
            .collect::<pointmorph::Result<_>>()?;
        println!("{label:>12}: {}", scores.join(", "));
    }

    let report = si_metric(&fitted, &scene.start, &scene.end, &Distance::Chamfer)?;
    println!("\nfitted trajectory, per checkpoint:");
    for step in &report.per_checkpoint {
        println!("  iteration {:>5}  alpha {:.3}  f {:.4e}", step.iteration, step.alpha, step.f_value);
    }
    Ok(())
}
