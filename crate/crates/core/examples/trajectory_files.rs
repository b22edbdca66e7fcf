//! Fits a small bend scene, writes the trajectory directory, reads it back,
//! and samples intermediate states with blended colors.
//!
//! Usage: `cargo run --release --example trajectory_files [output_dir]`

use std::path::PathBuf;

use pointmorph::io::{read_trajectory, write_ply, write_trajectory};
use pointmorph::{fit, generate, sample_state, DataTerm, FitConfig, SceneKind, SceneSpec};

fn main() -> pointmorph::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("pointmorph_trajectory"));
    let scene = generate(&SceneSpec {
        points_per_part: 400,
        ..SceneSpec::new(SceneKind::Bend)
    })?;
    let config = FitConfig {
        k: 40,
        max_iterations: 1000,
        ..FitConfig::default()
    };
    let traj = fit(&scene.start, &DataTerm::correspondence(scene.end.clone()), &config)?;

    let manifest = write_trajectory(&traj, &out)?;
    println!("wrote {} checkpoints to {}", manifest.checkpoint_files.len(), out.display());

    let back = read_trajectory(&out)?;
    assert_eq!(back.alphas(), traj.alphas());
    for q in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let state = sample_state(&back, q)?;
        let color = state.attributes().map(|a| a.row(0).to_vec()).unwrap_or_default();
        let path = out.join(format!("sample_{:03}.ply", (q * 100.0) as u32));
        write_ply(&state, &path)?;
        println!("alpha {q:.2}: centroid {:.3?}, first color {color:.3?} -> {}", state.centroid().as_slice(), path.display());
    }
    Ok(())
}
