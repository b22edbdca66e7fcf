//! Generates every synthetic scene kind and reports how much of each motion
//! is rigid within parts.
//!
//! Usage: `cargo run --release --example scenes [output_dir]`

use std::path::PathBuf;

use pointmorph::io::write_ply;
use pointmorph::regularizers::{max_rest_deviation, DeviationMeasure};
use pointmorph::{build_neighbor_graph, generate, ground_truth_trajectory, SceneKind, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("pointmorph_scenes"));
    std::fs::create_dir_all(&out)?;

    for kind in [SceneKind::RigidTranslate, SceneKind::RigidRotate, SceneKind::Hinge, SceneKind::Bend] {
        let spec = SceneSpec {
            points_per_part: 500,
            ..SceneSpec::new(kind)
        };
        let scene = generate(&spec)?;
        let graph = build_neighbor_graph(&scene.start, 20)?;
        let labels = scene.part_labels();
        let within = max_rest_deviation(scene.end.positions(), &graph, DeviationMeasure::Relative, Some(labels))?;
        let overall = max_rest_deviation(scene.end.positions(), &graph, DeviationMeasure::Relative, None)?;
        let gt = ground_truth_trajectory(&spec, 5)?;
        println!(
            "{kind:?}: {} points, max relative deviation within parts {within:.2e}, across all pairs {overall:.2e}, ground-truth alphas {:.3?}",
            scene.start.len(),
            gt.alphas()
        );
        let name = format!("{kind:?}").to_lowercase();
        write_ply(&scene.start, out.join(format!("{name}_start.ply")))?;
        write_ply(&scene.end, out.join(format!("{name}_end.ply")))?;
    }
    println!("PLY files in {}", out.display());
    Ok(())
}
