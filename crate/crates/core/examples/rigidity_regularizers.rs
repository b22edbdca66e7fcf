//! Builds the frozen start-state neighbor graph and evaluates both rigidity
//! regularizers under a rigid motion, a stretch, and noisy displacements.
//!
//! Usage: `cargo run --release --example rigidity_regularizers`

use pointmorph::{build_neighbor_graph, generate, lda_step, rigid_loss, RigidTransform, SceneKind, SceneSpec, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pointmorph::Result<()> {
    let scene = generate(&SceneSpec::new(SceneKind::RigidRotate))?;
    let start = scene.start.positions();
    let graph = build_neighbor_graph(&scene.start, 30)?;
    println!("{} points, k = {}, {} edges", graph.len(), graph.k(), graph.len() * graph.k());

    let xf = RigidTransform::about_axis(Vec3::new(1.0, 1.0, 0.0), 0.8, Vec3::new(0.5, 0.0, 0.0))?;
    let rotated: Vec<Vec3> = start.iter().map(|p| xf.apply(p)).collect();
    let stretched: Vec<Vec3> = start.iter().map(|p| Vec3::new(1.2 * p.x, p.y, p.z)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noisy: Vec<Vec3> = start
        .iter()
        .map(|p| p + 0.02 * Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();

    for (name, positions) in [("rigid", &rotated), ("stretch", &stretched), ("noisy", &noisy)] {
        let loss = rigid_loss(positions, &graph)?;
        let grad_norm = loss.gradient.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
        println!("{name:>8}: rigid loss {:.3e}, gradient norm {grad_norm:.3e}", loss.value);
    }

    // One averaging step pulls the noisy displacements toward their local mean.
    let averaged = lda_step(&noisy, start, &graph)?;
    println!(
        "averaging step: rigid loss {:.3e} -> {:.3e}",
        rigid_loss(&noisy, &graph)?.value,
        rigid_loss(&averaged, &graph)?.value
    );
    Ok(())
}
