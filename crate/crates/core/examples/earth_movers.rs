//! Compares exact EMD (optimal assignment) with the entropic approximation
//! over a sweep of regularization strengths.
//!
//! Usage: `cargo run --release --example earth_movers [points]`

use std::time::Instant;

use pointmorph::metrics::mean_pairwise_distance;
use pointmorph::{chamfer, emd_entropic, emd_exact, PointCloud, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn gaussian_cloud(n: usize, center: Vec3, rng: &mut ChaCha8Rng) -> pointmorph::Result<PointCloud> {
    let normal = Normal::new(0.0, 0.3).expect("valid deviation");
    PointCloud::new(
        (0..n)
            .map(|_| center + Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng)))
            .collect(),
    )
}

fn main() -> pointmorph::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = gaussian_cloud(n, Vec3::zeros(), &mut rng)?;
    let b = gaussian_cloud(n, Vec3::new(0.5, 0.0, 0.0), &mut rng)?;

    let t = Instant::now();
    let exact = emd_exact(&a, &b)?;
    println!("{n} points: exact EMD {exact:.6} ({:.1?}), Chamfer {:.6}", t.elapsed(), chamfer(&a, &b)?);

    let scale = mean_pairwise_distance(&a, &b);
    for factor in [0.1, 0.05, 0.02, 0.01] {
        let t = Instant::now();
        let approx = emd_entropic(&a, &b, factor * scale, 2000)?;
        println!(
            "  epsilon = {factor:>4} x mean distance: {approx:.6} ({:+.2}% vs exact, {:.1?})",
            100.0 * (approx - exact) / exact,
            t.elapsed()
        );
    }
    Ok(())
}
