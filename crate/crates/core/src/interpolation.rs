//! Progress along a trajectory and sampling of intermediate states.

use crate::error::{Error, Result};
use crate::geometry::{Attributes, PointCloud, Vec3};
use crate::optimizer::Trajectory;

const DEGENERATE_TRAVEL: f64 = 1e-12;

/// Fraction of the total distance travelled: `sum |p_t - p_0| / sum |p_T - p_0|`.
///
/// Norms are plain (not squared) Euclidean. Returns `None` when the end
/// state has not moved (denominator below `1e-12`); callers pick a fallback.
pub fn progress_alpha(positions_t: &[Vec3], start: &[Vec3], end: &[Vec3]) -> Result<Option<f64>> {
    if positions_t.len() != start.len() || end.len() != start.len() {
        return Err(Error::param(format!(
            "progress needs equal point counts, got {}, {} and {}",
            positions_t.len(),
            start.len(),
            end.len()
        )));
    }
    let travelled: f64 = positions_t.iter().zip(start).map(|(p, s)| (p - s).norm()).sum();
    let total: f64 = end.iter().zip(start).map(|(p, s)| (p - s).norm()).sum();
    if total < DEGENERATE_TRAVEL {
        return Ok(None);
    }
    Ok(Some(travelled / total))
}

/// `(1 - alpha) * start + alpha * end`, elementwise.
pub fn blend_attributes(start: &Attributes, end: &Attributes, alpha: f64) -> Result<Attributes> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param(format!("blend weight {alpha} is outside [0, 1]")));
    }
    if start.dim() != end.dim() || start.len() != end.len() {
        return Err(Error::param("attribute tables differ in shape"));
    }
    let values = start
        .values()
        .iter()
        .zip(end.values())
        .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
        .collect();
    Attributes::new(start.dim(), values)
}

/// The state at progress `alpha_query`, linearly interpolated between the
/// two checkpoints that bracket it.
///
/// Bracketing uses the running maximum of the stored `alpha` values so an
/// oscillating optimizer still gives a well-defined lookup; the stored values
/// themselves are left alone. `0` and `1` return the first and last
/// checkpoint exactly.
pub fn sample_state(trajectory: &Trajectory, alpha_query: f64) -> Result<PointCloud> {
    if trajectory.len() < 2 {
        return Err(Error::param("sampling needs a trajectory with at least two checkpoints"));
    }
    if !(0.0..=1.0).contains(&alpha_query) {
        return Err(Error::param(format!("query alpha {alpha_query} is outside [0, 1]")));
    }
    let ckpts = &trajectory.checkpoints;
    let positions = if alpha_query == 0.0 {
        ckpts[0].positions.clone()
    } else if alpha_query == 1.0 {
        ckpts[ckpts.len() - 1].positions.clone()
    } else {
        let mut monotone = Vec::with_capacity(ckpts.len());
        let mut running = f64::NEG_INFINITY;
        for c in ckpts {
            running = running.max(c.alpha);
            monotone.push(running);
        }
        match monotone.iter().position(|&a| a >= alpha_query) {
            None => ckpts[ckpts.len() - 1].positions.clone(),
            Some(0) => ckpts[0].positions.clone(),
            Some(hi) => {
                let lo = hi - 1;
                let gap = monotone[hi] - monotone[lo];
                let w = if gap > 0.0 { (alpha_query - monotone[lo]) / gap } else { 1.0 };
                ckpts[lo]
                    .positions
                    .iter()
                    .zip(&ckpts[hi].positions)
                    .map(|(a, b)| a + w * (b - a))
                    .collect()
            }
        }
    };
    let cloud = PointCloud::new(positions)?;
    match (&trajectory.start_attributes, &trajectory.end_attributes) {
        (Some(a), Some(b)) => cloud.with_attributes(blend_attributes(a, b, alpha_query)?),
        _ => Ok(cloud),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidTransform;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pts(v: &[[f64; 3]]) -> Vec<Vec3> {
        v.iter().map(|p| Vec3::from(*p)).collect()
    }

    #[test]
    fn alpha_endpoints_and_fraction() {
        let start = pts(&[[0.0, 0.0, 0.0], [1.0, 1.0, 0.0]]);
        let v = Vec3::new(0.3, -2.0, 1.0);
        let end: Vec<Vec3> = start.iter().map(|p| p + v).collect();
        assert_eq!(progress_alpha(&start, &start, &end).unwrap(), Some(0.0));
        assert_eq!(progress_alpha(&end, &start, &end).unwrap(), Some(1.0));
        for s in [0.1, 0.25, 0.5, 0.9] {
            let mid: Vec<Vec3> = start.iter().map(|p| p + s * v).collect();
            assert_abs_diff_eq!(progress_alpha(&mid, &start, &end).unwrap().unwrap(), s, epsilon = 1e-15);
        }
    }

    #[test]
    fn alpha_undefined_without_motion() {
        let start = pts(&[[0.0, 0.0, 0.0]]);
        assert_eq!(progress_alpha(&start, &start, &start).unwrap(), None);
        assert!(progress_alpha(&start, &start, &pts(&[[0.0; 3], [1.0; 3]])).is_err());
    }

    #[test]
    fn blend_values() {
        let a = Attributes::new(1, vec![0.2]).unwrap();
        let b = Attributes::new(1, vec![0.8]).unwrap();
        assert_eq!(blend_attributes(&a, &b, 0.0).unwrap(), a);
        assert_eq!(blend_attributes(&a, &b, 1.0).unwrap(), b);
        assert_abs_diff_eq!(blend_attributes(&a, &b, 0.5).unwrap().values()[0], 0.5, epsilon = 1e-15);
        assert!(blend_attributes(&a, &b, 1.1).is_err());
        assert!(blend_attributes(&a, &b, -0.1).is_err());
    }

    fn two_step() -> Trajectory {
        Trajectory::from_checkpoints(
            vec![0, 10],
            vec![pts(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), pts(&[[4.0, 0.0, 0.0], [1.0, 4.0, 0.0]])],
        )
        .unwrap()
    }

    #[test]
    fn sample_endpoints_and_segment() {
        let t = two_step();
        assert_eq!(sample_state(&t, 0.0).unwrap().positions(), t.checkpoints[0].positions);
        assert_eq!(sample_state(&t, 1.0).unwrap().positions(), t.checkpoints[1].positions);
        let q = sample_state(&t, 0.25).unwrap();
        assert_abs_diff_eq!(q.positions()[0], Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(q.positions()[1], Vec3::new(1.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn sample_blends_attributes() {
        let t = two_step()
            .with_attributes(
                Some(Attributes::new(3, vec![0.0; 6]).unwrap()),
                Some(Attributes::new(3, vec![1.0; 6]).unwrap()),
            )
            .unwrap();
        let q = sample_state(&t, 0.25).unwrap();
        assert!(q.attributes().unwrap().values().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn sample_handles_overshoot() {
        // Second checkpoint overshoots the end state.
        let t = Trajectory::from_checkpoints(
            vec![0, 1, 2],
            vec![pts(&[[0.0; 3]]), pts(&[[1.2, 0.0, 0.0]]), pts(&[[1.0, 0.0, 0.0]])],
        )
        .unwrap();
        assert_abs_diff_eq!(t.checkpoints[1].alpha, 1.2, epsilon = 1e-15);
        let q = sample_state(&t, 0.6).unwrap();
        assert_abs_diff_eq!(q.positions()[0].x, 0.6, epsilon = 1e-15);
        assert_eq!(sample_state(&t, 1.0).unwrap().positions()[0].x, 1.0);
        assert!(sample_state(&t, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn alpha_rigid_and_scale_invariant(
            coords in prop::collection::vec(prop::array::uniform3(-3.0f64..3.0), 9),
            angle in -3.0f64..3.0,
            scale in 0.1f64..10.0,
        ) {
            let start: Vec<Vec3> = coords[0..3].iter().map(|c| Vec3::from(*c)).collect();
            let mid: Vec<Vec3> = coords[3..6].iter().map(|c| Vec3::from(*c)).collect();
            let end: Vec<Vec3> = coords[6..9].iter().map(|c| Vec3::from(*c)).collect();
            let Some(base) = progress_alpha(&mid, &start, &end).unwrap() else { return Ok(()) };
            let xf = RigidTransform::about_axis(Vec3::new(1.0, 0.5, -0.2), angle, Vec3::new(0.1, 0.2, 0.3)).unwrap();
            let map = |v: &[Vec3], f: &dyn Fn(&Vec3) -> Vec3| v.iter().map(f).collect::<Vec<_>>();
            let rigid = progress_alpha(&map(&mid, &|p| xf.apply(p)), &map(&start, &|p| xf.apply(p)), &map(&end, &|p| xf.apply(p))).unwrap().unwrap();
            let scaled = progress_alpha(&map(&mid, &|p| p * scale), &map(&start, &|p| p * scale), &map(&end, &|p| p * scale)).unwrap().unwrap();
            prop_assert!((rigid - base).abs() <= 1e-9 * base.max(1.0));
            prop_assert!((scaled - base).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn sampling_is_continuous(q in 0.0f64..0.999, dq in 1e-9f64..1e-3) {
            let t = two_step();
            let a = sample_state(&t, q).unwrap();
            let b = sample_state(&t, (q + dq).min(1.0)).unwrap();
            // Lipschitz constant: longest segment (4) over alpha gap (1).
            let max_step = a.positions().iter().zip(b.positions()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            prop_assert!(max_step <= 4.0 * dq + 1e-12);
        }
    }
}
