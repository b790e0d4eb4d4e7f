use serde::{Deserialize, Serialize};

use crate::geometry::{procrustes_solve, RigidTransform, SpatialIndex, Vec3};
use crate::{Error, Result};

/// Output of [`icp_baseline`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    pub transform: RigidTransform,
    /// Mean squared nearest-neighbour distance before each Procrustes update,
    /// starting from the identity.
    pub trace: Vec<f64>,
}

/// Point-to-point ICP from the identity.
///
/// Each iteration pairs every transformed source point with its nearest
/// target point and re-solves Procrustes on those pairs. Iteration stops
/// after `max_iters` updates or when the mean squared correspondence distance
/// improves by less than `tol`. The transform with the smallest observed
/// correspondence distance is returned; a degenerate Procrustes step ends the
/// loop early rather than failing.
pub fn icp_baseline(source: &[Vec3], target: &[Vec3], max_iters: usize, tol: f64) -> Result<IcpResult> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let index = SpatialIndex::new(target);
    let mut current = RigidTransform::identity();
    let mut best = (f64::INFINITY, current);
    let mut trace = Vec::new();
    let mut matched = vec![Vec3::zeros(); source.len()];
    for iter in 0..=max_iters {
        let mut sum = 0.0;
        for (p, slot) in source.iter().zip(matched.iter_mut()) {
            let (k, d2) = index.nearest(&current.apply(p)).expect("non-empty target");
            *slot = target[k];
            sum += d2;
        }
        let mean = sum / source.len() as f64;
        let improvement = trace.last().map_or(f64::INFINITY, |prev: &f64| prev - mean);
        trace.push(mean);
        if mean < best.0 {
            best = (mean, current);
        }
        if iter == max_iters || improvement < tol {
            break;
        }
        match procrustes_solve(source, &matched) {
            Ok(next) => current = next,
            Err(_) => break,
        }
    }
    Ok(IcpResult {
        transform: best.1,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-0.6..0.6), rng.random_range(-0.3..0.3)))
            .collect()
    }

    #[test]
    fn identical_clouds() {
        let pts = blob(300, 1);
        let r = icp_baseline(&pts, &pts, 50, 1e-6).unwrap();
        assert!((r.transform.rotation() - nalgebra::Matrix3::identity()).amax() < 1e-9);
        assert!(r.transform.translation().amax() < 1e-9);
    }

    #[test]
    fn small_offset_recovered() {
        let pts = blob(1000, 2);
        let gt = RigidTransform::from_axis_angle(Vec3::new(0.2, 0.3, 1.0), 5f64.to_radians(), Vec3::new(0.05, 0.0, 0.0));
        let tgt: Vec<Vec3> = pts.iter().map(|p| gt.apply(p)).collect();
        let r = icp_baseline(&pts, &tgt, 100, 1e-12).unwrap();
        assert!((r.transform.rotation() - gt.rotation()).amax() < 1e-4);
        assert!((r.transform.translation() - gt.translation()).amax() < 1e-4);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }
}
