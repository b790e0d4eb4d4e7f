use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PointCloud, Vec3};
use crate::{Error, Result};

fn check_count(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::SampleCountOutOfRange { k, n });
    }
    Ok(())
}

/// Farthest-point sampling starting from a point drawn uniformly with `seed`.
pub fn fps_indices(points: &[Vec3], k: usize, seed: u64) -> Result<Vec<usize>> {
    check_count(k, points.len())?;
    let start = ChaCha8Rng::seed_from_u64(seed).random_range(0..points.len());
    fps_indices_from(points, k, start)
}

/// Farthest-point sampling from a fixed starting index.
///
/// Each step picks the point whose distance to the chosen set is largest;
/// ties go to the lowest index.
pub fn fps_indices_from(points: &[Vec3], k: usize, start: usize) -> Result<Vec<usize>> {
    check_count(k, points.len())?;
    if start >= points.len() {
        return Err(Error::InvalidArgument(format!(
            "start index {start} out of range for {} points",
            points.len()
        )));
    }
    let mut chosen = Vec::with_capacity(k);
    let mut min_d2 = vec![f64::INFINITY; points.len()];
    let mut current = start;
    for _ in 0..k {
        chosen.push(current);
        let c = points[current];
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, (p, d)) in points.iter().zip(min_d2.iter_mut()).enumerate() {
            let d2 = (p - c).norm_squared();
            if d2 < *d {
                *d = d2;
            }
            if *d > best.0 {
                best = (*d, i);
            }
        }
        current = best.1;
    }
    Ok(chosen)
}

pub fn fps_sample(cloud: &PointCloud, k: usize, seed: u64) -> Result<PointCloud> {
    Ok(cloud.select(&fps_indices(cloud.points(), k, seed)?))
}

/// Uniform sample of `k` distinct indices out of `n`.
pub fn rds_indices(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    check_count(k, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, n, k).into_vec())
}

pub fn rds_sample(cloud: &PointCloud, k: usize, seed: u64) -> Result<PointCloud> {
    Ok(cloud.select(&rds_indices(cloud.len(), k, seed)?))
}
