use rand::seq::SliceRandom;
use rand::Rng;

use crate::geometry::{Label, PointCloud, SpatialIndex, Vec3};
use crate::{Error, Result};

/// Picks `clusters` distinct anchors (a prefix of one random permutation) and
/// returns the `k` nearest neighbours of each, anchor included, nearest
/// first.
pub fn neighbourhoods<R: Rng + ?Sized>(
    cloud: &PointCloud,
    clusters: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    let n = cloud.len();
    if clusters > n {
        return Err(Error::InvalidArgument(format!(
            "{clusters} clusters requested from {n} points"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let index = SpatialIndex::new(cloud.points());
    Ok(order[..clusters]
        .iter()
        .map(|&a| {
            index
                .knn(&cloud.points()[a], k)
                .into_iter()
                .map(|(i, _)| i)
                .collect()
        })
        .collect())
}

/// Adds a jittered duplicate of every point in `clusters` k-NN neighbourhoods.
pub fn density_inc_with<R: Rng + ?Sized>(
    cloud: &PointCloud,
    clusters: usize,
    k: usize,
    jitter: f64,
    rng: &mut R,
) -> Result<PointCloud> {
    if cloud.len() < k {
        return Err(Error::TooFewPoints {
            needed: k,
            got: cloud.len(),
        });
    }
    let groups = neighbourhoods(cloud, clusters, k, rng)?;
    let (mut points, labels) = cloud.clone().into_parts();
    let mut labels = labels.unwrap_or_else(|| vec![Label::Clean; points.len()]);
    for group in groups {
        for i in group {
            let offset = Vec3::from_fn(|_, _| rng.random_range(-jitter..=jitter));
            points.push(points[i] + offset);
            labels.push(Label::Added);
        }
    }
    PointCloud::with_labels(points, labels)
}

fn keep_unremoved(cloud: &PointCloud, removed: &[bool]) -> Result<PointCloud> {
    let kept: Vec<usize> = (0..cloud.len()).filter(|&i| !removed[i]).collect();
    if kept.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: kept.len(),
        });
    }
    Ok(cloud.select(&kept))
}

/// Within each of `clusters` k-NN neighbourhoods removes
/// `round(fraction · |neighbourhood|)` points chosen uniformly.
pub fn density_dec_with<R: Rng + ?Sized>(
    cloud: &PointCloud,
    clusters: usize,
    k: usize,
    fraction: f64,
    rng: &mut R,
) -> Result<PointCloud> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("fraction {fraction} not in [0, 1]")));
    }
    let groups = neighbourhoods(cloud, clusters, k.min(cloud.len()), rng)?;
    let mut removed = vec![false; cloud.len()];
    for mut group in groups {
        let count = (fraction * group.len() as f64).round() as usize;
        group.shuffle(rng);
        for &i in &group[..count] {
            removed[i] = true;
        }
    }
    keep_unremoved(cloud, &removed)
}

/// Removes whole k-NN neighbourhoods around `clusters` random anchors.
pub fn cutout_with<R: Rng + ?Sized>(
    cloud: &PointCloud,
    clusters: usize,
    k: usize,
    rng: &mut R,
) -> Result<PointCloud> {
    let groups = neighbourhoods(cloud, clusters, k.min(cloud.len()), rng)?;
    let mut removed = vec![false; cloud.len()];
    for i in groups.into_iter().flatten() {
        removed[i] = true;
    }
    keep_unremoved(cloud, &removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0)))
            .collect();
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn density_inc_counts_and_bounds() {
        let c = cloud(1024, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = density_inc_with(&c, 1, 32, 0.01, &mut rng).unwrap();
        assert_eq!(out.len(), 1024 + 32);
        assert_eq!(&out.points()[..1024], c.points());
        let index = SpatialIndex::new(c.points());
        for p in &out.points()[1024..] {
            assert!(index.nearest(p).unwrap().1.sqrt() <= 0.01 * 3f64.sqrt());
        }
        assert!(out.labels().unwrap()[1024..].iter().all(|&l| l == Label::Added));
    }

    #[test]
    fn density_inc_requires_k_points() {
        let c = cloud(20, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(density_inc_with(&c, 1, 32, 0.01, &mut rng).is_err());
    }

    #[test]
    fn density_dec_matches_replayed_selection() {
        let c = cloud(1024, 3);
        for clusters in 1..=5 {
            let out = density_dec_with(&c, clusters, 64, 0.5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            // replay the same draws
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let groups = neighbourhoods(&c, clusters, 64, &mut rng).unwrap();
            let mut removed = std::collections::BTreeSet::new();
            for mut g in groups {
                g.shuffle(&mut rng);
                removed.extend(g[..32].iter().copied());
            }
            assert_eq!(out.len(), 1024 - removed.len());
            for r in removed {
                assert!(!out.points().contains(&c.points()[r]));
            }
        }
    }

    #[test]
    fn density_dec_zero_fraction_is_identity() {
        let c = cloud(200, 3);
        let out = density_dec_with(&c, 3, 64, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(out.points(), c.points());
    }

    #[test]
    fn cutout_separated_cluster() {
        // two far-apart blobs of 64 and 500 points; an anchor in the small
        // blob removes exactly it, and any anchor removes exactly 64 points
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pts: Vec<Vec3> = (0..64)
            .map(|_| Vec3::from_fn(|_, _| rng.random_range(0.9..1.0)))
            .collect();
        pts.extend((0..500).map(|_| Vec3::from_fn(|_, _| rng.random_range(-1.0..0.0))));
        let c = PointCloud::new(pts).unwrap();
        for seed in 0..10 {
            let out = cutout_with(&c, 1, 64, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(out.len(), c.len() - 64);
            assert!(out.points().iter().all(|p| c.points().contains(p)));
        }
    }

    #[test]
    fn removal_leaving_too_few_points_fails() {
        let c = cloud(60, 5);
        assert!(cutout_with(&c, 1, 64, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
