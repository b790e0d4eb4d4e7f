use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::moved_label;
use crate::geometry::{Label, PointCloud, Vec3};
use crate::{Error, Result};

fn check_bound(name: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {value}")));
    }
    Ok(())
}

fn perturb_all(cloud: &PointCloud, mut f: impl FnMut(&Vec3) -> Vec3) -> Result<PointCloud> {
    let mut points = Vec::with_capacity(cloud.len());
    let mut labels = Vec::with_capacity(cloud.len());
    for (i, p) in cloud.points().iter().enumerate() {
        let q = f(p);
        labels.push(moved_label(cloud.label(i), p, &q));
        points.push(q);
    }
    PointCloud::with_labels(points, labels)
}

fn clamp_unit(p: Vec3) -> Vec3 {
    p.map(|v| v.clamp(-1.0, 1.0))
}

/// `p + u` with every coordinate of the realised offset within `bound`,
/// redrawing on the rare floating-point overshoot. With `must_move`, also
/// redraws offsets that round away entirely.
fn bounded_offset<R: Rng + ?Sized>(p: &Vec3, bound: f64, must_move: bool, rng: &mut R) -> Vec3 {
    loop {
        let u = Vec3::from_fn(|_, _| rng.random_range(-bound..=bound));
        let q = p + u;
        if (q - p).amax() <= bound && !(must_move && q == *p) {
            return q;
        }
    }
}

/// Adds `N(0, sigma²)` to every coordinate, then clamps to `[-1, 1]`.
pub fn gaussian_with<R: Rng + ?Sized>(cloud: &PointCloud, sigma: f64, rng: &mut R) -> Result<PointCloud> {
    check_bound("sigma", sigma)?;
    perturb_all(cloud, |p| {
        let z = Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        clamp_unit(p + z * sigma)
    })
}

/// Adds `U(-bound, bound)` to every coordinate, then clamps to `[-1, 1]`.
pub fn uniform_with<R: Rng + ?Sized>(cloud: &PointCloud, bound: f64, rng: &mut R) -> Result<PointCloud> {
    check_bound("bound", bound)?;
    if bound == 0.0 {
        return perturb_all(cloud, |p| clamp_unit(*p));
    }
    perturb_all(cloud, |p| clamp_unit(bounded_offset(p, bound, false, rng)))
}

/// Moves `count` randomly chosen points by a per-coordinate offset of at most
/// `bound`. Unselected points are untouched.
pub fn impulse_with<R: Rng + ?Sized>(
    cloud: &PointCloud,
    count: usize,
    bound: f64,
    rng: &mut R,
) -> Result<PointCloud> {
    check_bound("bound", bound)?;
    if count > cloud.len() {
        return Err(Error::SampleCountOutOfRange { k: count, n: cloud.len() });
    }
    if count > 0 && bound == 0.0 {
        return Err(Error::InvalidArgument("impulse bound must be positive".into()));
    }
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.shuffle(rng);
    let (mut points, _) = cloud.clone().into_parts();
    let mut labels = cloud.labels_or_clean();
    for &i in &order[..count] {
        let q = bounded_offset(&points[i], bound, true, rng);
        labels[i] = moved_label(labels[i], &points[i], &q);
        points[i] = q;
    }
    PointCloud::with_labels(points, labels)
}

/// Appends one new point near each of `count` distinct random anchors, at
/// per-coordinate distance at most `bound`.
pub fn upsampling_with<R: Rng + ?Sized>(
    cloud: &PointCloud,
    count: usize,
    bound: f64,
    rng: &mut R,
) -> Result<PointCloud> {
    check_bound("bound", bound)?;
    if count > cloud.len() {
        return Err(Error::SampleCountOutOfRange { k: count, n: cloud.len() });
    }
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.shuffle(rng);
    let (mut points, _) = cloud.clone().into_parts();
    let mut labels = cloud.labels_or_clean();
    for &i in &order[..count] {
        let q = bounded_offset(&points[i], bound, false, rng);
        points.push(q);
        labels.push(Label::Added);
    }
    PointCloud::with_labels(points, labels)
}

/// Appends `count` points drawn uniformly in the cloud's bounding cube.
pub fn background_with<R: Rng + ?Sized>(cloud: &PointCloud, count: usize, rng: &mut R) -> Result<PointCloud> {
    let cube = cloud.bounding_box()?.bounding_cube();
    let (mut points, _) = cloud.clone().into_parts();
    let mut labels = cloud.labels_or_clean();
    for _ in 0..count {
        let q = Vec3::from_fn(|i, _| {
            let u: f64 = rng.random();
            (cube.min[i] + u * (cube.max[i] - cube.min[i])).clamp(cube.min[i], cube.max[i])
        });
        points.push(q);
        labels.push(Label::Added);
    }
    PointCloud::with_labels(points, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, half: f64, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| Vec3::from_fn(|_, _| rng.random_range(-half..half)))
            .collect();
        PointCloud::new(pts).unwrap()
    }

    fn deltas(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
        a.points()
            .iter()
            .zip(b.points())
            .flat_map(|(p, q)| (q - p).iter().copied().collect::<Vec<_>>())
            .collect()
    }

    #[test]
    fn gaussian_moments_and_clamp() {
        let c = cloud(4096, 0.5, 1);
        for sigma in [0.01, 0.03] {
            let out = gaussian_with(&c, sigma, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
            let d = deltas(&c, &out);
            let n = d.len() as f64;
            let mean = d.iter().sum::<f64>() / n;
            let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!((std - sigma).abs() < 0.1 * sigma);
            assert!(mean.abs() < 3.0 * sigma / n.sqrt());
        }
        let edge = cloud(4096, 1.0, 3);
        let out = gaussian_with(&edge, 0.03, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(out.points().iter().all(|p| p.amax() <= 1.0));
    }

    #[test]
    fn uniform_bound_and_variance() {
        let c = cloud(4096, 0.5, 4);
        let b = 0.05;
        let out = uniform_with(&c, b, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let d = deltas(&c, &out);
        assert!(d.iter().all(|x| x.abs() <= b));
        let var = d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64;
        assert!((var - b * b / 3.0).abs() < 0.15 * b * b / 3.0);
    }

    #[test]
    fn impulse_moves_exactly_count_points() {
        let c = cloud(1000, 1.0, 6);
        let out = impulse_with(&c, 30, 0.05, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let moved: Vec<usize> = (0..c.len()).filter(|&i| c.points()[i] != out.points()[i]).collect();
        assert_eq!(moved.len(), 30);
        for i in 0..c.len() {
            assert!((out.points()[i] - c.points()[i]).amax() <= 0.05);
            let expect = if moved.contains(&i) { Label::Perturbed } else { Label::Clean };
            assert_eq!(out.label(i), expect);
        }
    }

    #[test]
    fn upsampling_adds_near_anchors() {
        let c = cloud(1000, 1.0, 8);
        let out = upsampling_with(&c, 150, 0.08, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(out.len(), 1150);
        assert_eq!(&out.points()[..1000], c.points());
        for p in &out.points()[1000..] {
            assert!(c.points().iter().any(|q| (p - q).amax() <= 0.08));
        }
    }

    #[test]
    fn background_inside_cube() {
        let c = cloud(500, 0.7, 10);
        let cube = c.bounding_box().unwrap().bounding_cube();
        let out = background_with(&c, 50, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(out.len(), 550);
        assert!(out.points()[500..].iter().all(|p| cube.contains(p)));
        assert_eq!(&out.points()[..500], c.points());
    }
}
