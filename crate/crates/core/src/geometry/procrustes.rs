use nalgebra::SVD;

use super::{Mat3, RigidTransform, Vec3};
use super::cloud::centroid;
use crate::{Error, Result};

/// Relative singular-value threshold below which the cross-covariance is
/// treated as having rank < 2.
const RANK_TOLERANCE: f64 = 1e-10;

/// Closed-form least-squares rigid alignment of `source[i]` onto `matched[i]`.
///
/// Builds the cross-covariance `H = Σ (x_i - x̄)(y_i - ȳ)ᵀ`, factors
/// `H = U Σ Vᵀ` and returns `R = V Uᵀ`, `t = ȳ - R x̄`. When `V Uᵀ` is a
/// reflection, the column of `V` belonging to the smallest singular value is
/// negated first.
///
/// Singular vectors are only defined up to sign; each pair `(u_k, v_k)` is
/// normalised so that the largest-magnitude entry of `u_k` is non-negative,
/// which makes the result a deterministic function of the input.
pub fn procrustes_solve(source: &[Vec3], matched: &[Vec3]) -> Result<RigidTransform> {
    if source.len() != matched.len() {
        return Err(Error::DimensionMismatch {
            expected: source.len(),
            got: matched.len(),
        });
    }
    if source.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: source.len(),
        });
    }
    if !source.iter().chain(matched).all(|p| p.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite("procrustes input"));
    }
    let cx = centroid(source);
    let cy = centroid(matched);
    let mut h = Mat3::zeros();
    for (x, y) in source.iter().zip(matched) {
        h += (x - cx) * (y - cy).transpose();
    }
    let (u, sigma, v) = sorted_svd(&h)?;
    if sigma[0] <= 0.0 || sigma[1] <= RANK_TOLERANCE * sigma[0] {
        return Err(Error::RankDeficientCovariance);
    }
    let mut v = v;
    if (v * u.transpose()).determinant() < 0.0 {
        v.column_mut(2).neg_mut();
    }
    let rotation = v * u.transpose();
    let translation = cy - rotation * cx;
    Ok(RigidTransform::from_parts_unchecked(rotation, translation))
}

/// Sum of squared residuals `Σ ‖R x_i + t - y_i‖²`.
pub fn registration_error(source: &[Vec3], matched: &[Vec3], tf: &RigidTransform) -> f64 {
    source
        .iter()
        .zip(matched)
        .map(|(x, y)| (tf.apply(x) - y).norm_squared())
        .sum()
}

/// SVD with singular values in descending order and the sign convention
/// described on [`procrustes_solve`]. Returns `(U, σ, V)`.
fn sorted_svd(h: &Mat3) -> Result<(Mat3, [f64; 3], Mat3)> {
    let svd = SVD::new(*h, true, true);
    let u = svd.u.ok_or(Error::RankDeficientCovariance)?;
    let v_t = svd.v_t.ok_or(Error::RankDeficientCovariance)?;
    let v = v_t.transpose();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let mut us = Mat3::zeros();
    let mut vs = Mat3::zeros();
    let mut sigma = [0.0; 3];
    for (k, &src) in order.iter().enumerate() {
        let mut uc = u.column(src).into_owned();
        let mut vc = v.column(src).into_owned();
        let lead = uc.iter().copied().fold(0.0_f64, |acc, x| {
            if x.abs() > acc.abs() {
                x
            } else {
                acc
            }
        });
        if lead < 0.0 {
            uc.neg_mut();
            vc.neg_mut();
        }
        us.set_column(k, &uc);
        vs.set_column(k, &vc);
        sigma[k] = svd.singular_values[src];
    }
    Ok((us, sigma, vs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut impl Rng) -> RigidTransform {
        let axis = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let t = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        RigidTransform::from_axis_angle(axis, rng.random_range(0.0..std::f64::consts::PI), t)
    }

    #[test]
    fn identity_correspondence() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
            Vec3::new(0.3, 0.1, 0.7),
        ];
        let tf = procrustes_solve(&pts, &pts).unwrap();
        assert!((tf.rotation() - Mat3::identity()).amax() < 1e-12);
        assert!(tf.translation().amax() < 1e-12);
    }

    #[test]
    fn recovers_random_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let gt = random_rotation(&mut rng);
            let src: Vec<Vec3> = (0..20)
                .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
                .collect();
            let dst: Vec<Vec3> = src.iter().map(|p| gt.apply(p)).collect();
            let tf = procrustes_solve(&src, &dst).unwrap();
            assert!((tf.rotation() - gt.rotation()).amax() < 1e-9);
            assert!((tf.translation() - gt.translation()).amax() < 1e-9);
        }
    }

    #[test]
    fn collinear_and_coincident_rejected() {
        let line = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(2.0, 2.0, 2.0),
        ];
        assert!(matches!(
            procrustes_solve(&line, &line),
            Err(Error::RankDeficientCovariance)
        ));
        let same = vec![Vec3::new(1.0, 2.0, 3.0); 4];
        assert!(matches!(
            procrustes_solve(&same, &same),
            Err(Error::RankDeficientCovariance)
        ));
    }

    #[test]
    fn reflection_is_corrected() {
        let src = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(-1.0, -1.0, -1.0),
        ];
        let mirrored: Vec<Vec3> = src.iter().map(|p| Vec3::new(p.x, p.y, -p.z)).collect();
        let tf = procrustes_solve(&src, &mirrored).unwrap();
        assert!((tf.rotation().determinant() - 1.0).abs() < 1e-12);
        assert!(tf.orthogonality_deviation() < 1e-12);
    }

    #[test]
    fn planar_source_is_accepted() {
        let src = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        ];
        let gt = RigidTransform::from_axis_angle(Vec3::new(0.2, 1.0, 0.4), 0.8, Vec3::x());
        let dst: Vec<Vec3> = src.iter().map(|p| gt.apply(p)).collect();
        let tf = procrustes_solve(&src, &dst).unwrap();
        assert!((tf.rotation() - gt.rotation()).amax() < 1e-9);
    }

    #[test]
    fn mismatched_lengths() {
        let a = vec![Vec3::zeros(); 4];
        assert!(matches!(
            procrustes_solve(&a, &a[..3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
