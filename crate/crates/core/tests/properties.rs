use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skelreg::corruption::{corrupt, CorruptionKind, CorruptionSpec};
use skelreg::geometry::{
    chamfer_distance, fps_indices, procrustes_solve, rds_indices, rotation_error_degrees, CHAMFER_PREFACTOR,
};
use skelreg::registration::{embed_features, fuse_transforms, soft_match, FusionMode};
use skelreg::{PointCloud, RigidTransform, Vec3};

fn cloud_strategy(min: usize, max: usize) -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec(
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| Vec3::new(x, y, z)),
        min..max,
    )
}

fn transform_strategy() -> impl Strategy<Value = RigidTransform> {
    (
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        0.0f64..std::f64::consts::PI,
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
    )
        .prop_filter("axis must be non-degenerate", |(a, _, _)| {
            Vec3::new(a.0, a.1, a.2).norm() > 1e-3
        })
        .prop_map(|(a, angle, t)| {
            RigidTransform::from_axis_angle(Vec3::new(a.0, a.1, a.2), angle, Vec3::new(t.0, t.1, t.2))
        })
}

fn is_rotation(m: &Matrix3<f64>, tol: f64) -> bool {
    (m.transpose() * m - Matrix3::identity()).amax() < tol && (m.determinant() - 1.0).abs() < tol
}

fn brute_chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    let one_way = |p: &[Vec3], q: &[Vec3]| {
        p.iter()
            .map(|x| q.iter().map(|y| (x - y).norm_squared()).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
    };
    CHAMFER_PREFACTOR * (one_way(a, b) + one_way(b, a))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn procrustes_output_is_a_rotation(src in cloud_strategy(4, 40), tf in transform_strategy(), noise in 0.0f64..0.1, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let matched: Vec<Vec3> = src
            .iter()
            .map(|p| tf.apply(p) + Vec3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()) * noise)
            .collect();
        if let Ok(est) = procrustes_solve(&src, &matched) {
            prop_assert!(is_rotation(est.rotation(), 1e-9));
        }
    }

    #[test]
    fn procrustes_recovers_noiseless_motion(src in cloud_strategy(6, 40), tf in transform_strategy()) {
        let matched: Vec<Vec3> = src.iter().map(|p| tf.apply(p)).collect();
        let est = procrustes_solve(&src, &matched).unwrap();
        prop_assert!((est.rotation() - tf.rotation()).amax() < 1e-7);
        prop_assert!((est.translation() - tf.translation()).amax() < 1e-7);
    }

    #[test]
    fn chamfer_is_symmetric_and_matches_brute_force(a in cloud_strategy(1, 60), b in cloud_strategy(1, 60)) {
        let ab = chamfer_distance(&a, &b).unwrap();
        let ba = chamfer_distance(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-15 * ab.max(1.0));
        prop_assert!((ab - brute_chamfer(&a, &b)).abs() <= 1e-12 * ab.max(1e-12));
        prop_assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn samplers_are_pure_and_distinct(pts in cloud_strategy(5, 80), frac in 0.1f64..1.0, seed: u64) {
        let k = ((pts.len() as f64 * frac) as usize).max(1);
        let f1 = fps_indices(&pts, k, seed).unwrap();
        prop_assert_eq!(&f1, &fps_indices(&pts, k, seed).unwrap());
        let r1 = rds_indices(pts.len(), k, seed).unwrap();
        prop_assert_eq!(&r1, &rds_indices(pts.len(), k, seed).unwrap());
        for idx in [&f1, &r1] {
            prop_assert_eq!(idx.len(), k);
            let mut sorted = idx.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), k);
            prop_assert!(idx.iter().all(|&i| i < pts.len()));
        }
    }

    #[test]
    fn euler_error_vanishes_on_equal_transforms(tf in transform_strategy()) {
        let err = rotation_error_degrees(&tf, &tf);
        prop_assert!(err.angles.iter().all(|a| a.abs() < 1e-6));
    }

    #[test]
    fn soft_match_rows_are_stochastic(a in cloud_strategy(20, 60), b in cloud_strategy(20, 60), tau in 1e-4f64..10.0) {
        let fa = embed_features(&a).unwrap();
        let fb = embed_features(&b).unwrap();
        let m = soft_match(&fa, &fb, tau).unwrap();
        let p = m.probabilities();
        for row in p.row_iter() {
            prop_assert!(row.iter().all(|v| v.is_finite() && *v >= 0.0));
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fusion_stays_on_so3(a in transform_strategy(), b in transform_strategy(), gc in 0.0f64..1.0, gs in 0.0f64..1.0) {
        for mode in [FusionMode::Quaternion, FusionMode::BlendProject] {
            let f = fuse_transforms(&a, &b, gc, gs, mode).unwrap();
            prop_assert!(is_rotation(f.transform.rotation(), 1e-9));
            if gc + gs > 0.0 {
                prop_assert!((f.lambda - gc / (gc + gs)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fusion_is_idempotent(a in transform_strategy(), gc in 0.01f64..1.0, gs in 0.01f64..1.0) {
        let f = fuse_transforms(&a, &a, gc, gs, FusionMode::Quaternion).unwrap();
        prop_assert!((f.transform.rotation() - a.rotation()).amax() < 1e-12);
        prop_assert!((f.transform.translation() - a.translation()).amax() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn corruption_is_a_pure_function(kind_idx in 0usize..12, severity in 1u8..=5, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Vec3> = (0..300)
            .map(|_| Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let spec = CorruptionSpec::new(CorruptionKind::ALL[kind_idx], severity, seed).unwrap();
        let a = corrupt(&cloud, &spec).unwrap();
        let b = corrupt(&cloud, &spec).unwrap();
        prop_assert_eq!(a, b);
    }
}
