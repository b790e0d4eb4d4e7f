use super::*;
use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(n: usize, rng: &mut impl Rng) -> Vec<Vec3> {
    (0..n)
        .map(|_| Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0)))
        .collect()
}

fn random_simplex(n: usize, m: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    column_softmax(&DMatrix::from_fn(n, m, |_, _| rng.random_range(-2.0..2.0)))
}

fn small_config() -> SkeletonConfig {
    SkeletonConfig {
        n_samples: 64,
        n_skeleton: 16,
        steps: 80,
        ..SkeletonConfig::default()
    }
}

fn sphere_cloud(n: usize, radius: f64, center: Vec3, rng: &mut impl Rng) -> PointCloud {
    let pts = (0..n)
        .map(|_| {
            let d: [f64; 3] = rng.sample(rand_distr::UnitSphere);
            center + Vec3::from(d) * radius
        })
        .collect();
    PointCloud::new(pts).unwrap()
}

#[test]
fn one_hot_and_uniform_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples = random_points(10, &mut rng);
    let mut w = DMatrix::zeros(10, 3);
    w[(4, 0)] = 1.0;
    w[(0, 1)] = 1.0;
    w[(9, 2)] = 1.0;
    let pts = skeleton_points(&w, &samples).unwrap();
    assert_eq!(pts, vec![samples[4], samples[0], samples[9]]);
    let radii = skeleton_radii(&w, &(0..10).map(|i| i as f64).collect::<Vec<_>>()).unwrap();
    assert_eq!(radii, vec![4.0, 0.0, 9.0]);

    let uniform = DMatrix::from_element(10, 2, 0.1);
    let centroid = samples.iter().sum::<Vec3>() / 10.0;
    for p in skeleton_points(&uniform, &samples).unwrap() {
        assert!((p - centroid).amax() < 1e-12);
    }
    assert_eq!(skeleton_radii(&uniform, &[0.0; 10]).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn weighted_sums_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let samples = random_points(10, &mut rng);
        let w = random_simplex(10, 4, &mut rng);
        let d: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..1.0)).collect();
        let pts = skeleton_points(&w, &samples).unwrap();
        let radii = skeleton_radii(&w, &d).unwrap();
        for j in 0..4 {
            let mut p = Vec3::zeros();
            let mut r = 0.0;
            for i in 0..10 {
                p += samples[i] * w[(i, j)];
                r += w[(i, j)] * d[i];
            }
            assert!((p - pts[j]).amax() < 1e-12);
            assert!((r - radii[j]).abs() < 1e-12);
        }
    }
}

#[test]
fn simplex_violations_rejected() {
    let samples = vec![Vec3::zeros(), Vec3::x()];
    let w = DMatrix::from_row_slice(2, 1, &[0.7, 0.7]);
    assert!(matches!(skeleton_points(&w, &samples), Err(Error::ConstraintViolated(_))));
    let w = DMatrix::from_row_slice(2, 1, &[1.5, -0.5]);
    assert!(matches!(skeleton_points(&w, &samples), Err(Error::ConstraintViolated(_))));
    let w = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
    assert!(matches!(skeleton_points(&w, &samples), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn nearest_distance_examples() {
    let set = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 0.0)];
    assert_eq!(nearest_skeleton_distance(&Vec3::zeros(), &set), 1.0);
    assert_eq!(nearest_skeleton_distance(&set[1], &set), 0.0);
}

#[test]
fn registration_loss_examples() {
    let id = RigidTransform::identity();
    assert_eq!(loss_registration(&id, &id), 0.0);
    let half_turn = RigidTransform::from_axis_angle(Vec3::z(), std::f64::consts::PI, Vec3::zeros());
    assert!((loss_registration(&id, &half_turn) - 8.0).abs() < 1e-12);
    let shifted = RigidTransform::from_translation(Vec3::new(0.0, 3.0, 4.0));
    assert!((loss_registration(&shifted, &id) - 25.0).abs() < 1e-12);
}

#[test]
fn point_sphere_loss_vanishes_on_exact_sphere() {
    // antipodal pairs make the uniform combination land exactly on the centre
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let center = Vec3::new(0.2, -0.1, 0.3);
    let half = sphere_cloud(100, 0.5, Vec3::zeros(), &mut rng);
    let mut samples: Vec<Vec3> = half.points().iter().map(|p| center + p).collect();
    samples.extend(half.points().iter().map(|p| center - p));
    let w = DMatrix::from_element(200, 1, 1.0 / 200.0);
    let sk = Skeleton::from_weights(samples.clone(), w).unwrap();
    assert!((sk.points()[0] - center).amax() < 1e-12);
    assert!((sk.radii()[0] - 0.5).abs() < 1e-12);
    let loss = loss_bsp(&samples, &sk, 0.3, 0.4);
    assert!(loss.l_p < 1e-3);
    assert!((loss.l_r + 0.5).abs() < 1e-12);
}

#[test]
fn radius_loss_decreases_with_radius() {
    let r = vec![0.1, 0.2, 0.3];
    let base = objective::radius_loss(&r).value;
    for j in 0..3 {
        let mut bigger = r.clone();
        bigger[j] += 0.05;
        assert!(objective::radius_loss(&bigger).value < base);
    }
}

/// Straight-line reimplementation of the loss components using full
/// distance tables.
fn reference_components(x: &[Vec3], s: &[Vec3], r: &[f64]) -> (f64, f64, f64) {
    let third = 1.0 / 3f64.sqrt();
    let mut surf = Vec::new();
    for (c, &rad) in s.iter().zip(r) {
        for a in [1.0, -1.0] {
            for b in [1.0, -1.0] {
                for d in [1.0, -1.0] {
                    surf.push(c + Vec3::new(a, b, d) * (third * rad));
                }
            }
        }
    }
    let min_dist = |q: &Vec3, set: &[Vec3]| set.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min);
    let ls = x.iter().map(|q| min_dist(q, &surf)).sum::<f64>() / x.len() as f64
        + surf.iter().map(|q| min_dist(q, x)).sum::<f64>() / surf.len() as f64;
    let mut lp1 = 0.0;
    for q in x {
        let (mut bj, mut bd) = (0, f64::INFINITY);
        for (j, c) in s.iter().enumerate() {
            let d = (q - c).norm();
            if d < bd {
                bd = d;
                bj = j;
            }
        }
        lp1 += (bd - r[bj]).powi(2);
    }
    let lp2: f64 = s.iter().zip(r).map(|(c, rad)| (min_dist(c, x) - rad).powi(2)).sum();
    let lr = -r.iter().sum::<f64>() / r.len() as f64;
    (ls, lp1 / x.len() as f64 + lp2 / s.len() as f64, lr)
}

#[test]
fn components_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let x = random_points(40, &mut rng);
        let s = random_points(7, &mut rng);
        let r: Vec<f64> = (0..7).map(|_| rng.random_range(0.0..0.4)).collect();
        let (ls, lp, lr) = reference_components(&x, &s, &r);
        assert!((objective::sampling_loss(&x, &s, &r).value - ls).abs() < 1e-10);
        assert!((objective::point_sphere_loss(&x, &s, &r).value - lp).abs() < 1e-10);
        assert!((objective::radius_loss(&r).value - lr).abs() < 1e-10);
    }
}

fn central_difference(f: impl Fn(&DMatrix<f64>) -> f64, z: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(z.nrows(), z.ncols());
    for k in 0..z.len() {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[k] += h;
        zm[k] -= h;
        g[k] = (f(&zp) - f(&zm)) / (2.0 * h);
    }
    g
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-12)
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs = random_points(24, &mut rng);
    let ys = random_points(24, &mut rng);
    let align = RigidTransform::from_axis_angle(Vec3::new(0.3, 1.0, 0.2), 0.4, Vec3::new(0.1, 0.0, -0.2));
    let obj = PairObjective {
        source: &xs,
        target: &ys,
        alignment: &align,
        weights: SkeletonConfig::default().loss_weights(),
    };
    let zx = DMatrix::from_fn(24, 6, |_, _| rng.random_range(-1.5..1.5));
    let zy = DMatrix::from_fn(24, 6, |_, _| rng.random_range(-1.5..1.5));
    let (_, grads) = obj.component_gradients(&zx, &zy);
    type Pick = fn(&ComponentValues) -> f64;
    let cases: [(&str, Pick, &[DMatrix<f64>; 2]); 5] = [
        ("l_s", |v| v.l_s, &grads.l_s),
        ("l_p", |v| v.l_p, &grads.l_p),
        ("l_r", |v| v.l_r, &grads.l_r),
        ("l_ddl", |v| v.l_ddl, &grads.l_ddl),
        ("total", |v| v.total, &grads.total),
    ];
    for (name, pick, g) in cases {
        let fd_x = central_difference(|z| pick(&obj.value(z, &zy)), &zx, 1e-6);
        let fd_y = central_difference(|z| pick(&obj.value(&zx, z)), &zy, 1e-6);
        assert!(rel_err(&g[0], &fd_x) < 1e-4, "{name} source: {}", rel_err(&g[0], &fd_x));
        assert!(rel_err(&g[1], &fd_y) < 1e-4, "{name} target: {}", rel_err(&g[1], &fd_y));
    }
}

#[test]
fn extraction_improves_and_keeps_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = PointCloud::new(random_points(300, &mut rng)).unwrap();
    let b = PointCloud::new(random_points(300, &mut rng)).unwrap();
    let pair = extract_skeleton_pair(&a, &b, &small_config()).unwrap();
    let first = pair.trace.initial().unwrap().total;
    let last = pair.trace.last().unwrap().total;
    assert!(last <= first);
    assert!(last < first, "no progress: {first} -> {last}");
    assert_eq!(pair.trace.rows.len(), small_config().steps + 1);
    assert!(pair.trace.rows.windows(2).all(|w| w[1].total <= w[0].total));
    for sk in [&pair.source, &pair.target] {
        assert_eq!(sk.len(), 16);
        for col in sk.weights().column_iter() {
            assert!((col.sum() - 1.0).abs() < 1e-9);
            assert!(col.iter().all(|&w| w >= 0.0));
        }
        for (j, p) in sk.points().iter().enumerate() {
            let q = sk.samples().iter().zip(sk.weights().column(j).iter()).fold(Vec3::zeros(), |acc, (x, w)| acc + x * *w);
            assert!((p - q).amax() < 1e-9);
            let r: f64 = sk.distances().iter().zip(sk.weights().column(j).iter()).map(|(d, w)| d * w).sum();
            assert!((r - sk.radii()[j]).abs() < 1e-9);
        }
        for (x, d) in sk.samples().iter().zip(sk.distances()) {
            assert_eq!(*d, nearest_skeleton_distance(x, sk.points()));
        }
    }
}

#[test]
fn without_ddl_source_ignores_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = PointCloud::new(random_points(200, &mut rng)).unwrap();
    let b1 = PointCloud::new(random_points(200, &mut rng)).unwrap();
    let b2 = sphere_cloud(250, 0.7, Vec3::zeros(), &mut rng);
    let cfg = SkeletonConfig {
        lambda_ddl: 0.0,
        ..small_config()
    };
    let p1 = extract_skeleton_pair(&a, &b1, &cfg).unwrap();
    let p2 = extract_skeleton_pair(&a, &b2, &cfg).unwrap();
    assert_eq!(p1.source, p2.source);
    assert_ne!(p1.target.points(), p2.target.points());
}

#[test]
fn circle_skeleton_moves_inward() {
    let n = 400;
    let pts: Vec<Vec3> = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64 * std::f64::consts::TAU;
            Vec3::new(t.cos(), t.sin(), 0.0)
        })
        .collect();
    let cloud = PointCloud::new(pts).unwrap();
    let cfg = SkeletonConfig {
        steps: 150,
        ..small_config()
    };
    let pair = extract_skeleton_pair(&cloud, &cloud, &cfg).unwrap();
    let mean_norm = pair.source.points().iter().map(|p| p.norm()).sum::<f64>() / 16.0;
    assert!(mean_norm < 1.0, "mean distance to centre {mean_norm}");
}

#[test]
fn skeleton_points_lie_in_hull_of_samples() {
    let samples = vec![
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let w = random_simplex(4, 5, &mut rng);
    let pts = skeleton_points(&w, &samples).unwrap();
    // barycentric coordinates via the homogeneous 4×4 system
    let a = Matrix4::from_fn(|r, c| if r < 3 { samples[c][r] } else { 1.0 });
    let inv = a.try_inverse().unwrap();
    for p in pts {
        let bary = inv * Vector4::new(p.x, p.y, p.z, 1.0);
        assert!(bary.iter().all(|&b| b >= -1e-12));
    }
}

#[test]
fn too_few_points_and_bad_config() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let small = PointCloud::new(random_points(30, &mut rng)).unwrap();
    assert!(matches!(
        extract_skeleton_pair(&small, &small, &small_config()),
        Err(Error::TooFewPoints { .. })
    ));
    let cfg = SkeletonConfig {
        n_skeleton: 100,
        ..small_config()
    };
    assert!(cfg.validate().is_err());
    let cfg = SkeletonConfig {
        steps: 0,
        ..small_config()
    };
    assert!(cfg.validate().is_err());
}

#[test]
fn serialisation_formats() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let a = PointCloud::new(random_points(100, &mut rng)).unwrap();
    let cfg = SkeletonConfig {
        steps: 3,
        ..small_config()
    };
    let pair = extract_skeleton_pair(&a, &a, &cfg).unwrap();
    let csv = pair.trace.to_csv();
    assert!(csv.starts_with("step,l_s,l_p,l_r,l_ddl,total\n"));
    assert_eq!(csv.lines().count(), 5);
    let json = serde_json::to_value(pair.source.record(&cfg)).unwrap();
    assert_eq!(json["points"].as_array().unwrap().len(), 16);
    assert_eq!(json["n_samples"], 64);
    assert_eq!(json["config"]["lambda1"], 0.3);
}
