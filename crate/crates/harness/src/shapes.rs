//! Built-in synthetic shapes and shape resolution.
//!
//! Shapes are sampled uniformly by area over the surfaces of simple
//! primitives and then normalised into the unit cube. The table and the
//! airplane are deliberately free of proper rotational symmetries so that a
//! rigid motion is identifiable from the geometry alone.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::UnitSphere;
use skelreg::geometry::{fps_sample, io, normalize_cloud};
use skelreg::{PointCloud, Vec3};

use crate::HarnessError;

pub const BUILTIN_SHAPES: [&str; 4] = ["sphere", "torus", "table", "airplane"];

#[derive(Clone, Copy, Debug)]
enum Primitive {
    Cuboid { center: Vec3, half: Vec3 },
    /// Closed cylinder along the x axis.
    Cylinder { center: Vec3, radius: f64, half_len: f64 },
}

impl Primitive {
    fn area(&self) -> f64 {
        match *self {
            Primitive::Cuboid { half, .. } => 8.0 * (half.x * half.y + half.y * half.z + half.x * half.z),
            Primitive::Cylinder { radius, half_len, .. } => {
                let pi = std::f64::consts::PI;
                4.0 * pi * radius * half_len + 2.0 * pi * radius * radius
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        match *self {
            Primitive::Cuboid { center, half } => {
                let faces = [half.y * half.z, half.x * half.z, half.x * half.y];
                let axis = WeightedIndex::new(faces).expect("positive face areas").sample(rng);
                let mut local = Vec3::new(
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                );
                local[axis] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                center + local.component_mul(&half)
            }
            Primitive::Cylinder {
                center,
                radius,
                half_len,
            } => {
                let lateral = 2.0 * half_len;
                let cap = radius / 2.0;
                let phi = rng.random_range(0.0..std::f64::consts::TAU);
                let (s, c) = phi.sin_cos();
                if rng.random_range(0.0..lateral + 2.0 * cap) < lateral {
                    center + Vec3::new(rng.random_range(-half_len..=half_len), radius * c, radius * s)
                } else {
                    let rho = radius * rng.random::<f64>().sqrt();
                    let x = if rng.random_bool(0.5) { half_len } else { -half_len };
                    center + Vec3::new(x, rho * c, rho * s)
                }
            }
        }
    }
}

fn cuboid(c: [f64; 3], h: [f64; 3]) -> Primitive {
    Primitive::Cuboid {
        center: Vec3::from(c),
        half: Vec3::from(h),
    }
}

fn table() -> Vec<Primitive> {
    vec![
        cuboid([0.0, 0.0, 0.35], [0.6, 0.4, 0.04]),
        cuboid([0.52, 0.32, -0.04], [0.04, 0.04, 0.35]),
        cuboid([0.52, -0.32, -0.04], [0.04, 0.04, 0.35]),
        cuboid([-0.52, 0.32, -0.04], [0.04, 0.04, 0.35]),
        cuboid([-0.52, -0.32, -0.04], [0.04, 0.04, 0.35]),
        // Drawer under one corner and a single stretcher break the symmetry.
        cuboid([0.3, -0.15, 0.22], [0.22, 0.18, 0.09]),
        cuboid([-0.52, 0.0, -0.22], [0.03, 0.3, 0.03]),
    ]
}

fn airplane() -> Vec<Primitive> {
    vec![
        Primitive::Cylinder {
            center: Vec3::zeros(),
            radius: 0.1,
            half_len: 0.8,
        },
        cuboid([0.05, 0.0, 0.0], [0.15, 0.75, 0.02]),
        cuboid([-0.7, 0.0, 0.02], [0.08, 0.25, 0.015]),
        cuboid([-0.72, 0.0, 0.18], [0.08, 0.015, 0.16]),
        cuboid([0.85, 0.0, 0.0], [0.05, 0.06, 0.06]),
    ]
}

fn sample_composite<R: Rng + ?Sized>(parts: &[Primitive], n: usize, rng: &mut R) -> Vec<Vec3> {
    let pick = WeightedIndex::new(parts.iter().map(Primitive::area)).expect("positive areas");
    (0..n).map(|_| parts[pick.sample(rng)].sample(rng)).collect()
}

fn sample_torus<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vec3> {
    let (big, small) = (0.7, 0.25);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u = rng.random_range(0.0..std::f64::consts::TAU);
        let v = rng.random_range(0.0..std::f64::consts::TAU);
        // Accept proportionally to the local area element.
        if rng.random::<f64>() * (big + small) <= big + small * v.cos() {
            let ring = big + small * v.cos();
            out.push(Vec3::new(ring * u.cos(), ring * u.sin(), small * v.sin()));
        }
    }
    out
}

/// Samples `n` points of a built-in shape and normalises them.
pub fn builtin_shape(name: &str, n: usize, seed: u64) -> Result<PointCloud, HarnessError> {
    if n < 3 {
        return Err(HarnessError::Config(format!("shape needs at least 3 points, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = match name {
        "sphere" => (0..n)
            .map(|_| Vec3::from(UnitSphere.sample(&mut rng) as [f64; 3]))
            .collect(),
        "torus" => sample_torus(n, &mut rng),
        "table" => sample_composite(&table(), n, &mut rng),
        "airplane" => sample_composite(&airplane(), n, &mut rng),
        other => return Err(HarnessError::UnknownShape(other.to_string())),
    };
    let (cloud, _) = normalize_cloud(&PointCloud::new(points)?)?;
    Ok(cloud)
}

/// Resolves a shape entry: a built-in name, or a cloud file relative to
/// `base`. File clouds are normalised and reduced to `n` points by farthest
/// point sampling when larger.
pub fn resolve_shape(entry: &str, n: usize, seed: u64, base: &Path) -> Result<PointCloud, HarnessError> {
    if BUILTIN_SHAPES.contains(&entry) {
        return builtin_shape(entry, n, seed);
    }
    let path = base.join(entry);
    if !path.is_file() {
        return Err(HarnessError::UnknownShape(entry.to_string()));
    }
    let cloud = io::read_cloud(&path)?;
    let cloud = if cloud.len() > n { fps_sample(&cloud, n, seed)? } else { cloud };
    Ok(normalize_cloud(&cloud)?.0)
}

/// A file-system friendly name for a shape entry.
pub fn shape_stem(entry: &str) -> String {
    let stem = Path::new(entry)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| entry.to_string());
    stem.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}
