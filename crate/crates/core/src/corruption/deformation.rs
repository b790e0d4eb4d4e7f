use nalgebra::{DMatrix, LU};
use rand::Rng;
use rand_distr::UnitSphere;

use super::moved_label;
use crate::geometry::{Aabb, PointCloud, Vec3};
use crate::{Error, Result};

/// Control points per axis of the deformation lattices.
pub const CONTROL_GRID: usize = 5;
const DEGREE: usize = CONTROL_GRID - 1;
const RIDGE: f64 = 1e-10;

fn grid_index(i: usize, j: usize, k: usize) -> usize {
    (i * CONTROL_GRID + j) * CONTROL_GRID + k
}

fn cube_side(bounds: &Aabb) -> Result<f64> {
    let side = bounds.extent().max();
    if side > 0.0 && side.is_finite() {
        Ok(side)
    } else {
        Err(Error::ZeroExtent)
    }
}

fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let d: [f64; 3] = rng.sample(UnitSphere);
    Vec3::from(d)
}

pub(crate) fn shear_coefficients<R: Rng + ?Sized>(max: f64, rng: &mut R) -> (f64, f64) {
    let a = max * rng.random_range(-1.0..=1.0);
    let b = max * rng.random_range(-1.0..=1.0);
    (a, b)
}

/// Shears the two coordinates other than `axis` in proportion to the
/// `axis` coordinate: with `axis = 2`, `x' = x + a z`, `y' = y + b z`.
pub fn shear_with(cloud: &PointCloud, axis: usize, a: f64, b: f64) -> Result<PointCloud> {
    if axis > 2 {
        return Err(Error::InvalidArgument(format!("shear axis {axis} not in 0..=2")));
    }
    let (i, j) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    distortion_with(cloud, |p| {
        let mut d = Vec3::zeros();
        d[i] = a * p[axis];
        d[j] = b * p[axis];
        d
    })
}

/// Adds `field(p)` to every point.
pub fn distortion_with(cloud: &PointCloud, field: impl Fn(&Vec3) -> Vec3) -> Result<PointCloud> {
    let mut points = Vec::with_capacity(cloud.len());
    let mut labels = Vec::with_capacity(cloud.len());
    for (n, p) in cloud.points().iter().enumerate() {
        let q = p + field(p);
        labels.push(moved_label(cloud.label(n), p, &q));
        points.push(q);
    }
    PointCloud::with_labels(points, labels)
}

fn bernstein(u: f64) -> [f64; CONTROL_GRID] {
    const BINOM: [f64; CONTROL_GRID] = [1.0, 4.0, 6.0, 4.0, 1.0];
    let v = 1.0 - u;
    std::array::from_fn(|i| BINOM[i] * u.powi(i as i32) * v.powi((DEGREE - i) as i32))
}

/// Free-form deformation: a 5×5×5 lattice of control displacements over a
/// cube, blended with degree-4 Bernstein polynomials.
///
/// The blending weights are non-negative and sum to one inside the cube, so
/// no point moves further than the largest control displacement.
#[derive(Clone, Debug, PartialEq)]
pub struct FfdLattice {
    min: Vec3,
    side: f64,
    displacements: Vec<Vec3>,
}

impl FfdLattice {
    /// `displacements` is indexed `(i · 5 + j) · 5 + k` for the control point
    /// at lattice coordinates `(i, j, k)` along x, y, z.
    pub fn new(bounds: Aabb, displacements: Vec<Vec3>) -> Result<Self> {
        let side = cube_side(&bounds)?;
        if displacements.len() != CONTROL_GRID.pow(3) {
            return Err(Error::DimensionMismatch {
                expected: CONTROL_GRID.pow(3),
                got: displacements.len(),
            });
        }
        Ok(Self {
            min: bounds.min,
            side,
            displacements,
        })
    }

    /// Each control point moves in a uniformly random direction by a
    /// magnitude drawn uniformly from `[0, max_displacement]`.
    pub fn random<R: Rng + ?Sized>(bounds: Aabb, max_displacement: f64, rng: &mut R) -> Self {
        let displacements = (0..CONTROL_GRID.pow(3))
            .map(|_| {
                let dir = random_direction(rng);
                dir * (max_displacement * rng.random::<f64>())
            })
            .collect();
        Self {
            min: bounds.min,
            side: bounds.extent().max(),
            displacements,
        }
    }

    pub fn displacements(&self) -> &[Vec3] {
        &self.displacements
    }

    pub fn max_control_displacement(&self) -> f64 {
        self.displacements.iter().map(|d| d.norm()).fold(0.0, f64::max)
    }

    /// Displacement at `p`; coordinates outside the cube are clamped onto it.
    pub fn displacement(&self, p: &Vec3) -> Vec3 {
        if self.side <= 0.0 {
            return Vec3::zeros();
        }
        let u = (p - self.min) / self.side;
        let bx = bernstein(u.x.clamp(0.0, 1.0));
        let by = bernstein(u.y.clamp(0.0, 1.0));
        let bz = bernstein(u.z.clamp(0.0, 1.0));
        let mut d = Vec3::zeros();
        for (i, wx) in bx.iter().enumerate() {
            for (j, wy) in by.iter().enumerate() {
                let wxy = wx * wy;
                for (k, wz) in bz.iter().enumerate() {
                    d += self.displacements[grid_index(i, j, k)] * (wxy * wz);
                }
            }
        }
        d
    }

    /// Upper bound on the Lipschitz constant of `p -> p + displacement(p)`.
    ///
    /// Along axis `a` the derivative of the blended field is a Bernstein
    /// combination of forward differences scaled by `4 / side`, so its norm is
    /// at most `4 · max‖Δ_a‖ / side`; the Jacobian norm is bounded by the
    /// Frobenius norm over the three axes.
    pub fn lipschitz_bound(&self) -> f64 {
        if self.side <= 0.0 {
            return 1.0;
        }
        let mut sq = 0.0;
        for axis in 0..3 {
            let mut worst: f64 = 0.0;
            for a in 0..CONTROL_GRID {
                for b in 0..CONTROL_GRID {
                    for s in 0..DEGREE {
                        let (lo, hi) = match axis {
                            0 => (grid_index(s, a, b), grid_index(s + 1, a, b)),
                            1 => (grid_index(a, s, b), grid_index(a, s + 1, b)),
                            _ => (grid_index(a, b, s), grid_index(a, b, s + 1)),
                        };
                        worst = worst.max((self.displacements[hi] - self.displacements[lo]).norm());
                    }
                }
            }
            let col = DEGREE as f64 * worst / self.side;
            sq += col * col;
        }
        1.0 + sq.sqrt()
    }
}

/// Radial basis function family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RbfBasis {
    /// `φ(x) = √(x² + r²)`
    Multiquadric,
    /// `φ(x) = (x² + r²)^(-1/2)`
    InverseMultiquadric,
}

impl RbfBasis {
    pub fn eval(self, x: f64, r: f64) -> f64 {
        let q = (x * x + r * r).sqrt();
        match self {
            RbfBasis::Multiquadric => q,
            RbfBasis::InverseMultiquadric => 1.0 / q,
        }
    }
}

/// Displacement field interpolating prescribed displacements at centres:
/// `u(p) = Σ_m w_m φ(‖p - c_m‖)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RbfField {
    basis: RbfBasis,
    shape: f64,
    centers: Vec<Vec3>,
    targets: Vec<Vec3>,
    weights: Vec<Vec3>,
}

impl RbfField {
    /// Solves for weights so that `u(c_m) = displacements[m]`. A `1e-10`
    /// ridge is added to the diagonal if the plain system cannot be solved.
    pub fn fit(centers: Vec<Vec3>, displacements: Vec<Vec3>, basis: RbfBasis, shape: f64) -> Result<Self> {
        if centers.len() != displacements.len() {
            return Err(Error::DimensionMismatch {
                expected: centers.len(),
                got: displacements.len(),
            });
        }
        if centers.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let n = centers.len();
        let phi = DMatrix::from_fn(n, n, |a, b| basis.eval((centers[a] - centers[b]).norm(), shape));
        let rhs = DMatrix::from_fn(n, 3, |a, c| displacements[a][c]);
        let scale = rhs.amax().max(1.0);
        let solve = |m: DMatrix<f64>| -> Option<DMatrix<f64>> {
            let sol = LU::new(m.clone()).solve(&rhs)?;
            let residual = (&m * &sol - &rhs).amax();
            (sol.iter().all(|v| v.is_finite()) && residual <= 1e-9 * scale).then_some(sol)
        };
        let sol = solve(phi.clone())
            .or_else(|| solve(phi + DMatrix::identity(n, n) * RIDGE))
            .ok_or(Error::RbfSingular)?;
        let weights = (0..n)
            .map(|a| Vec3::new(sol[(a, 0)], sol[(a, 1)], sol[(a, 2)]))
            .collect();
        Ok(Self {
            basis,
            shape,
            centers,
            targets: displacements,
            weights,
        })
    }

    /// Centres of the regular 5×5×5 grid spanning `bounds`.
    pub fn grid_centers(bounds: &Aabb) -> Result<(Vec<Vec3>, f64)> {
        let side = cube_side(bounds)?;
        let spacing = side / DEGREE as f64;
        let mut centers = Vec::with_capacity(CONTROL_GRID.pow(3));
        for i in 0..CONTROL_GRID {
            for j in 0..CONTROL_GRID {
                for k in 0..CONTROL_GRID {
                    centers.push(bounds.min + Vec3::new(i as f64, j as f64, k as f64) * spacing);
                }
            }
        }
        Ok((centers, spacing))
    }

    /// Grid over `bounds`, shape parameter equal to the grid spacing, and
    /// every control point displaced by exactly `magnitude` in a uniformly
    /// random direction.
    pub fn random<R: Rng + ?Sized>(bounds: Aabb, basis: RbfBasis, magnitude: f64, rng: &mut R) -> Result<Self> {
        let (centers, spacing) = Self::grid_centers(&bounds)?;
        let displacements = (0..centers.len())
            .map(|_| random_direction(rng) * magnitude)
            .collect();
        Self::fit(centers, displacements, basis, spacing)
    }

    pub fn basis(&self) -> RbfBasis {
        self.basis
    }

    pub fn centers(&self) -> &[Vec3] {
        &self.centers
    }

    pub fn control_displacements(&self) -> &[Vec3] {
        &self.targets
    }

    pub fn displacement(&self, p: &Vec3) -> Vec3 {
        self.centers
            .iter()
            .zip(&self.weights)
            .fold(Vec3::zeros(), |acc, (c, w)| acc + w * self.basis.eval((p - c).norm(), self.shape))
    }
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

    fn unit_cube() -> Aabb {
        Aabb {
            min: Vec3::repeat(-1.0),
            max: Vec3::repeat(1.0),
        }
    }

    #[test]
    fn shear_keeps_driving_axis() {
        let c = cloud(200, 1);
        let out = shear_with(&c, 2, 0.2, -0.1).unwrap();
        for (p, q) in c.points().iter().zip(out.points()) {
            assert_eq!(p.z, q.z);
            assert!((q.x - (p.x + 0.2 * p.z)).abs() < 1e-15);
        }
        let same = shear_with(&c, 2, 0.0, 0.0).unwrap();
        assert_eq!(same.points(), c.points());
        let out = shear_with(&c, 0, 0.2, 0.1).unwrap();
        assert!(c.points().iter().zip(out.points()).all(|(p, q)| p.x == q.x));
    }

    #[test]
    fn bernstein_partition_of_unity() {
        for u in [0.0, 0.13, 0.5, 0.99, 1.0] {
            let w = bernstein(u);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!(w.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn ffd_zero_and_bounded() {
        let c = cloud(300, 2);
        let zero = FfdLattice::new(unit_cube(), vec![Vec3::zeros(); 125]).unwrap();
        assert_eq!(distortion_with(&c, |p| zero.displacement(p)).unwrap().points(), c.points());
        let lattice = FfdLattice::random(unit_cube(), 0.25, &mut ChaCha8Rng::seed_from_u64(3));
        let max = lattice.max_control_displacement();
        assert!(max <= 0.25);
        for p in c.points() {
            assert!(lattice.displacement(p).norm() <= max * (1.0 + 1e-12));
        }
    }

    #[test]
    fn ffd_constant_field_is_translation() {
        let lattice = FfdLattice::new(unit_cube(), vec![Vec3::new(0.1, -0.2, 0.05); 125]).unwrap();
        let d = lattice.displacement(&Vec3::new(0.3, -0.7, 0.2));
        assert!((d - Vec3::new(0.1, -0.2, 0.05)).amax() < 1e-15);
    }

    #[test]
    fn ffd_lipschitz_holds_on_samples() {
        let lattice = FfdLattice::random(unit_cube(), 0.25, &mut ChaCha8Rng::seed_from_u64(4));
        let bound = lattice.lipschitz_bound();
        assert!(bound <= 1.0 + 3f64.sqrt() * 8.0 * 0.25 / 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let p = Vec3::from_fn(|_, _| rng.random_range(-0.99..0.99));
            let q = p + Vec3::from_fn(|_, _| rng.random_range(-1e-3..1e-3));
            let fp = p + lattice.displacement(&p);
            let fq = q + lattice.displacement(&q);
            assert!((fp - fq).norm() <= bound * (p - q).norm() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn rbf_interpolates_controls() {
        for basis in [RbfBasis::Multiquadric, RbfBasis::InverseMultiquadric] {
            let field = RbfField::random(unit_cube(), basis, 0.1, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
            for (c, d) in field.centers().iter().zip(field.control_displacements()) {
                assert!((field.displacement(c) - d).amax() < 1e-8);
                assert!((d.norm() - 0.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rbf_zero_is_identity_and_bases_differ() {
        let (centers, h) = RbfField::grid_centers(&unit_cube()).unwrap();
        assert_eq!(h, 0.5);
        let zero = RbfField::fit(centers, vec![Vec3::zeros(); 125], RbfBasis::Multiquadric, h).unwrap();
        let p = Vec3::new(0.1, 0.2, 0.3);
        assert_eq!(zero.displacement(&p), Vec3::zeros());
        let a = RbfField::random(unit_cube(), RbfBasis::Multiquadric, 0.1, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = RbfField::random(unit_cube(), RbfBasis::InverseMultiquadric, 0.1, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let q = Vec3::new(0.13, -0.41, 0.77);
        assert!((a.displacement(&q) - b.displacement(&q)).norm() > 1e-6);
    }
}
