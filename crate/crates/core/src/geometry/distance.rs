use super::{SpatialIndex, Vec3};
use crate::{Error, Result};

/// Scale factor applied to the squared-distance chamfer sum.
pub const CHAMFER_PREFACTOR: f64 = 1e-4;

fn directed_sum(from: &[Vec3], to: &[Vec3], f: impl Fn(f64) -> f64) -> f64 {
    let index = SpatialIndex::new(to);
    from.iter()
        .map(|p| f(index.nearest(p).expect("non-empty index").1))
        .sum()
}

fn check_non_empty(a: &[Vec3], b: &[Vec3]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(())
}

/// `1e-4 · (Σ_a min_b ‖a-b‖² + Σ_b min_a ‖b-a‖²)`.
pub fn chamfer_distance(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    check_non_empty(a, b)?;
    let ab = directed_sum(a, b, |d2| d2);
    let ba = directed_sum(b, a, |d2| d2);
    Ok(CHAMFER_PREFACTOR * (ab + ba))
}

/// Bidirectional sum of unsquared nearest-neighbour distances.
pub fn l_ddl(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    check_non_empty(a, b)?;
    Ok(directed_sum(a, b, f64::sqrt) + directed_sum(b, a, f64::sqrt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_points() {
        let a = [Vec3::zeros()];
        let b = [Vec3::x()];
        assert_eq!(chamfer_distance(&a, &b).unwrap(), 2e-4);
        assert_eq!(l_ddl(&a, &b).unwrap(), 2.0);
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(l_ddl(&b, &b).unwrap(), 0.0);
    }

    #[test]
    fn empty_is_error() {
        assert!(chamfer_distance(&[], &[Vec3::zeros()]).is_err());
        assert!(l_ddl(&[Vec3::zeros()], &[]).is_err());
    }
}
