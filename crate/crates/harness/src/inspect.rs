//! Summaries of cloud and skeleton files, with per-point CSV export for
//! external plotting.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use skelreg::geometry::io;
use skelreg::skeleton::SkeletonRecord;
use skelreg::{Label, PointCloud, Vec3};

use crate::{format_number, HarnessError};

#[derive(Clone, Debug, PartialEq)]
pub enum Contents {
    Cloud(PointCloud),
    Skeleton(SkeletonRecord),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub min: Vec3,
    pub max: Vec3,
    pub centroid: Vec3,
    /// Points per label (clean, added, perturbed); clouds only.
    pub labels: Option<[usize; 3]>,
    /// Minimum, mean and maximum radius; skeletons only.
    pub radii: Option<[f64; 3]>,
}

/// Reads a cloud (`.xyz`, `.ply`) or a skeleton record (`.json`).
pub fn load(path: &Path) -> Result<Contents, HarnessError> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let record: SkeletonRecord = serde_json::from_str(&text)?;
        if record.points.is_empty() || record.points.len() != record.radii.len() {
            return Err(HarnessError::Config(format!(
                "{}: skeleton needs one radius per point and at least one point",
                path.display()
            )));
        }
        Ok(Contents::Skeleton(record))
    } else {
        Ok(Contents::Cloud(io::read_cloud(path)?))
    }
}

fn points(contents: &Contents) -> Vec<Vec3> {
    match contents {
        Contents::Cloud(c) => c.points().to_vec(),
        Contents::Skeleton(s) => s.points.iter().map(|p| Vec3::from(*p)).collect(),
    }
}

pub fn summarize(contents: &Contents) -> Summary {
    let pts = points(contents);
    let min = pts.iter().fold(Vec3::repeat(f64::INFINITY), |a, p| a.inf(p));
    let max = pts.iter().fold(Vec3::repeat(f64::NEG_INFINITY), |a, p| a.sup(p));
    let centroid = pts.iter().sum::<Vec3>() / pts.len() as f64;
    let (labels, radii) = match contents {
        Contents::Cloud(c) => {
            let mut hist = [0usize; 3];
            for l in c.labels_or_clean() {
                hist[usize::from(l.code())] += 1;
            }
            (Some(hist), None)
        }
        Contents::Skeleton(s) => {
            let lo = s.radii.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s.radii.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = s.radii.iter().sum::<f64>() / s.radii.len() as f64;
            (None, Some([lo, mean, hi]))
        }
    };
    Summary {
        count: pts.len(),
        min,
        max,
        centroid,
        labels,
        radii,
    }
}

fn vec(v: &Vec3) -> String {
    format!("({:.6}, {:.6}, {:.6})", v.x, v.y, v.z)
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "points:   {}", self.count)?;
        writeln!(f, "bbox min: {}", vec(&self.min))?;
        writeln!(f, "bbox max: {}", vec(&self.max))?;
        writeln!(f, "centroid: {}", vec(&self.centroid))?;
        if let Some(hist) = self.labels {
            for (code, n) in hist.iter().enumerate() {
                let label = Label::from_code(code as u8).expect("three labels");
                writeln!(f, "label {:<9} {n}", label.as_str())?;
            }
        }
        if let Some([lo, mean, hi]) = self.radii {
            writeln!(f, "radius min/mean/max: {lo:.6} / {mean:.6} / {hi:.6}")?;
        }
        Ok(())
    }
}

/// Per-point CSV: `x,y,z,label` for clouds, `x,y,z,radius` for skeletons.
pub fn export_csv(contents: &Contents) -> String {
    let mut out = String::new();
    match contents {
        Contents::Cloud(c) => {
            out.push_str("x,y,z,label\n");
            for (p, l) in c.points().iter().zip(c.labels_or_clean()) {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    format_number(p.x),
                    format_number(p.y),
                    format_number(p.z),
                    l.as_str()
                );
            }
        }
        Contents::Skeleton(s) => {
            out.push_str("x,y,z,radius\n");
            for (p, r) in s.points.iter().zip(&s.radii) {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    format_number(p[0]),
                    format_number(p[1]),
                    format_number(p[2]),
                    format_number(*r)
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use skelreg::skeleton::SkeletonConfig;

    #[test]
    fn cloud_summary_counts_labels() {
        let cloud = PointCloud::with_labels(
            vec![Vec3::new(-1.0, 0.0, 0.5), Vec3::new(1.0, 0.5, -0.5), Vec3::zeros()],
            vec![Label::Clean, Label::Added, Label::Added],
        )
        .unwrap();
        let s = summarize(&Contents::Cloud(cloud));
        assert_eq!(s.count, 3);
        assert_eq!(s.labels, Some([1, 2, 0]));
        assert_eq!(s.min, Vec3::new(-1.0, 0.0, -0.5));
        assert_eq!(s.max, Vec3::new(1.0, 0.5, 0.5));
        assert!(s.to_string().contains("label added     2"));
    }

    #[test]
    fn skeleton_summary_reports_radii() {
        let record = SkeletonRecord {
            points: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
            radii: vec![0.1, 0.3],
            n_samples: 8,
            config: SkeletonConfig::default(),
        };
        let s = summarize(&Contents::Skeleton(record.clone()));
        let [lo, mean, hi] = s.radii.unwrap();
        assert_eq!((lo, hi), (0.1, 0.3));
        assert!((mean - 0.2).abs() < 1e-15);
        assert!(export_csv(&Contents::Skeleton(record)).starts_with("x,y,z,radius\n0,0,0,0.1\n"));
    }
}
