//! Synthetic benchmark pairs and their on-disk manifest.
//!
//! Every pair is a pure function of the configuration and its coordinates
//! (shape, corruption cell, trial): the clean shape, the ground-truth motion
//! and both corruption draws are seeded from the master seed. Ground truth
//! depends only on (shape, trial), so all corruption cells of a trial share
//! the same motion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};
use skelreg::corruption::{corrupt, corruption_seed, derive_seed, CorruptionSpec};
use skelreg::geometry::{apply_transform, io};
use skelreg::{PointCloud, RigidTransform, Vec3};

use crate::config::{Corruption, ExperimentConfig};
use crate::shapes::{resolve_shape, shape_stem};
use crate::{write_file, HarnessError};

const SHAPE_STREAM: u64 = 1;
const MOTION_STREAM: u64 = 2;
const CORRUPTION_STREAM: u64 = 3;

/// One registration pair as recorded in the manifest. File names are
/// relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub shape: String,
    pub trial: usize,
    pub source_file: String,
    pub target_file: String,
    pub gt_rotation: [f64; 9],
    pub gt_translation: [f64; 3],
    /// Source and target corruption, or `null` for a clean pair.
    pub corruption: Option<[CorruptionSpec; 2]>,
}

impl ManifestEntry {
    pub fn ground_truth(&self) -> Result<RigidTransform, HarnessError> {
        Ok(RigidTransform::from_row_major(&self.gt_rotation, &self.gt_translation)?)
    }

    pub fn cell(&self) -> Corruption {
        match &self.corruption {
            None => Corruption::None,
            Some([source, _]) => Corruption::Kind(source.kind(), source.severity()),
        }
    }
}

/// The manifest: an ordered list of pairs plus the directory their files
/// live in.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let entries: Vec<ManifestEntry> = serde_json::from_str(&text)?;
        for (i, e) in entries.iter().enumerate() {
            e.ground_truth()
                .map_err(|err| HarnessError::Manifest(format!("entry {i}: {err}")))?;
            if let Some([s, t]) = &e.corruption {
                if (s.kind(), s.severity()) != (t.kind(), t.severity()) {
                    return Err(HarnessError::Manifest(format!(
                        "entry {i}: source and target corruption differ in kind or severity"
                    )));
                }
            }
        }
        Ok(Self {
            entries,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("manifest entries serialise") + "\n"
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        write_file(path.as_ref(), &self.to_json())
    }

    pub fn load_pair(&self, index: usize) -> Result<(PointCloud, PointCloud), HarnessError> {
        let entry = &self.entries[index];
        let source = io::read_cloud(self.base_dir.join(&entry.source_file))?;
        let target = io::read_cloud(self.base_dir.join(&entry.target_file))?;
        Ok((source, target))
    }
}

/// A pair generated in memory.
#[derive(Clone, Debug)]
pub struct GeneratedPair {
    pub shape: String,
    pub cell: Corruption,
    pub trial: usize,
    pub source: PointCloud,
    pub target: PointCloud,
    pub ground_truth: RigidTransform,
    pub corruption: Option<[CorruptionSpec; 2]>,
}

/// Draws a rigid motion: axis uniform on the sphere, angle uniform in
/// `[0, max_angle_deg]`, translation uniform in the cube of half-side
/// `max_translation`.
pub fn sample_motion<R: Rng + ?Sized>(max_angle_deg: f64, max_translation: f64, rng: &mut R) -> RigidTransform {
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let angle = rng.random_range(0.0..=max_angle_deg.to_radians());
    let mut t = Vec3::zeros();
    for c in t.iter_mut() {
        *c = rng.random_range(-max_translation..=max_translation);
    }
    RigidTransform::from_axis_angle(Vec3::from(axis), angle, t)
}

/// Generates every pair of the experiment in manifest order
/// (shape, corruption cell, trial).
pub struct PairGenerator<'a> {
    config: &'a ExperimentConfig,
    clean: Vec<PointCloud>,
}

impl<'a> PairGenerator<'a> {
    pub fn new(config: &'a ExperimentConfig) -> Result<Self, HarnessError> {
        let shapes_seed = derive_seed(config.seed, SHAPE_STREAM);
        let clean = config
            .shapes
            .iter()
            .enumerate()
            .map(|(i, s)| resolve_shape(s, config.points, derive_seed(shapes_seed, i as u64), &config.base_dir))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { config, clean })
    }

    pub fn clean_shape(&self, shape: usize) -> &PointCloud {
        &self.clean[shape]
    }

    pub fn ground_truth(&self, shape: usize, trial: usize) -> RigidTransform {
        let seed = derive_seed(derive_seed(derive_seed(self.config.seed, MOTION_STREAM), shape as u64), trial as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_motion(self.config.rotation_max_deg, self.config.translation_max, &mut rng)
    }

    pub fn pair(&self, shape: usize, cell: Corruption, trial: usize) -> Result<GeneratedPair, HarnessError> {
        let clean = &self.clean[shape];
        let gt = self.ground_truth(shape, trial);
        let (source, corrupted_target, corruption) = match cell {
            Corruption::None => (clean.clone(), clean.clone(), None),
            Corruption::Kind(kind, severity) => {
                let master = derive_seed(derive_seed(self.config.seed, CORRUPTION_STREAM), shape as u64);
                let spec = |side| {
                    CorruptionSpec::new(
                        kind,
                        severity,
                        corruption_seed(master, trial as u64, kind.ordinal(), u64::from(severity), side),
                    )
                };
                let (s, t) = (spec(0)?, spec(1)?);
                (corrupt(clean, &s)?, corrupt(clean, &t)?, Some([s, t]))
            }
        };
        Ok(GeneratedPair {
            shape: self.config.shapes[shape].clone(),
            cell,
            trial,
            source,
            target: apply_transform(&corrupted_target, &gt),
            ground_truth: gt,
            corruption,
        })
    }

    /// All (shape, cell, trial) coordinates in manifest order.
    pub fn coordinates(&self) -> Result<Vec<(usize, Corruption, usize)>, HarnessError> {
        let cells = self.config.cells()?;
        let mut out = Vec::new();
        for shape in 0..self.clean.len() {
            for &cell in &cells {
                for trial in 0..self.config.trials {
                    out.push((shape, cell, trial));
                }
            }
        }
        Ok(out)
    }
}

fn cloud_file_name(shape: &str, cell: Corruption, trial: usize, side: &str) -> String {
    let cell = match cell {
        Corruption::None => "none".to_string(),
        Corruption::Kind(kind, severity) => format!("{kind}-s{severity}"),
    };
    format!("clouds/{}_{cell}_t{trial}_{side}.xyz", shape_stem(shape))
}

/// Writes every pair and `manifest.json` below `out_dir`. Returns the
/// manifest and its path.
pub fn generate_dataset(config: &ExperimentConfig, out_dir: &Path) -> Result<(Manifest, PathBuf), HarnessError> {
    let generator = PairGenerator::new(config)?;
    let mut entries = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (shape, cell, trial) in generator.coordinates()? {
        let pair = generator.pair(shape, cell, trial)?;
        let mut source_file = cloud_file_name(&pair.shape, cell, trial, "src");
        let mut target_file = cloud_file_name(&pair.shape, cell, trial, "tgt");
        // Two shape entries may share a file stem; keep their files apart.
        let dup = seen.entry(source_file.clone()).or_insert(0);
        if *dup > 0 {
            source_file = source_file.replace("_src", &format!("_{dup}_src"));
            target_file = target_file.replace("_tgt", &format!("_{dup}_tgt"));
        }
        *dup += 1;
        write_file(&out_dir.join(&source_file), &io::to_xyz_string(&pair.source))?;
        write_file(&out_dir.join(&target_file), &io::to_xyz_string(&pair.target))?;
        entries.push(ManifestEntry {
            shape: pair.shape,
            trial,
            source_file,
            target_file,
            gt_rotation: pair.ground_truth.rotation_row_major(),
            gt_translation: (*pair.ground_truth.translation()).into(),
            corruption: pair.corruption,
        });
    }
    let manifest = Manifest {
        entries,
        base_dir: out_dir.to_path_buf(),
    };
    let path = out_dir.join("manifest.json");
    manifest.write(&path)?;
    Ok((manifest, path))
}
