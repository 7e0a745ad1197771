use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::label::ClassLabel;
use crate::sim::{ClearingAction, MediumSpec};
use crate::tactile::io::{image_to_png, rgb8_from_png};
use crate::tactile::{
    background, normals_from_heightmap, render, scatter_loose_grains, shade, Grid, HeightMap,
    LightingModel, Pose, ShapeSpec, TactileImage, GEL_THICKNESS_MM,
};
use crate::{seed, Error, Result};

pub const MIN_PER_CLASS: usize = 30;
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// How the synthetic corpus is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub per_class: usize,
    /// Circumscribed diameter of every object, mm.
    pub shape_diameter_mm: f64,
    /// Objects are centered uniformly within this distance of the field center (per axis), mm.
    pub max_offset_mm: f64,
    pub press_depth_min_mm: f64,
    pub press_depth_max_mm: f64,
    /// Zero-contact images carry between 0 and this many loose rice grains.
    pub max_loose_grains: usize,
    /// Per-channel Gaussian camera noise added before 8-bit quantization.
    pub sensor_noise_sigma: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub grid: Grid,
    pub lighting: LightingModel,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            per_class: 300,
            shape_diameter_mm: 10.0,
            max_offset_mm: 1.0,
            press_depth_min_mm: 0.4,
            press_depth_max_mm: 1.2,
            max_loose_grains: 2,
            sensor_noise_sigma: 0.01,
            val_fraction: 200.0 / 1500.0,
            test_fraction: 100.0 / 1500.0,
            grid: Grid::default(),
            lighting: LightingModel::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_class < MIN_PER_CLASS {
            return Err(Error::domain(format!(
                "dataset.per_class must be at least {MIN_PER_CLASS}, got {}",
                self.per_class
            )));
        }
        self.grid.validate()?;
        self.lighting.validate()?;
        if !(self.press_depth_min_mm > 0.0
            && self.press_depth_min_mm <= self.press_depth_max_mm
            && self.press_depth_max_mm <= GEL_THICKNESS_MM)
        {
            return Err(Error::config(format!(
                "dataset press depth range must satisfy 0 < min ≤ max ≤ {GEL_THICKNESS_MM} mm"
            )));
        }
        if !(self.max_offset_mm >= 0.0) || !(self.sensor_noise_sigma >= 0.0) {
            return Err(Error::config(
                "dataset.max_offset_mm and sensor_noise_sigma must be non-negative",
            ));
        }
        let worst = ShapeSpec::new(
            crate::tactile::ShapeKind::Circle,
            self.shape_diameter_mm,
            Pose {
                x_mm: self.max_offset_mm,
                y_mm: self.max_offset_mm,
                rotation_deg: 0.0,
            },
            self.press_depth_max_mm,
        );
        worst.validate()?;
        let (hx, hy) = self.grid.half_extent();
        let reach = self.shape_diameter_mm / 2.0 + self.max_offset_mm + GEL_THICKNESS_MM;
        if reach > hx.min(hy) {
            return Err(Error::config(format!(
                "objects of {} mm offset by up to {} mm do not fit the {:.1} mm field",
                self.shape_diameter_mm,
                self.max_offset_mm,
                2.0 * hx.min(hy)
            )));
        }
        let (v, t) = (self.val_fraction, self.test_fraction);
        if !(v > 0.0 && t > 0.0 && v + t < 1.0) {
            return Err(Error::config(
                "dataset val/test fractions must be positive and sum below 1",
            ));
        }
        Ok(())
    }

    /// `(train, val, test)` image counts per class.
    pub fn split_sizes(&self) -> (usize, usize, usize) {
        let n = self.per_class as f64;
        let val = (n * self.val_fraction).round() as usize;
        let test = (n * self.test_fraction).round() as usize;
        (self.per_class - val - test, val, test)
    }

    /// SHA-256 over the serialized config and seed.
    pub fn hash(&self, seed: u64) -> String {
        let json = serde_json::to_string(&(self, seed)).expect("config serializes");
        hex_sha256(json.as_bytes())
    }
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// One generated image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub label: ClassLabel,
    pub pose: Option<Pose>,
    pub press_depth_mm: Option<f64>,
    pub seed: u64,
    pub split: Split,
    pub sha256: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    /// Directory that entry paths are relative to.
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn config_hash(&self) -> Option<&str> {
        self.entries.first().map(|e| e.config_hash.as_str())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Image count per `(label, split)`.
    pub fn counts(&self) -> BTreeMap<(ClassLabel, Split), usize> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry((e.label, e.split)).or_insert(0) += 1;
        }
        out
    }

    pub fn path_of(&self, e: &ManifestEntry) -> PathBuf {
        self.root.join(&e.path)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self) -> Result<PathBuf> {
        let path = self.root.join(MANIFEST_FILE);
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i as u64 + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        if entries.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: "manifest has no entries".into(),
            });
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(DatasetManifest { root, entries })
    }

    /// Checks that every file exists with its recorded hash and that no image
    /// content is shared between splits.
    pub fn verify(&self) -> Result<()> {
        let mut seen: BTreeMap<&str, Split> = BTreeMap::new();
        for e in &self.entries {
            let path = self.path_of(e);
            let bytes = fs::read(&path).map_err(|err| Error::io(&path, err))?;
            if hex_sha256(&bytes) != e.sha256 {
                return Err(Error::config(format!(
                    "{}: content does not match manifest hash",
                    path.display()
                )));
            }
            if let Some(prev) = seen.insert(&e.sha256, e.split) {
                if prev != e.split {
                    return Err(Error::config(format!(
                        "{}: identical image in {} and {} splits",
                        e.path,
                        prev.name(),
                        e.split.name()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A generated sample before rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedImage {
    pub path: String,
    pub label: ClassLabel,
    pub pose: Option<Pose>,
    pub press_depth_mm: Option<f64>,
    pub seed: u64,
    pub split: Split,
}

/// Deterministic list of samples (labels, poses, seeds, splits) for `cfg` and `seed`.
pub fn plan_dataset(cfg: &DatasetConfig, seed: u64) -> Result<Vec<PlannedImage>> {
    cfg.validate()?;
    let (n_train, n_val, _) = cfg.split_sizes();
    let mut out = Vec::with_capacity(cfg.per_class * ClassLabel::ALL.len());
    for label in ClassLabel::ALL {
        let class_tag = label.index() as u64;
        let mut order: Vec<usize> = (0..cfg.per_class).collect();
        order.shuffle(&mut seed::rng(seed::derive(seed, &[0x5b1, class_tag])));
        let mut splits = vec![Split::Test; cfg.per_class];
        for (rank, &i) in order.iter().enumerate() {
            splits[i] = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
        for (i, split) in splits.into_iter().enumerate() {
            let image_seed = seed::derive(seed, &[class_tag, i as u64]);
            let mut rng = seed::rng(image_seed);
            let (pose, depth) = match label.shape() {
                Some(_) => {
                    let m = cfg.max_offset_mm;
                    let pose = Pose {
                        x_mm: if m > 0.0 {
                            rng.random_range(-m..=m)
                        } else {
                            0.0
                        },
                        y_mm: if m > 0.0 {
                            rng.random_range(-m..=m)
                        } else {
                            0.0
                        },
                        rotation_deg: rng.random_range(0.0..360.0),
                    };
                    let depth = rng.random_range(cfg.press_depth_min_mm..=cfg.press_depth_max_mm);
                    (Some(pose), Some(depth))
                }
                None => (None, None),
            };
            out.push(PlannedImage {
                path: format!("images/{}/{i:04}.png", label.name()),
                label,
                pose,
                press_depth_mm: depth,
                seed: image_seed,
                split,
            });
        }
    }
    Ok(out)
}

/// Renders one planned sample, including camera noise.
pub fn render_planned(cfg: &DatasetConfig, p: &PlannedImage) -> Result<TactileImage> {
    let mut img = match (p.label.shape(), p.pose, p.press_depth_mm) {
        (Some(kind), Some(pose), Some(depth)) => {
            let shape = ShapeSpec::new(kind, cfg.shape_diameter_mm, pose, depth);
            let sand = MediumSpec::sand();
            let medium = p.label.sandy().then_some(&sand);
            render(
                &shape,
                medium,
                ClearingAction::None,
                &cfg.lighting,
                &cfg.grid,
                p.seed,
            )?
        }
        _ => {
            let count =
                seed::rng(seed::derive(p.seed, &[0xc1u64])).random_range(0..=cfg.max_loose_grains);
            if count == 0 {
                background(&cfg.lighting, &cfg.grid)
            } else {
                let hm = scatter_loose_grains(
                    &HeightMap::zeros(cfg.grid),
                    &MediumSpec::rice(),
                    count,
                    p.seed,
                );
                shade(&normals_from_heightmap(&hm), &cfg.lighting)
            }
        }
    };
    if cfg.sensor_noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.sensor_noise_sigma).expect("finite sigma");
        let mut rng = seed::rng(seed::derive(p.seed, &[0x0153]));
        for px in &mut img.pixels {
            for v in px.iter_mut() {
                *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
    }
    Ok(img)
}

/// Renders the corpus into `out_dir` (images plus `manifest.jsonl`).
pub fn generate_dataset(cfg: &DatasetConfig, seed: u64, out_dir: &Path) -> Result<DatasetManifest> {
    let plan = plan_dataset(cfg, seed)?;
    let config_hash = cfg.hash(seed);
    for label in ClassLabel::ALL {
        let dir = out_dir.join("images").join(label.name());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let make = |p: &PlannedImage| -> Result<ManifestEntry> {
        let png = image_to_png(&render_planned(cfg, p)?);
        let path = out_dir.join(&p.path);
        fs::write(&path, &png).map_err(|e| Error::io(&path, e))?;
        Ok(ManifestEntry {
            path: p.path.clone(),
            label: p.label,
            pose: p.pose,
            press_depth_mm: p.press_depth_mm,
            seed: p.seed,
            split: p.split,
            sha256: hex_sha256(&png),
            config_hash: config_hash.clone(),
        })
    };
    #[cfg(feature = "parallel")]
    let entries: Result<Vec<_>> = {
        use rayon::prelude::*;
        plan.par_iter().map(make).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let entries: Result<Vec<_>> = plan.iter().map(make).collect();

    let manifest = DatasetManifest {
        root: out_dir.to_path_buf(),
        entries: entries?,
    };
    manifest.write()?;
    Ok(manifest)
}

/// 8-bit images of one split held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImages {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB bytes per image.
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<ClassLabel>,
}

impl LabeledImages {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn from_manifest(manifest: &DatasetManifest, split: Split) -> Result<Self> {
        let mut out = LabeledImages {
            width: 0,
            height: 0,
            images: Vec::new(),
            labels: Vec::new(),
        };
        for e in manifest.split(split) {
            let path = manifest.path_of(e);
            let bytes = fs::read(&path).map_err(|err| Error::io(&path, err))?;
            let (w, h, rgb) = rgb8_from_png(&bytes, &path)?;
            if out.images.is_empty() {
                (out.width, out.height) = (w, h);
            } else if (w, h) != (out.width, out.height) {
                return Err(Error::config(format!(
                    "{}: image is {w}×{h}, expected {}×{}",
                    path.display(),
                    out.width,
                    out.height
                )));
            }
            out.images.push(rgb);
            out.labels.push(e.label);
        }
        Ok(out)
    }

    pub fn image(&self, i: usize) -> TactileImage {
        TactileImage::from_rgb8(self.width, self.height, &self.images[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatasetConfig {
        DatasetConfig {
            per_class: 30,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn default_split_is_240_40_20() {
        assert_eq!(DatasetConfig::default().split_sizes(), (240, 40, 20));
        DatasetConfig::default().validate().unwrap();
    }

    #[test]
    fn too_few_per_class_rejected() {
        let cfg = DatasetConfig {
            per_class: 29,
            ..DatasetConfig::default()
        };
        assert!(matches!(plan_dataset(&cfg, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn plan_counts_and_determinism() {
        let cfg = small();
        let plan = plan_dataset(&cfg, 3).unwrap();
        assert_eq!(plan.len(), 9 * 30);
        assert_eq!(plan, plan_dataset(&cfg, 3).unwrap());
        assert_ne!(plan, plan_dataset(&cfg, 4).unwrap());
        let (tr, va, te) = cfg.split_sizes();
        for label in ClassLabel::ALL {
            let count = |s| {
                plan.iter()
                    .filter(|p| p.label == label && p.split == s)
                    .count()
            };
            assert_eq!(
                (count(Split::Train), count(Split::Val), count(Split::Test)),
                (tr, va, te)
            );
        }
    }

    #[test]
    fn oversized_offsets_rejected() {
        let cfg = DatasetConfig {
            max_offset_mm: 3.0,
            ..DatasetConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn config_hash_tracks_settings() {
        let a = DatasetConfig::default();
        let b = DatasetConfig {
            sensor_noise_sigma: 0.02,
            ..a.clone()
        };
        assert_eq!(a.hash(1), a.hash(1));
        assert_ne!(a.hash(1), a.hash(2));
        assert_ne!(a.hash(1), b.hash(1));
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            hex_sha256(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn zero_contact_renders_are_distinct() {
        let cfg = small();
        let plan = plan_dataset(&cfg, 0).unwrap();
        let zero: Vec<_> = plan
            .iter()
            .filter(|p| p.label == ClassLabel::ZeroContact)
            .take(5)
            .collect();
        let imgs: Vec<_> = zero
            .iter()
            .map(|p| image_to_png(&render_planned(&cfg, p).unwrap()))
            .collect();
        for i in 0..imgs.len() {
            for j in i + 1..imgs.len() {
                assert_ne!(imgs[i], imgs[j]);
            }
        }
    }
}
