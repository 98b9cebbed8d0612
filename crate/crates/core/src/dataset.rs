//! Condition-tagged catalogs of aligned pairs: deterministic train/eval
//! splits, horizontal-mirroring augmentation, and batch iteration.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use crate::codec::{self, AlignedPair, CodecError};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("no pairs found in {0}")]
    EmptyDirectory(PathBuf),
    #[error("validation failed for: {}", .0.join(", "))]
    ValidationFailure(Vec<String>),
    #[error("split {0:?} is empty")]
    EmptySplit(Split),
    #[error("invalid eval spec: {0}")]
    InvalidEvalSpec(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("io: {0}")]
    Io(String),
}

impl DatasetError {
    pub fn category(&self) -> &'static str {
        match self {
            DatasetError::EmptyDirectory(_) => "dataset/EmptyDirectory",
            DatasetError::ValidationFailure(_) => "dataset/ValidationFailure",
            DatasetError::EmptySplit(_) => "dataset/EmptySplit",
            DatasetError::InvalidEvalSpec(_) => "dataset/InvalidEvalSpec",
            DatasetError::Codec(e) => e.category(),
            DatasetError::Io(_) => "dataset/IoError",
        }
    }
}

/// Acquisition condition label with its outdoor temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionTag {
    pub name: String,
    pub t_out: f32,
}

impl ConditionTag {
    pub fn new(name: impl Into<String>, t_out: f32) -> Self {
        Self {
            name: name.into(),
            t_out,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub scene_id: String,
    pub split: Split,
}

/// Immutable record of which scenes belong to which split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCatalog {
    pub condition: ConditionTag,
    pub pair_dir: PathBuf,
    pub seed: u64,
    pub entries: Vec<CatalogEntry>,
    /// Free-text acquisition notes (weather, platform, ...).
    pub notes: Option<String>,
}

/// How many scenes go to the evaluation split.
#[derive(Debug, Clone, Copy)]
pub enum EvalSpec {
    Fraction(f64),
    Count(usize),
}

/// Scan a pair directory, validate every pair, and split it
/// deterministically into train/eval.
pub fn build_catalog(
    pair_dir: &Path,
    condition: ConditionTag,
    eval: EvalSpec,
    seed: u64,
) -> Result<DatasetCatalog, DatasetError> {
    let ids = codec::list_scene_ids(pair_dir).map_err(DatasetError::Codec)?;
    if ids.is_empty() {
        return Err(DatasetError::EmptyDirectory(pair_dir.to_path_buf()));
    }

    let mut failures = Vec::new();
    // Orphan companions without a sidecar are also validation failures.
    for entry in fs::read_dir(pair_dir).map_err(|e| DatasetError::Io(e.to_string()))? {
        let entry = entry.map_err(|e| DatasetError::Io(e.to_string()))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        for suffix in ["_rgb.png", "_th.png"] {
            if let Some(stem) = name.strip_suffix(suffix) {
                if !ids.iter().any(|id| id == stem) {
                    failures.push(format!("{name}: orphan file without sidecar"));
                }
            }
        }
    }
    for id in &ids {
        if let Err(e) = codec::read_pair(pair_dir, id) {
            failures.push(format!("{id}: {e}"));
        }
    }
    if !failures.is_empty() {
        failures.sort();
        return Err(DatasetError::ValidationFailure(failures));
    }

    let eval_count = match eval {
        EvalSpec::Count(n) => n,
        EvalSpec::Fraction(f) => {
            if !(0.0 < f && f < 1.0) {
                return Err(DatasetError::InvalidEvalSpec(format!(
                    "fraction {f} outside (0, 1)"
                )));
            }
            ((ids.len() as f64) * f).round() as usize
        }
    };
    if eval_count == 0 || eval_count >= ids.len() {
        return Err(DatasetError::InvalidEvalSpec(format!(
            "eval count {eval_count} must be in 1..{}",
            ids.len()
        )));
    }

    let mut shuffled = ids;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let mut entries: Vec<CatalogEntry> = shuffled
        .iter()
        .enumerate()
        .map(|(i, id)| CatalogEntry {
            scene_id: id.clone(),
            split: if i < eval_count {
                Split::Eval
            } else {
                Split::Train
            },
        })
        .collect();
    entries.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));

    Ok(DatasetCatalog {
        condition,
        pair_dir: pair_dir.to_path_buf(),
        seed,
        entries,
        notes: None,
    })
}

impl DatasetCatalog {
    pub fn scene_ids(&self, split: Split) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.split == split)
            .map(|e| e.scene_id.as_str())
            .collect()
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.entries.iter().filter(|e| e.split == split).count()
    }

    pub fn load_pair(&self, scene_id: &str) -> Result<AlignedPair, DatasetError> {
        Ok(codec::read_pair(&self.pair_dir, scene_id)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let json =
            serde_json::to_string_pretty(self).map_err(|e| DatasetError::Io(e.to_string()))?;
        fs::write(path, json).map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path)
            .map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Io(e.to_string()))
    }
}

/// Horizontal mirroring: both images and the validity mask flip about the
/// vertical axis.
pub fn augment_mirror(pair: &AlignedPair) -> AlignedPair {
    AlignedPair {
        scene_id: pair.scene_id.clone(),
        rgb: pair.rgb.mirror_horizontal(),
        thermal: pair.thermal.mirror_horizontal(),
        condition: pair.condition.clone(),
    }
}

/// One scheduled item of an epoch: which scene, and whether the loader
/// should mirror it.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchItem {
    pub scene_id: String,
    pub mirrored: bool,
}

/// Deterministic epoch schedule: every scene exactly once, shuffled, with
/// per-item mirror flags drawn at probability 0.5 when augmentation is on.
/// The final short batch is kept.
pub fn epoch_batches(
    catalog: &DatasetCatalog,
    split: Split,
    batch_size: usize,
    shuffle_seed: u64,
    epoch: usize,
    augmentation_on: bool,
) -> Result<Vec<Vec<BatchItem>>, DatasetError> {
    assert!(batch_size >= 1);
    let ids = catalog.scene_ids(split);
    if ids.is_empty() {
        return Err(DatasetError::EmptySplit(split));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed ^ (epoch as u64).wrapping_mul(0x9E3779B97F4A7C15));
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut rng);
    let items: Vec<BatchItem> = order
        .into_iter()
        .map(|i| BatchItem {
            scene_id: ids[i].to_string(),
            mirrored: augmentation_on && rng.gen_bool(0.5),
        })
        .collect();
    Ok(items
        .chunks(batch_size)
        .map(|c| c.to_vec())
        .collect())
}

/// Load the pairs of one scheduled batch, applying mirror flags.
pub fn load_batch(
    catalog: &DatasetCatalog,
    batch: &[BatchItem],
) -> Result<Vec<AlignedPair>, DatasetError> {
    batch
        .iter()
        .map(|item| {
            let pair = catalog.load_pair(&item.scene_id)?;
            Ok(if item.mirrored {
                augment_mirror(&pair)
            } else {
                pair
            })
        })
        .collect()
}
