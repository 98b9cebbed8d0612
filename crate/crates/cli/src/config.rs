//! Shared run configuration: defaults from an optional TOML file, the
//! `C2T_OUT_ROOT` environment override for the output root, and the
//! training presets.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::CliError;
use c2t_core::anomaly::ResidualTransform;
use c2t_core::model::TrainingConfig;

pub const DEFAULT_TOLERANCE_C: f32 = 1.0;
pub const DEFAULT_SIZE: usize = 512;
pub const TOY_SIZE: usize = 128;
pub const TOY_SCALE: f64 = 0.25;
pub const TOY_EPOCHS: usize = 15;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub tolerance_c: f32,
    pub f_mode: String,
    pub scale: f64,
    pub size: usize,
    /// Root directory prepended to relative output paths.
    pub out_root: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            tolerance_c: DEFAULT_TOLERANCE_C,
            f_mode: "identity".into(),
            scale: 1.0,
            size: DEFAULT_SIZE,
            out_root: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
            }
            None => Self::default(),
        };
        // Environment override is restricted to the output root.
        if let Ok(root) = std::env::var("C2T_OUT_ROOT") {
            cfg.out_root = PathBuf::from(root);
        }
        Ok(cfg)
    }

    pub fn resolve_out(&self, out: &Path) -> PathBuf {
        if out.is_absolute() {
            out.to_path_buf()
        } else {
            self.out_root.join(out)
        }
    }

    pub fn residual(&self, flag: Option<&str>) -> Result<ResidualTransform, CliError> {
        flag.unwrap_or(&self.f_mode)
            .parse()
            .map_err(CliError::config)
    }
}

/// Training presets from the reference acquisition campaign: winter
/// networks train from scratch at 1e-3 for 150 epochs; the summer network
/// is a soft retraining at 2e-4 for 30 epochs, batch size 3 throughout.
pub fn preset(name: &str, seed: u64) -> Result<TrainingConfig, CliError> {
    let base = TrainingConfig {
        lr_generator: 1e-3,
        lr_discriminator: 1e-3,
        epochs: 150,
        batch_size: 3,
        l1_weight: 100.0,
        seed,
        augment: true,
        checkpoint_every: 25,
    };
    match name.to_ascii_lowercase().as_str() {
        "winter" | "winter4" | "winter8" => Ok(base),
        "summer" => Ok(TrainingConfig {
            lr_generator: 2e-4,
            lr_discriminator: 2e-4,
            epochs: 30,
            ..base
        }),
        other => Err(CliError::config(format!(
            "unknown preset '{other}' (expected winter or summer)"
        ))),
    }
}
