//! The learned color-to-thermal mapping: a conditional adversarial
//! image-to-image translator (U-Net generator, patch discriminator),
//! its training loop, checkpoints, and inference.

mod checkpoint;
mod data;
mod patchgan;
mod train;
mod unet;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Provenance};
pub use data::{codes_to_tensor, denormalize_value, normalize_code, rgb_to_tensor, tensor_to_codes};
pub use patchgan::{Discriminator, DiscriminatorConfig};
pub use train::{train, EpochStats, TrainedModels, TrainingConfig, TrainingLog};
pub use unet::{Generator, GeneratorConfig};

use crate::codec::{CodecError, EncodedThermal, EncodingParams};
use crate::dataset::DatasetError;
use crate::frame::ColorFrame;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite loss at epoch {epoch}, step {step}; training aborted")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("input is {got_w}x{got_h} but the model expects {want}x{want}")]
    ResolutionMismatch {
        got_w: usize,
        got_h: usize,
        want: usize,
    },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl ModelError {
    pub fn category(&self) -> &'static str {
        match self {
            ModelError::ShapeMismatch(_) => "model/ShapeMismatch",
            ModelError::NonFiniteLoss { .. } => "model/NonFiniteLoss",
            ModelError::ResolutionMismatch { .. } => "model/ResolutionMismatch",
            ModelError::InvalidConfig(_) => "model/InvalidConfig",
            ModelError::BadCheckpoint(_) => "model/BadCheckpoint",
            ModelError::Io(_) => "model/IoError",
            ModelError::Dataset(e) => e.category(),
            ModelError::Codec(e) => e.category(),
        }
    }
}

/// Predict the thermal code image for a preprocessed RGB frame.
/// Deterministic: dropout is inference-disabled and the loaded model is
/// immutable, so equal inputs give equal outputs.
pub fn predict(
    gen: &Generator<f32>,
    rgb: &ColorFrame,
    params: &EncodingParams,
) -> Result<EncodedThermal, ModelError> {
    let want = gen.config().size;
    if rgb.width() != want || rgb.height() != want {
        return Err(ModelError::ResolutionMismatch {
            got_w: rgb.width(),
            got_h: rgb.height(),
            want,
        });
    }
    params.validate()?;
    let x = rgb_to_tensor::<f32>(rgb);
    let (y, _) = gen.forward(&x, None);
    Ok(tensor_to_codes(&y, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::ColorFrame;

    #[test]
    fn untrained_model_outputs_valid_codes_deterministically() {
        let cfg = GeneratorConfig {
            size: 32,
            scale: 0.1,
            ..GeneratorConfig::default()
        };
        let gen = Generator::<f32>::new(&cfg, 99).unwrap();
        let mut rgb = ColorFrame::filled(32, 32, [120, 30, 200]);
        rgb.data[[5, 9, 0]] = 255;
        let params = EncodingParams::for_outdoor(-4.0);

        let a = predict(&gen, &rgb, &params).unwrap();
        a.validate().unwrap();
        assert!(a.codes.iter().all(|&c| c <= 30));

        let b = predict(&gen, &rgb, &params).unwrap();
        assert_eq!(a, b);

        // Decoded predictions stay inside the valid relative interval.
        let rel = a.decode_relative().unwrap();
        assert!(rel.iter().all(|&v| (-5.0..=10.0).contains(&v)));
    }

    #[test]
    fn resolution_mismatch_rejected() {
        let cfg = GeneratorConfig {
            size: 32,
            scale: 0.1,
            ..GeneratorConfig::default()
        };
        let gen = Generator::<f32>::new(&cfg, 0).unwrap();
        let rgb = ColorFrame::filled(16, 16, [0, 0, 0]);
        assert!(matches!(
            predict(&gen, &rgb, &EncodingParams::for_outdoor(0.0)),
            Err(ModelError::ResolutionMismatch { .. })
        ));
    }
}
