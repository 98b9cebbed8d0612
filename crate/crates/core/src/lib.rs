//! Label-free anomaly detection for building envelopes.
//!
//! The pipeline learns a color-to-thermal mapping on anomaly-free
//! RGB/thermal pairs and flags image regions where the measured thermal
//! image deviates from the prediction beyond a tolerance:
//!
//! 1. **geometry** – thermal lens undistortion, FOV-matched cropping,
//!    resampling onto the common grid.
//! 2. **codec** – relative-temperature quantization to integer codes and
//!    the paired PNG + sidecar file format.
//! 3. **dataset** – condition-tagged catalogs, deterministic splits,
//!    mirroring augmentation, batch schedules.
//! 4. **model** – the conditional adversarial RGB-to-thermal translator
//!    (U-Net generator, patch discriminator) with training, fine-tuning,
//!    checkpoints, and inference.
//! 5. **anomaly** – deviation maps, tolerance thresholding, region
//!    reports, overlays.
//! 6. **evaluation** – per-image deviation statistics, histograms,
//!    detection scoring against ground truth, report generation.
//! 7. **synth** – procedural facade scene generator producing paired
//!    data with exact anomaly ground truth.

pub mod anomaly;
pub mod codec;
pub mod dataset;
pub mod evaluation;
pub mod frame;
pub mod geometry;
pub mod model;
pub mod nn;
pub mod synth;
