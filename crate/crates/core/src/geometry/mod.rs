//! Geometric preprocessing: thermal-lens distortion correction and
//! RGB/thermal registration onto a common grid.

mod distortion;
mod register;

pub use distortion::{fit_distortion, undistort, FitReport, RadialDistortionModel};
pub use register::{
    crop_to_thermal_fov, resample_color, resample_plane, resample_thermal, FieldOfView,
    RegisteredGrid,
};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("distortion model is non-monotonic on the sensor (1 + 3k1 r^2 + 5k2 r^4 <= 0)")]
    NonMonotonicModel,
    #[error("frame is {got_w}x{got_h} but the model was calibrated for {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("degenerate correspondences: {0}")]
    DegenerateCorrespondences(String),
    #[error("thermal field of view {th_h}x{th_v} deg exceeds rgb {rgb_h}x{rgb_v} deg")]
    FovNotContained {
        th_h: f64,
        th_v: f64,
        rgb_h: f64,
        rgb_v: f64,
    },
    #[error("invalid field of view: {0}")]
    InvalidFov(String),
    #[error("crop offset ({dx}, {dy}) pushes the crop outside the frame")]
    OffsetOutOfBounds { dx: i32, dy: i32 },
    #[error("empty frame")]
    EmptyFrame,
    #[error("io: {0}")]
    Io(PathBuf, String),
    #[error("bad model file {0}: {1}")]
    BadModelFile(PathBuf, String),
}

impl GeometryError {
    pub fn category(&self) -> &'static str {
        match self {
            GeometryError::NonMonotonicModel => "geometry/NonMonotonicModel",
            GeometryError::DimensionMismatch { .. } => "geometry/DimensionMismatch",
            GeometryError::DegenerateCorrespondences(_) => "geometry/DegenerateCorrespondences",
            GeometryError::FovNotContained { .. } => "geometry/FovNotContained",
            GeometryError::InvalidFov(_) => "geometry/InvalidFov",
            GeometryError::OffsetOutOfBounds { .. } => "geometry/OffsetOutOfBounds",
            GeometryError::EmptyFrame => "geometry/EmptyFrame",
            GeometryError::Io(..) => "geometry/IoError",
            GeometryError::BadModelFile(..) => "geometry/BadModelFile",
        }
    }
}
