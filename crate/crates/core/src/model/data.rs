//! Conversions between image/code space and the networks' [-1, 1] space.

use ndarray::Array3;

use crate::codec::{EncodedThermal, EncodingParams};
use crate::frame::{full_mask, ColorFrame};
use crate::nn::Scalar;

/// Affine map from a thermal code to the generator range: `2c/30 - 1`.
pub fn normalize_code(code: u8, max_code: u8) -> f32 {
    2.0 * code as f32 / max_code as f32 - 1.0
}

/// Inverse of [`normalize_code`]: rounds back to the nearest code and
/// clamps into range. Exact on all grid codes.
pub fn denormalize_value(v: f32, max_code: u8) -> u8 {
    (((v + 1.0) * 0.5 * max_code as f32).round()).clamp(0.0, max_code as f32) as u8
}

/// RGB bytes to a `(3, H, W)` tensor in [-1, 1].
pub fn rgb_to_tensor<F: Scalar>(frame: &ColorFrame) -> Array3<F> {
    let (h, w) = (frame.height(), frame.width());
    Array3::from_shape_fn((3, h, w), |(c, y, x)| {
        F::from(frame.data[[y, x, c]] as f64 / 127.5 - 1.0).unwrap()
    })
}

/// Thermal codes to a `(1, H, W)` tensor in [-1, 1].
pub fn codes_to_tensor<F: Scalar>(enc: &EncodedThermal) -> Array3<F> {
    let max = enc.params.max_code();
    let (h, w) = (enc.height(), enc.width());
    Array3::from_shape_fn((1, h, w), |(_, y, x)| {
        F::from(normalize_code(enc.codes[[y, x]], max) as f64).unwrap()
    })
}

/// Generator output back to a fully valid code image.
pub fn tensor_to_codes(y: &Array3<f32>, params: &EncodingParams) -> EncodedThermal {
    let (c, h, w) = y.dim();
    assert_eq!(c, 1, "thermal tensors are single channel");
    let max = params.max_code();
    let codes =
        ndarray::Array2::from_shape_fn((h, w), |(r, col)| denormalize_value(y[[0, r, col]], max));
    EncodedThermal {
        codes,
        params: *params,
        validity: full_mask(h, w),
    }
}
