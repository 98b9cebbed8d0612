//! Anomaly metric maps and masks: the per-pixel deviation between the
//! measured and predicted thermal images, thresholded by a tolerance.
//!
//! The deviation is computed in decoded °C so the tolerance is a physical
//! quantity. The signed residual (measured minus predicted) flags only
//! hotter-than-expected regions; the absolute residual also catches cold
//! anomalies.

use ndarray::Array2;

use crate::codec::{CodecError, EncodedThermal};
use crate::frame::{ColorFrame, Mask, Rect};

#[derive(Debug, thiserror::Error)]
pub enum AnomalyError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("encoding grids differ between measured and predicted frames")]
    EncodingMismatch,
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl AnomalyError {
    pub fn category(&self) -> &'static str {
        match self {
            AnomalyError::DimensionMismatch(..) => "anomaly/DimensionMismatch",
            AnomalyError::EncodingMismatch => "anomaly/EncodingMismatch",
            AnomalyError::Codec(e) => e.category(),
        }
    }
}

/// Residual transform applied to (measured - predicted).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualTransform {
    /// Signed residual; flags hotter-than-expected pixels only.
    Identity,
    /// Absolute residual; also flags colder-than-expected pixels.
    Absolute,
}

impl std::str::FromStr for ResidualTransform {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Self::Identity),
            "absolute" | "abs" => Ok(Self::Absolute),
            other => Err(format!("unknown residual transform '{other}'")),
        }
    }
}

/// Per-pixel deviation in °C with the validity of both inputs combined.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyMap {
    pub values: Array2<f32>,
    pub validity: Mask,
}

/// Binary anomaly decision per pixel; invalid pixels are never flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyMask {
    pub values: Array2<bool>,
    pub tolerance_used: f32,
}

/// Deviation map E = f(decode(measured) - decode(predicted)), in °C.
///
/// Both frames must share dimensions and the same quantization grid;
/// the outdoor references may differ (each frame is relative to its own).
pub fn anomaly_map(
    measured: &EncodedThermal,
    predicted: &EncodedThermal,
    f: ResidualTransform,
) -> Result<AnomalyMap, AnomalyError> {
    if (measured.height(), measured.width()) != (predicted.height(), predicted.width()) {
        return Err(AnomalyError::DimensionMismatch(
            measured.width(),
            measured.height(),
            predicted.width(),
            predicted.height(),
        ));
    }
    if !measured.params.grid_matches(&predicted.params) {
        return Err(AnomalyError::EncodingMismatch);
    }
    let m = measured.decode_relative()?;
    let p = predicted.decode_relative()?;
    let mut values = &m - &p;
    if f == ResidualTransform::Absolute {
        values.mapv_inplace(f32::abs);
    }
    let validity = Array2::from_shape_fn(measured.validity.dim(), |ix| {
        measured.validity[ix] && predicted.validity[ix]
    });
    Ok(AnomalyMap { values, validity })
}

/// Threshold with a strict inequality: a pixel is anomalous exactly when
/// E > T; ties stay in the normal class.
pub fn threshold(map: &AnomalyMap, tolerance: f32) -> AnomalyMask {
    let values = Array2::from_shape_fn(map.values.dim(), |ix| {
        map.validity[ix] && map.values[ix] > tolerance
    });
    AnomalyMask {
        values,
        tolerance_used: tolerance,
    }
}

/// A connected anomalous region, reported for human review.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Region {
    pub bbox: Rect,
    pub area: usize,
    /// Mean deviation over the region's pixels, °C.
    pub mean_deviation: f32,
}

/// 4-connected components of the mask with area >= `min_area`, sorted by
/// descending mean deviation.
pub fn summarize_regions(mask: &AnomalyMask, map: &AnomalyMap, min_area: usize) -> Vec<Region> {
    let (h, w) = mask.values.dim();
    let mut visited = Array2::from_elem((h, w), false);
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for sy in 0..h {
        for sx in 0..w {
            if !mask.values[[sy, sx]] || visited[[sy, sx]] {
                continue;
            }
            let (mut min_x, mut max_x, mut min_y, mut max_y) = (sx, sx, sy, sy);
            let mut area = 0usize;
            let mut sum = 0.0f64;
            stack.push((sy, sx));
            visited[[sy, sx]] = true;
            while let Some((y, x)) = stack.pop() {
                area += 1;
                sum += map.values[[y, x]] as f64;
                min_x = min_x.min(x);
                max_x = max_x.max(x);
                min_y = min_y.min(y);
                max_y = max_y.max(y);
                let mut push = |ny: usize, nx: usize| {
                    if mask.values[[ny, nx]] && !visited[[ny, nx]] {
                        visited[[ny, nx]] = true;
                        stack.push((ny, nx));
                    }
                };
                if y > 0 {
                    push(y - 1, x);
                }
                if y + 1 < h {
                    push(y + 1, x);
                }
                if x > 0 {
                    push(y, x - 1);
                }
                if x + 1 < w {
                    push(y, x + 1);
                }
            }
            if area >= min_area {
                regions.push(Region {
                    bbox: Rect::new(min_x, min_y, max_x - min_x + 1, max_y - min_y + 1),
                    area,
                    mean_deviation: (sum / area as f64) as f32,
                });
            }
        }
    }
    regions.sort_by(|a, b| b.mean_deviation.total_cmp(&a.mean_deviation));
    regions
}

/// Deviation range covered by the overlay's color ramp, °C above tolerance.
const RAMP_SPAN_C: f32 = 5.0;

fn ramp_color(excess: f32) -> [u8; 3] {
    // Yellow at the tolerance, saturating to red RAMP_SPAN_C above it.
    let t = (excess / RAMP_SPAN_C).clamp(0.0, 1.0);
    [255, (255.0 * (1.0 - t)) as u8, 0]
}

/// Tint anomalous pixels of the RGB frame by deviation magnitude. Output
/// equals the input wherever the mask is empty; when any pixel is flagged
/// a small ramp legend is drawn in the bottom-right corner.
pub fn render_overlay(
    rgb: &ColorFrame,
    mask: &AnomalyMask,
    map: &AnomalyMap,
) -> Result<ColorFrame, AnomalyError> {
    let (h, w) = mask.values.dim();
    if (rgb.height(), rgb.width()) != (h, w) || map.values.dim() != (h, w) {
        return Err(AnomalyError::DimensionMismatch(
            rgb.width(),
            rgb.height(),
            w,
            h,
        ));
    }
    let mut out = rgb.clone();
    let mut any = false;
    for ((y, x), &flag) in mask.values.indexed_iter() {
        if !flag {
            continue;
        }
        any = true;
        let color = ramp_color(map.values[[y, x]] - mask.tolerance_used);
        for c in 0..3 {
            let base = out.data[[y, x, c]] as f32;
            out.data[[y, x, c]] = (0.4 * base + 0.6 * color[c] as f32).round() as u8;
        }
    }
    if any {
        draw_legend(&mut out);
    }
    Ok(out)
}

/// Small vertical ramp bar with a 1px border, bottom-right corner.
fn draw_legend(frame: &mut ColorFrame) {
    let (h, w) = (frame.height(), frame.width());
    let bar_h = (h / 4).clamp(8, 64);
    let bar_w = 6usize.min(w.saturating_sub(2));
    if bar_w == 0 || h < bar_h + 2 {
        return;
    }
    let x0 = w - bar_w - 1;
    let y0 = h - bar_h - 1;
    for by in 0..bar_h {
        let excess = RAMP_SPAN_C * (1.0 - by as f32 / (bar_h - 1) as f32);
        let color = ramp_color(excess);
        for bx in 0..bar_w {
            for c in 0..3 {
                frame.data[[y0 + by, x0 + bx, c]] = color[c];
            }
        }
    }
    for by in 0..bar_h + 2 {
        for bx in 0..bar_w + 2 {
            let on_border = by == 0 || by == bar_h + 1 || bx == 0 || bx == bar_w + 1;
            if on_border {
                let y = y0 + by - 1;
                let x = x0 + bx - 1;
                for c in 0..3 {
                    frame.data[[y, x, c]] = 0;
                }
            }
        }
    }
}
