//! RGB/thermal registration: field-of-view matched cropping and bilinear
//! resampling onto the common training grid.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::frame::{ColorFrame, Mask, ThermalFrame};

/// Camera field of view in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldOfView {
    pub horizontal_deg: f64,
    pub vertical_deg: f64,
}

impl FieldOfView {
    pub fn new(horizontal_deg: f64, vertical_deg: f64) -> Self {
        Self {
            horizontal_deg,
            vertical_deg,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (name, v) in [
            ("horizontal", self.horizontal_deg),
            ("vertical", self.vertical_deg),
        ] {
            if !(v > 0.0 && v < 180.0) {
                return Err(GeometryError::InvalidFov(format!(
                    "{name} angle {v} deg outside (0, 180)"
                )));
            }
        }
        Ok(())
    }
}

/// Common output grid for registered pairs; 512x512 in the standard
/// preprocessing profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisteredGrid {
    pub width: usize,
    pub height: usize,
    /// Source frame identifiers, when tracked.
    pub provenance: Option<String>,
}

impl RegisteredGrid {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            provenance: None,
        }
    }

    pub fn standard() -> Self {
        Self::new(512, 512)
    }
}

/// Bilinear sample at fractional index coordinates (pixel centers at
/// integer indices). Returns `None` when the position is off the sensor
/// or any contributing source pixel is invalid.
pub(crate) fn sample_bilinear(
    values: &Array2<f32>,
    mask: Option<&Mask>,
    sx: f64,
    sy: f64,
) -> Option<f32> {
    let (h, w) = values.dim();
    if sx < -0.5 || sy < -0.5 || sx > w as f64 - 0.5 || sy > h as f64 - 0.5 {
        return None;
    }
    let cx = sx.clamp(0.0, w as f64 - 1.0);
    let cy = sy.clamp(0.0, h as f64 - 1.0);
    let x0 = cx.floor() as usize;
    let y0 = cy.floor() as usize;
    let fx = (cx - x0 as f64) as f32;
    let fy = (cy - y0 as f64) as f32;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);

    if let Some(m) = mask {
        // A target sample is invalid if any contributing source is.
        if !m[[y0, x0]]
            || (fx > 0.0 && !m[[y0, x1]])
            || (fy > 0.0 && !m[[y1, x0]])
            || (fx > 0.0 && fy > 0.0 && !m[[y1, x1]])
        {
            return None;
        }
    }

    // Lerp form keeps constants exact and identity samples bitwise.
    let top = values[[y0, x0]] + fx * (values[[y0, x1]] - values[[y0, x0]]);
    let bot = values[[y1, x0]] + fx * (values[[y1, x1]] - values[[y1, x0]]);
    Some(top + fy * (bot - top))
}

/// Bilinear resample of a masked plane to the target grid.
pub fn resample_plane(
    values: &Array2<f32>,
    mask: Option<&Mask>,
    target: &RegisteredGrid,
) -> Result<(Array2<f32>, Mask), GeometryError> {
    let (h, w) = values.dim();
    if h == 0 || w == 0 || target.width == 0 || target.height == 0 {
        return Err(GeometryError::EmptyFrame);
    }
    if (w, h) == (target.width, target.height) {
        let out_mask = mask
            .cloned()
            .unwrap_or_else(|| Array2::from_elem((h, w), true));
        return Ok((values.clone(), out_mask));
    }
    let (oh, ow) = (target.height, target.width);
    let sx_scale = w as f64 / ow as f64;
    let sy_scale = h as f64 / oh as f64;
    let mut out = Array2::zeros((oh, ow));
    let mut out_mask = Array2::from_elem((oh, ow), false);
    for y in 0..oh {
        let sy = ((y as f64 + 0.5) * sy_scale - 0.5).clamp(0.0, h as f64 - 1.0);
        for x in 0..ow {
            let sx = ((x as f64 + 0.5) * sx_scale - 0.5).clamp(0.0, w as f64 - 1.0);
            if let Some(v) = sample_bilinear(values, mask, sx, sy) {
                out[[y, x]] = v;
                out_mask[[y, x]] = true;
            }
        }
    }
    Ok((out, out_mask))
}

pub fn resample_thermal(
    frame: &ThermalFrame,
    target: &RegisteredGrid,
) -> Result<ThermalFrame, GeometryError> {
    let (temps, validity) = resample_plane(&frame.temps, Some(&frame.validity), target)?;
    Ok(ThermalFrame {
        temps,
        validity,
        t_out: frame.t_out,
        condition: frame.condition.clone(),
    })
}

pub fn resample_color(
    frame: &ColorFrame,
    target: &RegisteredGrid,
) -> Result<ColorFrame, GeometryError> {
    let (h, w) = (frame.height(), frame.width());
    if h == 0 || w == 0 {
        return Err(GeometryError::EmptyFrame);
    }
    if (w, h) == (target.width, target.height) {
        return Ok(frame.clone());
    }
    let mut out = ndarray::Array3::zeros((target.height, target.width, 3));
    for c in 0..3 {
        let plane = frame.data.index_axis(ndarray::Axis(2), c).mapv(|v| v as f32);
        let (res, _) = resample_plane(&plane, None, target)?;
        for ((y, x), &v) in res.indexed_iter() {
            out[[y, x, c]] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(ColorFrame::new(out))
}

/// Central crop of the RGB frame subtending the thermal field of view,
/// from the pinhole relation `crop_extent = extent * tan(fov_th/2) / tan(fov_rgb/2)`,
/// plus an optional pixel offset absorbing camera-mounting parallax.
pub fn crop_to_thermal_fov(
    rgb: &ColorFrame,
    rgb_fov: &FieldOfView,
    thermal_fov: &FieldOfView,
    offset: (i32, i32),
) -> Result<ColorFrame, GeometryError> {
    rgb_fov.validate()?;
    thermal_fov.validate()?;
    if thermal_fov.horizontal_deg > rgb_fov.horizontal_deg
        || thermal_fov.vertical_deg > rgb_fov.vertical_deg
    {
        return Err(GeometryError::FovNotContained {
            th_h: thermal_fov.horizontal_deg,
            th_v: thermal_fov.vertical_deg,
            rgb_h: rgb_fov.horizontal_deg,
            rgb_v: rgb_fov.vertical_deg,
        });
    }
    let (h, w) = (rgb.height(), rgb.width());
    if h == 0 || w == 0 {
        return Err(GeometryError::EmptyFrame);
    }
    let ratio = |th: f64, rgb: f64| (th.to_radians() / 2.0).tan() / (rgb.to_radians() / 2.0).tan();
    let cw = ((w as f64) * ratio(thermal_fov.horizontal_deg, rgb_fov.horizontal_deg)).round()
        as usize;
    let ch =
        ((h as f64) * ratio(thermal_fov.vertical_deg, rgb_fov.vertical_deg)).round() as usize;
    let cw = cw.clamp(1, w);
    let ch = ch.clamp(1, h);
    let x0 = (w - cw) as i64 / 2 + offset.0 as i64;
    let y0 = (h - ch) as i64 / 2 + offset.1 as i64;
    if x0 < 0 || y0 < 0 || x0 + cw as i64 > w as i64 || y0 + ch as i64 > h as i64 {
        return Err(GeometryError::OffsetOutOfBounds {
            dx: offset.0,
            dy: offset.1,
        });
    }
    let (x0, y0) = (x0 as usize, y0 as usize);
    let mut out = ndarray::Array3::zeros((ch, cw, 3));
    for y in 0..ch {
        for x in 0..cw {
            for c in 0..3 {
                out[[y, x, c]] = rgb.data[[y0 + y, x0 + x, c]];
            }
        }
    }
    Ok(ColorFrame::new(out))
}
