//! Thermal encoding: absolute temperatures become small non-negative
//! integer codes relative to the outdoor temperature.
//!
//! The encoding subtracts the outdoor reference, clamps the result to a
//! fixed dynamic range, quantizes to 0.5 °C steps, and shifts to the
//! non-negative integers, so every valid pixel is a code in `0..=30`.
//! Codes fit comfortably in 8-bit PNGs, which is how pairs are stored
//! on disk alongside a small sidecar holding the parameters needed to
//! invert the mapping.

use ndarray::Array2;
use std::fs;
use std::path::{Path, PathBuf};

use crate::frame::{full_mask, ColorFrame, Mask, ThermalFrame};

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("invalid encoding params: {0}")]
    InvalidParams(String),
    #[error("code {code} at pixel ({x}, {y}) outside 0..={max}")]
    CodeOutOfRange {
        code: u8,
        x: usize,
        y: usize,
        max: u8,
    },
    #[error("sidecar metadata not found: {0}")]
    MissingSidecar(PathBuf),
    #[error("io: {0}")]
    Io(String),
    #[error("bad pair file {path}: {reason}")]
    BadPairFile { path: PathBuf, reason: String },
}

impl CodecError {
    pub fn category(&self) -> &'static str {
        match self {
            CodecError::InvalidParams(_) => "codec/InvalidParams",
            CodecError::CodeOutOfRange { .. } => "codec/CodeOutOfRange",
            CodecError::MissingSidecar(_) => "codec/MissingSidecar",
            CodecError::Io(_) => "codec/IoError",
            CodecError::BadPairFile { .. } => "codec/BadPairFile",
        }
    }
}

/// Parameters of the relative-temperature quantization.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EncodingParams {
    /// Outdoor reference temperature in °C.
    pub t_out: f32,
    /// Lower end of the retained relative range, °C.
    pub range_lo: f32,
    /// Upper end of the retained relative range, °C.
    pub range_hi: f32,
    /// Quantization step, °C.
    pub step: f32,
}

impl EncodingParams {
    /// Standard range: [-5, +10] °C relative, 0.5 °C steps, codes 0..=30.
    pub fn for_outdoor(t_out: f32) -> Self {
        Self {
            t_out,
            range_lo: -5.0,
            range_hi: 10.0,
            step: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if !(self.t_out.is_finite() && self.range_lo.is_finite() && self.range_hi.is_finite()) {
            return Err(CodecError::InvalidParams("non-finite field".into()));
        }
        if self.range_lo >= self.range_hi {
            return Err(CodecError::InvalidParams(format!(
                "range_lo {} must be below range_hi {}",
                self.range_lo, self.range_hi
            )));
        }
        if !(self.step > 0.0) {
            return Err(CodecError::InvalidParams(format!(
                "step {} must be positive",
                self.step
            )));
        }
        let n = (self.range_hi - self.range_lo) as f64 / self.step as f64;
        if (n - n.round()).abs() > 1e-9 || n.round() < 1.0 || n.round() > 255.0 {
            return Err(CodecError::InvalidParams(format!(
                "(range_hi - range_lo)/step = {n} is not a small integer"
            )));
        }
        Ok(())
    }

    /// Largest code value; codes span `0..=max_code()`.
    pub fn max_code(&self) -> u8 {
        (((self.range_hi - self.range_lo) as f64 / self.step as f64).round()) as u8
    }

    /// Whether two parameter sets share the same quantization grid.
    /// `t_out` may differ: cross-condition evaluation compares frames
    /// that are each relative to their own outdoor temperature.
    pub fn grid_matches(&self, other: &Self) -> bool {
        self.range_lo == other.range_lo
            && self.range_hi == other.range_hi
            && self.step == other.step
    }
}

/// Quantized relative-temperature image plus everything needed to invert it.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedThermal {
    /// Integer codes, `(height, width)`, each in `0..=params.max_code()`.
    pub codes: Array2<u8>,
    pub params: EncodingParams,
    pub validity: Mask,
}

/// Encode an absolute-temperature frame.
///
/// Per pixel: Δ = t − t_out, clamped to [range_lo, range_hi], then
/// `code = round((Δ − range_lo)/step)` with ties rounding away from zero.
pub fn encode_thermal(
    frame: &ThermalFrame,
    params: &EncodingParams,
) -> Result<EncodedThermal, CodecError> {
    params.validate()?;
    let codes = frame.temps.mapv(|t| {
        let delta = (t - params.t_out).clamp(params.range_lo, params.range_hi);
        // f32::round already rounds half away from zero.
        ((delta - params.range_lo) / params.step).round() as u8
    });
    Ok(EncodedThermal {
        codes,
        params: *params,
        validity: frame.validity.clone(),
    })
}

impl EncodedThermal {
    pub fn height(&self) -> usize {
        self.codes.nrows()
    }

    pub fn width(&self) -> usize {
        self.codes.ncols()
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        self.params.validate()?;
        let max = self.params.max_code();
        for ((y, x), &c) in self.codes.indexed_iter() {
            if c > max {
                return Err(CodecError::CodeOutOfRange { code: c, x, y, max });
            }
        }
        Ok(())
    }

    /// Decode to relative temperature (°C above outdoors): Δ = range_lo + code·step.
    pub fn decode_relative(&self) -> Result<Array2<f32>, CodecError> {
        self.validate()?;
        Ok(self
            .codes
            .mapv(|c| self.params.range_lo + c as f32 * self.params.step))
    }

    /// Decode to an absolute-temperature frame using the stored `t_out`.
    pub fn decode_absolute(&self) -> Result<ThermalFrame, CodecError> {
        let rel = self.decode_relative()?;
        Ok(ThermalFrame {
            temps: rel.mapv(|d| d + self.params.t_out),
            validity: self.validity.clone(),
            t_out: self.params.t_out,
            condition: None,
        })
    }

    pub fn mirror_horizontal(&self) -> Self {
        let (h, w) = (self.height(), self.width());
        let mut codes = Array2::zeros((h, w));
        let mut validity = Array2::from_elem((h, w), true);
        for y in 0..h {
            for x in 0..w {
                codes[[y, x]] = self.codes[[y, w - 1 - x]];
                validity[[y, x]] = self.validity[[y, w - 1 - x]];
            }
        }
        Self {
            codes,
            params: self.params,
            validity,
        }
    }
}

/// A registered RGB/thermal pair, the unit of training and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub scene_id: String,
    pub rgb: ColorFrame,
    pub thermal: EncodedThermal,
    pub condition: Option<String>,
}

/// Sidecar metadata persisted next to each pair.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
struct PairMeta {
    scene_id: String,
    t_out: f32,
    range_lo: f32,
    range_hi: f32,
    step: f32,
    condition: Option<String>,
}

pub fn rgb_path(dir: &Path, scene_id: &str) -> PathBuf {
    dir.join(format!("{scene_id}_rgb.png"))
}

pub fn thermal_path(dir: &Path, scene_id: &str) -> PathBuf {
    dir.join(format!("{scene_id}_th.png"))
}

pub fn meta_path(dir: &Path, scene_id: &str) -> PathBuf {
    dir.join(format!("{scene_id}_meta.json"))
}

pub fn mask_path(dir: &Path, scene_id: &str) -> PathBuf {
    dir.join(format!("{scene_id}_mask.png"))
}

/// Write a pair as `<id>_rgb.png` + `<id>_th.png` + `<id>_meta.json`.
/// A `<id>_mask.png` is emitted only when some pixels are invalid.
pub fn write_pair(pair: &AlignedPair, dir: &Path) -> Result<(), CodecError> {
    pair.thermal.validate()?;
    fs::create_dir_all(dir).map_err(|e| CodecError::Io(format!("{}: {e}", dir.display())))?;

    pair.rgb.save_png(&rgb_path(dir, &pair.scene_id))?;

    let th = &pair.thermal;
    let (h, w) = (th.height(), th.width());
    let mut gray = image::GrayImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            gray.put_pixel(x as u32, y as u32, image::Luma([th.codes[[y, x]]]));
        }
    }
    let tp = thermal_path(dir, &pair.scene_id);
    gray.save(&tp)
        .map_err(|e| CodecError::Io(format!("{}: {e}", tp.display())))?;

    if !th.validity.iter().all(|&v| v) {
        let mut m = image::GrayImage::new(w as u32, h as u32);
        for y in 0..h {
            for x in 0..w {
                let v = if th.validity[[y, x]] { 255 } else { 0 };
                m.put_pixel(x as u32, y as u32, image::Luma([v]));
            }
        }
        let mp = mask_path(dir, &pair.scene_id);
        m.save(&mp)
            .map_err(|e| CodecError::Io(format!("{}: {e}", mp.display())))?;
    }

    let meta = PairMeta {
        scene_id: pair.scene_id.clone(),
        t_out: th.params.t_out,
        range_lo: th.params.range_lo,
        range_hi: th.params.range_hi,
        step: th.params.step,
        condition: pair.condition.clone(),
    };
    let mp = meta_path(dir, &pair.scene_id);
    let json = serde_json::to_string_pretty(&meta)
        .map_err(|e| CodecError::Io(format!("meta serialize: {e}")))?;
    fs::write(&mp, json).map_err(|e| CodecError::Io(format!("{}: {e}", mp.display())))?;
    Ok(())
}

/// Read a pair back; validates codes and dimensions.
pub fn read_pair(dir: &Path, scene_id: &str) -> Result<AlignedPair, CodecError> {
    let mp = meta_path(dir, scene_id);
    if !mp.exists() {
        return Err(CodecError::MissingSidecar(mp));
    }
    let meta: PairMeta = serde_json::from_str(
        &fs::read_to_string(&mp).map_err(|e| CodecError::Io(format!("{}: {e}", mp.display())))?,
    )
    .map_err(|e| CodecError::BadPairFile {
        path: mp.clone(),
        reason: e.to_string(),
    })?;
    let params = EncodingParams {
        t_out: meta.t_out,
        range_lo: meta.range_lo,
        range_hi: meta.range_hi,
        step: meta.step,
    };

    let rgb = ColorFrame::load_png(&rgb_path(dir, scene_id))?;

    let tp = thermal_path(dir, scene_id);
    let gray = image::open(&tp)
        .map_err(|e| CodecError::Io(format!("{}: {e}", tp.display())))?
        .into_luma8();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    if (rgb.height(), rgb.width()) != (h, w) {
        return Err(CodecError::BadPairFile {
            path: tp,
            reason: format!(
                "thermal {}x{} does not match rgb {}x{}",
                w,
                h,
                rgb.width(),
                rgb.height()
            ),
        });
    }
    let mut codes = Array2::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            codes[[y, x]] = gray.get_pixel(x as u32, y as u32).0[0];
        }
    }

    let maskp = mask_path(dir, scene_id);
    let validity = if maskp.exists() {
        let m = image::open(&maskp)
            .map_err(|e| CodecError::Io(format!("{}: {e}", maskp.display())))?
            .into_luma8();
        if (m.width() as usize, m.height() as usize) != (w, h) {
            return Err(CodecError::BadPairFile {
                path: maskp,
                reason: "mask dimensions differ from thermal".into(),
            });
        }
        Array2::from_shape_fn((h, w), |(y, x)| m.get_pixel(x as u32, y as u32).0[0] != 0)
    } else {
        full_mask(h, w)
    };

    let thermal = EncodedThermal {
        codes,
        params,
        validity,
    };
    thermal.validate()?;
    Ok(AlignedPair {
        scene_id: scene_id.to_string(),
        rgb,
        thermal,
        condition: meta.condition,
    })
}

/// Scene ids present in a directory, sorted, based on sidecar files.
pub fn list_scene_ids(dir: &Path) -> Result<Vec<String>, CodecError> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CodecError::Io(format!("{}: {e}", dir.display())))?
    {
        let entry = entry.map_err(|e| CodecError::Io(e.to_string()))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix("_meta.json") {
            ids.push(stem.to_string());
        }
    }
    ids.sort();
    Ok(ids)
}
