//! Core image containers: RGB frames, absolute-temperature thermal frames,
//! and per-pixel validity masks.

use ndarray::{Array2, Array3};
use std::path::Path;

use crate::codec::CodecError;

/// Per-pixel validity mask. `true` means the pixel carries usable data.
pub type Mask = Array2<bool>;

/// Build an all-valid mask for the given dimensions.
pub fn full_mask(height: usize, width: usize) -> Mask {
    Array2::from_elem((height, width), true)
}

/// An 8-bit RGB image stored as `(height, width, 3)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorFrame {
    pub data: Array3<u8>,
}

impl ColorFrame {
    pub fn new(data: Array3<u8>) -> Self {
        assert_eq!(data.shape()[2], 3, "ColorFrame expects 3 channels");
        Self { data }
    }

    /// Solid-color frame, mostly useful in tests and synthetic scenes.
    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        let mut data = Array3::zeros((height, width, 3));
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data[[y, x, c]] = rgb[c];
                }
            }
        }
        Self { data }
    }

    pub fn height(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[1]
    }

    /// Flip about the vertical axis: pixel (x, y) -> (W-1-x, y).
    pub fn mirror_horizontal(&self) -> Self {
        let (h, w) = (self.height(), self.width());
        let mut out = Array3::zeros((h, w, 3));
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    out[[y, x, c]] = self.data[[y, w - 1 - x, c]];
                }
            }
        }
        Self { data: out }
    }

    pub fn to_image(&self) -> image::RgbImage {
        let (h, w) = (self.height(), self.width());
        let mut img = image::RgbImage::new(w as u32, h as u32);
        for y in 0..h {
            for x in 0..w {
                img.put_pixel(
                    x as u32,
                    y as u32,
                    image::Rgb([
                        self.data[[y, x, 0]],
                        self.data[[y, x, 1]],
                        self.data[[y, x, 2]],
                    ]),
                );
            }
        }
        img
    }

    pub fn from_image(img: &image::RgbImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut data = Array3::zeros((h, w, 3));
        for y in 0..h {
            for x in 0..w {
                let p = img.get_pixel(x as u32, y as u32);
                for c in 0..3 {
                    data[[y, x, c]] = p.0[c];
                }
            }
        }
        Self { data }
    }

    pub fn save_png(&self, path: &Path) -> Result<(), CodecError> {
        self.to_image()
            .save(path)
            .map_err(|e| CodecError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load_png(path: &Path) -> Result<Self, CodecError> {
        let img = image::open(path)
            .map_err(|e| CodecError::Io(format!("{}: {e}", path.display())))?
            .into_rgb8();
        Ok(Self::from_image(&img))
    }
}

/// Absolute per-pixel temperature field in degrees Celsius, plus the
/// acquisition metadata needed to encode it.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalFrame {
    /// Absolute temperature in °C, `(height, width)`.
    pub temps: Array2<f32>,
    pub validity: Mask,
    /// Outdoor reference temperature at acquisition time, °C.
    pub t_out: f32,
    /// Acquisition condition label, when known.
    pub condition: Option<String>,
}

impl ThermalFrame {
    pub fn new(temps: Array2<f32>, t_out: f32) -> Self {
        let validity = full_mask(temps.nrows(), temps.ncols());
        Self {
            temps,
            validity,
            t_out,
            condition: None,
        }
    }

    pub fn with_validity(mut self, validity: Mask) -> Self {
        assert_eq!(self.temps.dim(), validity.dim());
        self.validity = validity;
        self
    }

    pub fn height(&self) -> usize {
        self.temps.nrows()
    }

    pub fn width(&self) -> usize {
        self.temps.ncols()
    }
}

/// Axis-aligned pixel rectangle, half-open on neither side: covers
/// `x..x+w` by `y..y+h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn fits_within(&self, width: usize, height: usize) -> bool {
        self.x + self.w <= width && self.y + self.h <= height
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.x + other.w
            && other.x < self.x + self.w
            && self.y < other.y + other.h
            && other.y < self.y + self.h
    }
}
