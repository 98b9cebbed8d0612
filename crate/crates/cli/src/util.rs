//! Shared command plumbing: resolved-config snapshots, 1-bit mask and
//! 16-bit deviation-map files, pair path parsing.

use serde::Serialize;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use c2t_core::anomaly::AnomalyMap;
use ndarray::Array2;

/// Deviation-map PNG scaling: stored = (E - E_LO) / (E_HI - E_LO) * 65535.
pub const EMAP_LO_C: f32 = -15.5;
pub const EMAP_HI_C: f32 = 15.5;

/// Write the resolved settings of a run next to its outputs. Directory
/// outputs get `run-config.toml` inside; file outputs get a sibling
/// `<name>.run-config.toml`.
pub fn write_snapshot<S: Serialize>(out: &Path, is_dir: bool, snapshot: &S) -> Result<(), CliError> {
    let path = snapshot_path(out, is_dir);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(CliError::io)?;
    }
    let text = toml::to_string_pretty(snapshot).map_err(CliError::io)?;
    std::fs::write(&path, text).map_err(CliError::io)
}

pub fn snapshot_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("run-config.toml")
    } else {
        let name = out
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        out.with_file_name(format!("{name}.run-config.toml"))
    }
}

/// Split `data/winter4_0003` into (`data`, `winter4_0003`).
pub fn parse_pair_ref(pair: &Path) -> Result<(PathBuf, String), CliError> {
    let scene = pair
        .file_name()
        .ok_or_else(|| CliError::config(format!("bad pair reference {}", pair.display())))?
        .to_string_lossy()
        .into_owned();
    let dir = pair.parent().unwrap_or_else(|| Path::new("."));
    Ok((dir.to_path_buf(), scene))
}

/// 1-bit PNG for binary masks.
pub fn write_mask_1bit(mask: &Array2<bool>, path: &Path) -> Result<(), CliError> {
    let (h, w) = mask.dim();
    let file = std::fs::File::create(path).map_err(CliError::io)?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), w as u32, h as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::One);
    let mut writer = enc.write_header().map_err(CliError::io)?;
    let row_bytes = w.div_ceil(8);
    let mut data = vec![0u8; row_bytes * h];
    for y in 0..h {
        for x in 0..w {
            if mask[[y, x]] {
                data[y * row_bytes + x / 8] |= 0x80 >> (x % 8);
            }
        }
    }
    writer.write_image_data(&data).map_err(CliError::io)?;
    Ok(())
}

#[derive(Serialize)]
struct EmapSidecar {
    format: &'static str,
    e_lo_c: f32,
    e_hi_c: f32,
    formula: &'static str,
}

/// 16-bit PNG of the deviation map with a fixed affine °C scaling,
/// documented in a sidecar next to it.
pub fn write_emap_16bit(map: &AnomalyMap, path: &Path) -> Result<(), CliError> {
    let (h, w) = map.values.dim();
    let mut img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(w as u32, h as u32);
    let span = EMAP_HI_C - EMAP_LO_C;
    for ((y, x), &v) in map.values.indexed_iter() {
        let stored = if map.validity[[y, x]] {
            (((v - EMAP_LO_C) / span) * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        img.put_pixel(x as u32, y as u32, image::Luma([stored]));
    }
    img.save(path).map_err(CliError::io)?;
    let sidecar = EmapSidecar {
        format: "grayscale16",
        e_lo_c: EMAP_LO_C,
        e_hi_c: EMAP_HI_C,
        formula: "E_c = e_lo_c + stored / 65535 * (e_hi_c - e_lo_c)",
    };
    let meta = path.with_extension("json");
    std::fs::write(
        meta,
        serde_json::to_string_pretty(&sidecar).map_err(CliError::io)?,
    )
    .map_err(CliError::io)
}

pub fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
