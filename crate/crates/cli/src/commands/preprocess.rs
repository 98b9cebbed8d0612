//! `c2t preprocess` — turn raw captures into aligned 8-bit pairs.
//!
//! Raw inputs: `<rgb-dir>/<id>.png` (8-bit RGB) and
//! `<thermal-dir>/<id>.png` (16-bit grayscale) with a `<id>.json` sidecar
//! `{ "t_min": <°C at 0>, "t_max": <°C at 65535>, "t_out": <°C>,
//! "condition": <optional> }`. Steps per scene: undistort the thermal
//! frame with the fitted model, crop the RGB to the thermal field of
//! view (plus the manual alignment offset), resample both to the target
//! grid, encode, and write the pair files.

use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::PathBuf;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::util::write_snapshot;
use c2t_core::codec::{encode_thermal, write_pair, AlignedPair, EncodingParams};
use c2t_core::frame::{ColorFrame, ThermalFrame};
use c2t_core::geometry::{
    crop_to_thermal_fov, resample_color, resample_thermal, undistort, FieldOfView,
    RadialDistortionModel, RegisteredGrid,
};
use ndarray::Array2;

#[derive(ClapArgs)]
pub struct Args {
    #[arg(long)]
    rgb_dir: PathBuf,
    #[arg(long)]
    thermal_dir: PathBuf,
    /// Fitted distortion model file from `calibrate`.
    #[arg(long)]
    model: PathBuf,
    /// Manual RGB/thermal alignment offset in pixels, `dx,dy`.
    #[arg(long, default_value = "0,0")]
    offset: String,
    /// Override the sidecars' outdoor temperature, °C.
    #[arg(long)]
    t_out: Option<f32>,
    /// Condition label stored with the pairs.
    #[arg(long)]
    condition: Option<String>,
    /// RGB field of view, `H x V` degrees.
    #[arg(long, default_value = "110x70")]
    rgb_fov: String,
    /// Thermal field of view, `H x V` degrees.
    #[arg(long, default_value = "56x42")]
    thermal_fov: String,
    /// Output grid side length; overrides the configured size.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Deserialize)]
struct RawThermalMeta {
    t_min: f32,
    t_max: f32,
    t_out: f32,
    condition: Option<String>,
}

#[derive(Serialize)]
struct Snapshot {
    command: &'static str,
    rgb_dir: PathBuf,
    thermal_dir: PathBuf,
    model: PathBuf,
    offset: (i32, i32),
    rgb_fov: (f64, f64),
    thermal_fov: (f64, f64),
    size: usize,
    scenes: usize,
}

fn parse_fov(s: &str) -> Result<FieldOfView, CliError> {
    let (h, v) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| CliError::config(format!("bad fov '{s}', expected HxV")))?;
    Ok(FieldOfView::new(
        h.trim().parse().map_err(|e| CliError::config(format!("fov: {e}")))?,
        v.trim().parse().map_err(|e| CliError::config(format!("fov: {e}")))?,
    ))
}

fn parse_offset(s: &str) -> Result<(i32, i32), CliError> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| CliError::config(format!("bad offset '{s}', expected dx,dy")))?;
    Ok((
        x.trim().parse().map_err(|e| CliError::config(format!("offset: {e}")))?,
        y.trim().parse().map_err(|e| CliError::config(format!("offset: {e}")))?,
    ))
}

fn scene_ids(dir: &PathBuf) -> Result<BTreeSet<String>, CliError> {
    let mut out = BTreeSet::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))? {
        let name = entry.map_err(CliError::io)?.file_name();
        if let Some(stem) = name.to_string_lossy().strip_suffix(".png") {
            out.insert(stem.to_string());
        }
    }
    Ok(out)
}

pub fn run(cfg: &RunConfig, args: Args) -> Result<(), CliError> {
    let model = RadialDistortionModel::load(&args.model)?;
    let rgb_fov = parse_fov(&args.rgb_fov)?;
    let thermal_fov = parse_fov(&args.thermal_fov)?;
    let offset = parse_offset(&args.offset)?;
    let size = args.size.unwrap_or(cfg.size);
    let grid = RegisteredGrid::new(size, size);

    let rgb_ids = scene_ids(&args.rgb_dir)?;
    let thermal_ids = scene_ids(&args.thermal_dir)?;
    let shared: Vec<&String> = rgb_ids.intersection(&thermal_ids).collect();
    if shared.is_empty() {
        return Err(CliError::config(format!(
            "no scene present in both {} and {}",
            args.rgb_dir.display(),
            args.thermal_dir.display()
        )));
    }
    for orphan in rgb_ids.symmetric_difference(&thermal_ids) {
        eprintln!("preprocess: skipping {orphan} (missing companion)");
    }

    let out = cfg.resolve_out(&args.out);
    std::fs::create_dir_all(&out).map_err(CliError::io)?;
    for id in &shared {
        let rgb = ColorFrame::load_png(&args.rgb_dir.join(format!("{id}.png")))?;

        let meta_path = args.thermal_dir.join(format!("{id}.json"));
        let meta: RawThermalMeta = serde_json::from_str(
            &std::fs::read_to_string(&meta_path)
                .map_err(|e| CliError::io(format!("{}: {e}", meta_path.display())))?,
        )
        .map_err(|e| CliError::config(format!("{}: {e}", meta_path.display())))?;

        let th_png = args.thermal_dir.join(format!("{id}.png"));
        let raw = image::open(&th_png)
            .map_err(|e| CliError::io(format!("{}: {e}", th_png.display())))?
            .into_luma16();
        let (w, h) = (raw.width() as usize, raw.height() as usize);
        let span = meta.t_max - meta.t_min;
        let temps = Array2::from_shape_fn((h, w), |(y, x)| {
            meta.t_min + raw.get_pixel(x as u32, y as u32).0[0] as f32 / 65535.0 * span
        });
        let t_out = args.t_out.unwrap_or(meta.t_out);
        let mut thermal = ThermalFrame::new(temps, t_out);
        thermal.condition = args.condition.clone().or(meta.condition);

        let undistorted = undistort(&thermal, &model)?;
        let thermal_512 = resample_thermal(&undistorted, &grid)?;
        let cropped = crop_to_thermal_fov(&rgb, &rgb_fov, &thermal_fov, offset)?;
        let rgb_512 = resample_color(&cropped, &grid)?;

        let encoded = encode_thermal(&thermal_512, &EncodingParams::for_outdoor(t_out))?;
        write_pair(
            &AlignedPair {
                scene_id: (*id).clone(),
                rgb: rgb_512,
                condition: thermal_512.condition.clone(),
                thermal: encoded,
            },
            &out,
        )?;
    }

    write_snapshot(
        &out,
        true,
        &Snapshot {
            command: "preprocess",
            rgb_dir: args.rgb_dir.clone(),
            thermal_dir: args.thermal_dir.clone(),
            model: args.model.clone(),
            offset,
            rgb_fov: (rgb_fov.horizontal_deg, rgb_fov.vertical_deg),
            thermal_fov: (thermal_fov.horizontal_deg, thermal_fov.vertical_deg),
            size,
            scenes: shared.len(),
        },
    )?;
    println!("preprocessed {} scenes -> {}", shared.len(), out.display());
    Ok(())
}
