//! `c2t calibrate` — fit the radial distortion model from a
//! correspondences file and persist it for `preprocess`.
//!
//! File format: comment lines start with `#`; the first data line holds
//! the sensor dimensions `width height`; every following line is one
//! correspondence `distorted_x distorted_y undistorted_x undistorted_y`.

use clap::Args as ClapArgs;
use serde::Serialize;
use std::path::PathBuf;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::util::write_snapshot;
use c2t_core::geometry::fit_distortion;

#[derive(ClapArgs)]
pub struct Args {
    /// Correspondences file (see format note in the command help).
    #[arg(long)]
    correspondences: PathBuf,
    /// Output model file (TOML).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    command: &'static str,
    correspondences: &'a PathBuf,
    out: &'a PathBuf,
    points: usize,
    sensor_width: usize,
    sensor_height: usize,
}

pub fn run(cfg: &RunConfig, args: Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.correspondences)
        .map_err(|e| CliError::io(format!("{}: {e}", args.correspondences.display())))?;
    let mut dims: Option<(usize, usize)> = None;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::config(format!("line {}: {e}", lineno + 1)))?;
        match (dims, fields.len()) {
            (None, 2) => dims = Some((fields[0] as usize, fields[1] as usize)),
            (Some(_), 4) => points.push(((fields[0], fields[1]), (fields[2], fields[3]))),
            _ => {
                return Err(CliError::config(format!(
                    "line {}: expected {} fields",
                    lineno + 1,
                    if dims.is_none() { 2 } else { 4 }
                )))
            }
        }
    }
    let (w, h) =
        dims.ok_or_else(|| CliError::config("missing sensor dimensions header line"))?;

    let report = fit_distortion(&points, w, h)?;
    let out = cfg.resolve_out(&args.out);
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent).map_err(CliError::io)?;
    }
    report.model.save(&out)?;
    write_snapshot(
        &out,
        false,
        &Snapshot {
            command: "calibrate",
            correspondences: &args.correspondences,
            out: &args.out,
            points: points.len(),
            sensor_width: w,
            sensor_height: h,
        },
    )?;
    println!(
        "fitted k1={:.6} k2={:.6} center=({:.4}, {:.4}) rms={:.6}px over {} points -> {}",
        report.model.k1,
        report.model.k2,
        report.model.center_x,
        report.model.center_y,
        report.residual_rms_px,
        points.len(),
        out.display()
    );
    Ok(())
}
