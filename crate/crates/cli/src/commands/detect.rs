//! `c2t detect` — anomaly detection on one measured pair: deviation map
//! (16-bit PNG + scaling sidecar), binary mask (1-bit PNG), region report
//! (JSON), and a tinted overlay.

use clap::Args as ClapArgs;
use serde::Serialize;
use std::path::PathBuf;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::util::{parse_pair_ref, write_emap_16bit, write_mask_1bit, write_snapshot};
use c2t_core::anomaly::{anomaly_map, render_overlay, summarize_regions, threshold, AnomalyError};
use c2t_core::codec::read_pair;
use c2t_core::model::{load_checkpoint, predict};

pub const DEFAULT_MIN_AREA: usize = 20;

#[derive(ClapArgs)]
pub struct Args {
    #[arg(long)]
    model: PathBuf,
    /// Pair reference `<dir>/<scene_id>`.
    #[arg(long)]
    pair: PathBuf,
    /// Tolerance T in °C; pixels with E > T are flagged.
    #[arg(long)]
    tolerance: Option<f32>,
    /// Residual transform: identity (hot anomalies) or absolute.
    #[arg(long)]
    f: Option<String>,
    /// Smallest reported region area, px.
    #[arg(long, default_value_t = DEFAULT_MIN_AREA)]
    min_area: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    command: &'static str,
    model: &'a PathBuf,
    pair: &'a PathBuf,
    tolerance_c: f32,
    f: String,
    min_area: usize,
}

pub fn run(cfg: &RunConfig, args: Args) -> Result<(), CliError> {
    let tolerance = args.tolerance.unwrap_or(cfg.tolerance_c);
    let f = cfg.residual(args.f.as_deref())?;
    let ckpt = load_checkpoint(&args.model)?;
    let (dir, scene_id) = parse_pair_ref(&args.pair)?;
    let pair = read_pair(&dir, &scene_id)?;
    if !ckpt.encoding.grid_matches(&pair.thermal.params) {
        return Err(AnomalyError::EncodingMismatch.into());
    }

    let predicted = predict(&ckpt.generator, &pair.rgb, &pair.thermal.params)?;
    let map = anomaly_map(&pair.thermal, &predicted, f)?;
    let mask = threshold(&map, tolerance);
    let regions = summarize_regions(&mask, &map, args.min_area);
    let overlay = render_overlay(&pair.rgb, &mask, &map)?;

    let out = cfg.resolve_out(&args.out);
    std::fs::create_dir_all(&out).map_err(CliError::io)?;
    write_emap_16bit(&map, &out.join(format!("{scene_id}_emap.png")))?;
    write_mask_1bit(&mask.values, &out.join(format!("{scene_id}_mask.png")))?;
    std::fs::write(
        out.join(format!("{scene_id}_regions.json")),
        serde_json::to_string_pretty(&regions).map_err(CliError::io)?,
    )
    .map_err(CliError::io)?;
    overlay.save_png(&out.join(format!("{scene_id}_overlay.png")))?;

    write_snapshot(
        &out,
        true,
        &Snapshot {
            command: "detect",
            model: &args.model,
            pair: &args.pair,
            tolerance_c: tolerance,
            f: format!("{f:?}").to_lowercase(),
            min_area: args.min_area,
        },
    )?;
    let flagged = mask.values.iter().filter(|&&v| v).count();
    println!(
        "{scene_id}: {flagged} px above {tolerance} C, {} regions >= {} px -> {}",
        regions.len(),
        args.min_area,
        out.display()
    );
    Ok(())
}
