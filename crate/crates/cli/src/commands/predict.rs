//! `c2t predict` — run the translator on one preprocessed RGB frame and
//! write the predicted thermal code image plus its encoding sidecar.

use clap::Args as ClapArgs;
use serde::Serialize;
use std::path::PathBuf;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::util::write_snapshot;
use c2t_core::frame::ColorFrame;
use c2t_core::model::{load_checkpoint, predict};

#[derive(ClapArgs)]
pub struct Args {
    #[arg(long)]
    model: PathBuf,
    /// Preprocessed RGB frame at the model's resolution.
    #[arg(long)]
    rgb: PathBuf,
    /// Override the outdoor reference recorded in the checkpoint, °C.
    #[arg(long, allow_hyphen_values = true)]
    t_out: Option<f32>,
    /// Output PNG path; an encoding sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    command: &'static str,
    model: &'a PathBuf,
    rgb: &'a PathBuf,
    t_out: f32,
}

pub fn run(cfg: &RunConfig, args: Args) -> Result<(), CliError> {
    let ckpt = load_checkpoint(&args.model)?;
    let rgb = ColorFrame::load_png(&args.rgb)?;
    let mut params = ckpt.encoding;
    if let Some(t) = args.t_out {
        params.t_out = t;
    }
    let encoded = predict(&ckpt.generator, &rgb, &params)?;

    let out = cfg.resolve_out(&args.out);
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent).map_err(CliError::io)?;
    }
    let (h, w) = (encoded.height(), encoded.width());
    let mut img = image::GrayImage::new(w as u32, h as u32);
    for ((y, x), &c) in encoded.codes.indexed_iter() {
        img.put_pixel(x as u32, y as u32, image::Luma([c]));
    }
    img.save(&out).map_err(CliError::io)?;
    let sidecar = out.with_extension("json");
    std::fs::write(
        &sidecar,
        serde_json::to_string_pretty(&params).map_err(CliError::io)?,
    )
    .map_err(CliError::io)?;
    write_snapshot(
        &out,
        false,
        &Snapshot {
            command: "predict",
            model: &args.model,
            rgb: &args.rgb,
            t_out: params.t_out,
        },
    )?;
    println!(
        "predicted {}x{} thermal codes (condition {}) -> {}",
        w,
        h,
        ckpt.provenance.condition,
        out.display()
    );
    Ok(())
}
