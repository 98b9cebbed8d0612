//! `c2t evaluate` — run a model over a catalog split: per-image mean
//! absolute deviation, histogram, anomaly regions, detection scores when
//! ground truth masks are present, and a self-contained HTML report plus
//! machine-readable metrics.

use clap::Args as ClapArgs;
use serde::Serialize;
use std::path::PathBuf;

use crate::commands::detect::DEFAULT_MIN_AREA;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::util::{now_unix, write_snapshot};
use c2t_core::anomaly::{
    anomaly_map, render_overlay, summarize_regions, threshold, AnomalyError, Region,
};
use c2t_core::dataset::{DatasetCatalog, Split};
use c2t_core::evaluation::{
    detection_counts, deviation_histogram, render_report, DetectionCounts, DetectionScore,
    DeviationStats, ReportData, WorstImage, DEFAULT_BIN_WIDTH_C,
};
use c2t_core::model::{load_checkpoint, predict};
use c2t_core::synth::{read_truth_mask, truth_path};

#[derive(ClapArgs)]
pub struct Args {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    /// Which catalog split to evaluate.
    #[arg(long, default_value = "eval")]
    split: String,
    #[arg(long)]
    tolerance: Option<f32>,
    #[arg(long)]
    f: Option<String>,
    /// Histogram bin width, °C.
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH_C)]
    bin_width: f32,
    /// Number of largest-deviation images embedded in the report.
    #[arg(long, default_value_t = 5)]
    worst: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_AREA)]
    min_area: usize,
    /// Output report directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Metrics<'a> {
    model: String,
    condition: &'a str,
    split: &'a str,
    tolerance_c: f32,
    stats: &'a DeviationStats,
    detection: &'a Option<DetectionScore>,
    regions: &'a Vec<(String, Vec<Region>)>,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    command: &'static str,
    model: &'a PathBuf,
    catalog: &'a PathBuf,
    split: &'a str,
    tolerance_c: f32,
    f: String,
    bin_width: f32,
    worst: usize,
    min_area: usize,
}

pub fn run(cfg: &RunConfig, args: Args) -> Result<(), CliError> {
    let tolerance = args.tolerance.unwrap_or(cfg.tolerance_c);
    let f = cfg.residual(args.f.as_deref())?;
    let split = match args.split.as_str() {
        "train" => Split::Train,
        "eval" => Split::Eval,
        other => return Err(CliError::config(format!("unknown split '{other}'"))),
    };
    let ckpt = load_checkpoint(&args.model)?;
    let catalog = DatasetCatalog::load(&args.catalog)?;
    let ids = catalog.scene_ids(split);
    if ids.is_empty() {
        return Err(CliError::config(format!("split {} is empty", args.split)));
    }

    let mut per_image = Vec::new();
    let mut regions_by_scene = Vec::new();
    let mut detect_counts: Option<DetectionCounts> = None;
    let mut overlays = Vec::new();
    for id in &ids {
        let pair = catalog.load_pair(id)?;
        if !ckpt.encoding.grid_matches(&pair.thermal.params) {
            return Err(AnomalyError::EncodingMismatch.into());
        }
        let predicted = predict(&ckpt.generator, &pair.rgb, &pair.thermal.params)?;
        let mad = c2t_core::evaluation::mean_abs_deviation(&pair.thermal, &predicted)?;
        per_image.push((id.to_string(), mad));

        let map = anomaly_map(&pair.thermal, &predicted, f)?;
        let mask = threshold(&map, tolerance);
        let regions = summarize_regions(&mask, &map, args.min_area);
        if !regions.is_empty() {
            regions_by_scene.push((id.to_string(), regions));
        }

        let tp = truth_path(&catalog.pair_dir, id);
        if tp.exists() {
            let truth = read_truth_mask(&tp)?;
            let counts = detection_counts(&mask.values, &truth, Some(&map.validity))?;
            detect_counts.get_or_insert_with(DetectionCounts::default).merge(&counts);
        }

        overlays.push((id.to_string(), mad, render_overlay(&pair.rgb, &mask, &map)?));
    }

    let stats = deviation_histogram(&per_image, args.bin_width)?;
    let detection = detect_counts.map(|c| c.score());

    overlays.sort_by(|a, b| b.1.total_cmp(&a.1));
    let worst: Vec<WorstImage> = overlays
        .into_iter()
        .take(args.worst)
        .map(|(scene_id, deviation_c, overlay)| WorstImage {
            scene_id,
            deviation_c,
            overlay,
        })
        .collect();

    let out = cfg.resolve_out(&args.out);
    std::fs::create_dir_all(&out).map_err(CliError::io)?;
    let model_description = format!(
        "{} (trained {} epochs{})",
        ckpt.provenance.condition,
        ckpt.provenance.epochs,
        ckpt.provenance
            .fine_tuned_from
            .as_ref()
            .map(|s| format!(", fine-tuned from {s}"))
            .unwrap_or_default()
    );
    let report = render_report(
        &ReportData {
            title: format!("Evaluation: {} on {}", model_description, catalog.condition.name),
            model_description: model_description.clone(),
            condition: catalog.condition.name.clone(),
            tolerance_c: tolerance,
            stats: stats.clone(),
            detection,
            worst,
            regions: regions_by_scene.clone(),
        },
        now_unix(),
    );
    std::fs::write(out.join("report.html"), report).map_err(CliError::io)?;
    let metrics = Metrics {
        model: model_description,
        condition: &catalog.condition.name,
        split: &args.split,
        tolerance_c: tolerance,
        stats: &stats,
        detection: &detection,
        regions: &regions_by_scene,
    };
    std::fs::write(
        out.join("metrics.json"),
        serde_json::to_string_pretty(&metrics).map_err(CliError::io)?,
    )
    .map_err(CliError::io)?;

    write_snapshot(
        &out,
        true,
        &Snapshot {
            command: "evaluate",
            model: &args.model,
            catalog: &args.catalog,
            split: &args.split,
            tolerance_c: tolerance,
            f: format!("{f:?}").to_lowercase(),
            bin_width: args.bin_width,
            worst: args.worst,
            min_area: args.min_area,
        },
    )?;
    println!(
        "evaluated {} scenes: mean deviation {:.3} C (median {:.3}, max {:.3}) -> {}",
        stats.per_image.len(),
        stats.mean,
        stats.median,
        stats.max,
        out.display()
    );
    if let Some(score) = detection {
        let fmt =
            |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".into());
        println!(
            "detection vs truth: recall {}, precision {}, iou {}",
            fmt(score.pixel_recall),
            fmt(score.pixel_precision),
            fmt(score.iou)
        );
    }
    Ok(())
}
