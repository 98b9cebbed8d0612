//! `c2t synth` — generate synthetic facade pairs with ground truth masks
//! in the standard pair directory layout.

use clap::Args as ClapArgs;
use serde::Serialize;
use std::path::PathBuf;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::util::write_snapshot;
use c2t_core::synth::{generate_set, AnomalyKind, AnomalyPlan, GenerateSpec, SynthCondition};

#[derive(ClapArgs)]
pub struct Args {
    /// Number of scenes.
    #[arg(long)]
    n: usize,
    /// Condition preset: winter4, winter8 or summer.
    #[arg(long)]
    condition: String,
    /// Override the preset's outdoor temperature, °C.
    #[arg(long, allow_hyphen_values = true)]
    t_out: Option<f32>,
    /// Fraction of scenes with planted anomalies.
    #[arg(long, default_value_t = 0.0)]
    anomaly_rate: f64,
    /// Fixed anomaly delta in °C (default: drawn from +2..+4).
    #[arg(long)]
    anomaly_delta: Option<f32>,
    /// Fixed anomaly kind: bridge or basement (default: mixed).
    #[arg(long)]
    anomaly_kind: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Scene side length in pixels.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    command: &'static str,
    n: usize,
    condition: &'a str,
    t_out: f32,
    anomaly_rate: f64,
    anomaly_delta: Option<f32>,
    anomaly_kind: Option<&'a str>,
    seed: u64,
    size: usize,
}

pub fn run(cfg: &RunConfig, args: Args) -> Result<(), CliError> {
    let mut condition = SynthCondition::by_name(&args.condition).ok_or_else(|| {
        CliError::config(format!(
            "unknown condition '{}' (expected winter4, winter8 or summer)",
            args.condition
        ))
    })?;
    if let Some(t) = args.t_out {
        condition = condition.with_t_out(t);
    }
    let kind = match args.anomaly_kind.as_deref() {
        None => None,
        Some("bridge") => Some(AnomalyKind::ThermalBridge),
        Some("basement") => Some(AnomalyKind::HotBasement),
        Some(other) => {
            return Err(CliError::config(format!(
                "unknown anomaly kind '{other}' (expected bridge or basement)"
            )))
        }
    };
    let seed = args.seed.unwrap_or(cfg.seed);
    let size = args.size.unwrap_or(cfg.size);
    let spec = GenerateSpec {
        n: args.n,
        condition: condition.clone(),
        anomaly_rate: args.anomaly_rate,
        anomaly: AnomalyPlan {
            delta_c: args.anomaly_delta,
            kind,
        },
        size,
        seed,
    };
    let out = cfg.resolve_out(&args.out);
    let ids = generate_set(&out, &spec)?;
    write_snapshot(
        &out,
        true,
        &Snapshot {
            command: "synth",
            n: args.n,
            condition: &condition.tag.name,
            t_out: condition.tag.t_out,
            anomaly_rate: args.anomaly_rate,
            anomaly_delta: args.anomaly_delta,
            anomaly_kind: args.anomaly_kind.as_deref(),
            seed,
            size,
        },
    )?;
    println!(
        "generated {} {} scenes at {}px (t_out {} C) -> {}",
        ids.len(),
        condition.tag.name,
        size,
        condition.tag.t_out,
        out.display()
    );
    Ok(())
}
