//! `c2t split` — build and persist a train/eval catalog.

use clap::Args as ClapArgs;
use serde::Serialize;
use std::path::PathBuf;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::util::write_snapshot;
use c2t_core::dataset::{build_catalog, ConditionTag, EvalSpec, Split};

#[derive(ClapArgs)]
pub struct Args {
    #[arg(long)]
    pairs: PathBuf,
    /// Condition label, e.g. Winter4.
    #[arg(long)]
    condition: String,
    /// Outdoor temperature of the condition, °C.
    #[arg(long, allow_hyphen_values = true)]
    t_out: f32,
    /// Number of scenes held out for evaluation.
    #[arg(long, conflicts_with = "eval_fraction")]
    eval_count: Option<usize>,
    /// Fraction of scenes held out for evaluation.
    #[arg(long)]
    eval_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Free-text acquisition notes stored in the catalog.
    #[arg(long)]
    notes: Option<String>,
    /// Output catalog file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    command: &'static str,
    pairs: &'a PathBuf,
    condition: &'a str,
    t_out: f32,
    eval_count: Option<usize>,
    eval_fraction: Option<f64>,
    seed: u64,
    train: usize,
    eval: usize,
}

pub fn run(cfg: &RunConfig, args: Args) -> Result<(), CliError> {
    let eval = match (args.eval_count, args.eval_fraction) {
        (Some(n), None) => EvalSpec::Count(n),
        (None, Some(f)) => EvalSpec::Fraction(f),
        (None, None) => {
            return Err(CliError::config(
                "one of --eval-count or --eval-fraction is required",
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let seed = args.seed.unwrap_or(cfg.seed);
    let mut catalog = build_catalog(
        &args.pairs,
        ConditionTag::new(args.condition.clone(), args.t_out),
        eval,
        seed,
    )?;
    catalog.notes = args.notes.clone();

    let out = cfg.resolve_out(&args.out);
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent).map_err(CliError::io)?;
    }
    catalog.save(&out)?;
    write_snapshot(
        &out,
        false,
        &Snapshot {
            command: "split",
            pairs: &args.pairs,
            condition: &args.condition,
            t_out: args.t_out,
            eval_count: args.eval_count,
            eval_fraction: args.eval_fraction,
            seed,
            train: catalog.split_len(Split::Train),
            eval: catalog.split_len(Split::Eval),
        },
    )?;
    println!(
        "catalog {}: {} train / {} eval -> {}",
        args.condition,
        catalog.split_len(Split::Train),
        catalog.split_len(Split::Eval),
        out.display()
    );
    Ok(())
}
