//! `c2t train` — train or fine-tune the translator on a catalog.
//!
//! `--preset winter` and `--preset summer` reproduce the reference
//! training parameters; `--toy` switches to the desk-scale profile
//! (128x128 pairs, scale 0.25, 15 epochs) used by CI. Individual flags
//! override either. The resolved configuration is snapshotted next to
//! the outputs before training starts.

use clap::Args as ClapArgs;
use serde::Serialize;
use std::path::PathBuf;

use crate::config::{preset, RunConfig, TOY_EPOCHS, TOY_SCALE, TOY_SIZE};
use crate::error::CliError;
use crate::util::write_snapshot;
use c2t_core::dataset::{DatasetCatalog, Split};
use c2t_core::model::{
    load_checkpoint, save_checkpoint, train, Checkpoint, GeneratorConfig, TrainingConfig,
};

#[derive(ClapArgs)]
pub struct Args {
    #[arg(long)]
    catalog: PathBuf,
    /// Training preset: winter (1e-3, 150 epochs) or summer (2e-4, 30).
    #[arg(long, default_value = "winter")]
    preset: String,
    /// Checkpoint to fine-tune from.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Desk-scale profile: 128x128, scale 0.25, 15 epochs.
    #[arg(long)]
    toy: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr_g: Option<f64>,
    #[arg(long)]
    lr_d: Option<f64>,
    #[arg(long)]
    l1_weight: Option<f64>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Disable mirroring augmentation.
    #[arg(long)]
    no_augment: bool,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Validate and snapshot the resolved configuration, then exit.
    #[arg(long)]
    dry_run: bool,
    /// Output directory (checkpoints, training log, snapshot).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    command: &'static str,
    catalog: &'a PathBuf,
    preset: &'a str,
    toy: bool,
    init: Option<&'a PathBuf>,
    training: &'a TrainingConfig,
    generator: &'a GeneratorConfig,
}

pub fn run(cfg: &RunConfig, args: Args) -> Result<(), CliError> {
    let catalog = DatasetCatalog::load(&args.catalog)?;

    let mut tcfg: TrainingConfig = preset(&args.preset, args.seed.unwrap_or(cfg.seed))?;
    if args.toy {
        tcfg.epochs = TOY_EPOCHS;
    }
    if let Some(v) = args.epochs {
        tcfg.epochs = v;
    }
    if let Some(v) = args.batch_size {
        tcfg.batch_size = v;
    }
    if let Some(v) = args.lr_g {
        tcfg.lr_generator = v;
    }
    if let Some(v) = args.lr_d {
        tcfg.lr_discriminator = v;
    }
    if let Some(v) = args.l1_weight {
        tcfg.l1_weight = v;
    }
    if let Some(v) = args.checkpoint_every {
        tcfg.checkpoint_every = v;
    }
    if args.no_augment {
        tcfg.augment = false;
    }
    tcfg.validate()?;

    // The architecture size comes from the data itself.
    let train_ids = catalog.scene_ids(Split::Train);
    if train_ids.is_empty() {
        return Err(CliError::config("catalog train split is empty"));
    }
    let probe = catalog.load_pair(train_ids[0])?;
    let size = probe.rgb.width();
    if args.toy && size != TOY_SIZE {
        eprintln!("train: --toy expects {TOY_SIZE}px pairs, data is {size}px");
    }
    let scale = args.scale.unwrap_or(if args.toy { TOY_SCALE } else { cfg.scale });
    let gen_cfg = GeneratorConfig {
        size,
        scale,
        ..GeneratorConfig::default()
    };
    gen_cfg.validate()?;

    let out = cfg.resolve_out(&args.out);
    std::fs::create_dir_all(&out).map_err(CliError::io)?;
    write_snapshot(
        &out,
        true,
        &Snapshot {
            command: "train",
            catalog: &args.catalog,
            preset: &args.preset,
            toy: args.toy,
            init: args.init.as_ref(),
            training: &tcfg,
            generator: &gen_cfg,
        },
    )?;
    if args.dry_run {
        println!("dry run: resolved config written to {}", out.display());
        return Ok(());
    }

    let init: Option<Checkpoint> = match &args.init {
        Some(path) => Some(load_checkpoint(path)?),
        None => None,
    };

    let (models, log) = train(&catalog, &gen_cfg, &tcfg, init, Some(&out), |stats| {
        eprintln!(
            "epoch {:>3}/{}: d {:.4}  g_gan {:.4}  g_l1 {:.4}  val_l1 {}  val_mad {}",
            stats.epoch,
            tcfg.epochs,
            stats.d_loss,
            stats.g_gan_loss,
            stats.g_l1_loss,
            stats
                .val_l1
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".into()),
            stats
                .val_mad_c
                .map(|v| format!("{v:.3}C"))
                .unwrap_or_else(|| "-".into()),
        );
    })?;

    let log_json = serde_json::to_string_pretty(&log).map_err(CliError::io)?;
    std::fs::write(out.join("training_log.json"), log_json).map_err(CliError::io)?;
    // train() already wrote final.ckpt; re-register provenance here for
    // callers that renamed the directory between runs.
    save_checkpoint(
        &out.join("final.ckpt"),
        &Checkpoint {
            generator: models.generator.clone(),
            discriminator: models.discriminator.clone(),
            encoding: models.encoding,
            provenance: models.provenance.clone(),
        },
    )?;
    println!(
        "trained {} epochs on {} ({} train scenes) -> {}",
        tcfg.epochs,
        catalog.condition.name,
        train_ids.len(),
        out.join("final.ckpt").display()
    );
    Ok(())
}
