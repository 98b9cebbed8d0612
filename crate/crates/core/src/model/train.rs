//! Adversarial training loop.
//!
//! Per batch, the discriminator is updated on real and translated pairs
//! (binary cross-entropy, averaged halves), then the generator is updated
//! against the refreshed discriminator with the GAN term plus an L1
//! reconstruction term weighted by `l1_weight`. Losses are averaged
//! per-sample so short final batches do not bias gradients.
//!
//! Samples inside a batch are processed in parallel; gradients are reduced
//! in sample order and per-sample dropout streams are derived from
//! (seed, epoch, step, sample), so results do not depend on thread count.

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::checkpoint::{save_checkpoint, Checkpoint, Provenance};
use super::data::{codes_to_tensor, rgb_to_tensor, tensor_to_codes};
use super::patchgan::{Discriminator, DiscriminatorConfig};
use super::unet::{Generator, GeneratorConfig};
use super::ModelError;
use crate::codec::EncodingParams;
use crate::dataset::{epoch_batches, load_batch, DatasetCatalog, Split};
use crate::nn::{bce_with_logits, concat_channels, l1_loss, Adam, GradBuf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l1_weight: f64,
    pub seed: u64,
    /// Horizontal-mirroring augmentation on the training split.
    pub augment: bool,
    /// Write a checkpoint every k epochs (0 disables periodic saves).
    pub checkpoint_every: usize,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lr_generator > 0.0) || !(self.lr_discriminator > 0.0) {
            return Err(ModelError::InvalidConfig(
                "learning rates must be positive".into(),
            ));
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(ModelError::InvalidConfig(
                "epochs and batch size must be at least 1".into(),
            ));
        }
        if self.l1_weight < 0.0 {
            return Err(ModelError::InvalidConfig(
                "l1_weight must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_gan_loss: f64,
    pub g_l1_loss: f64,
    /// Mean L1 on the eval split, in normalized [-1, 1] units.
    pub val_l1: Option<f64>,
    /// Mean absolute deviation on the eval split, in °C.
    pub val_mad_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub config: TrainingConfig,
    pub stats: Vec<EpochStats>,
}

#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub generator: Generator<f32>,
    pub discriminator: Discriminator<f32>,
    pub encoding: EncodingParams,
    pub provenance: Provenance,
}

fn mix_seed(seed: u64, epoch: usize, step: usize, sample: usize) -> u64 {
    // splitmix64 over the combined counters.
    let mut z = seed
        .wrapping_add((epoch as u64).wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add((step as u64).wrapping_mul(0xBF58476D1CE4E5B9))
        .wrapping_add((sample as u64).wrapping_mul(0x94D049BB133111EB))
        .wrapping_add(0x2545F4914F6CDD1D);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

struct Sample {
    x: Array3<f32>,
    y: Array3<f32>,
}

/// Train (or fine-tune, when `init` is given) the translator on the
/// catalog's train split. `progress` receives one report per epoch.
pub fn train(
    catalog: &DatasetCatalog,
    gen_cfg: &GeneratorConfig,
    cfg: &TrainingConfig,
    init: Option<Checkpoint>,
    checkpoint_dir: Option<&Path>,
    mut progress: impl FnMut(&EpochStats),
) -> Result<(TrainedModels, TrainingLog), ModelError> {
    cfg.validate()?;
    gen_cfg.validate()?;

    let train_ids = catalog.scene_ids(Split::Train);
    if train_ids.is_empty() {
        return Err(ModelError::Dataset(
            crate::dataset::DatasetError::EmptySplit(Split::Train),
        ));
    }
    let probe = catalog.load_pair(train_ids[0])?;
    if probe.rgb.width() != gen_cfg.size || probe.rgb.height() != gen_cfg.size {
        return Err(ModelError::ResolutionMismatch {
            got_w: probe.rgb.width(),
            got_h: probe.rgb.height(),
            want: gen_cfg.size,
        });
    }
    let encoding = probe.thermal.params;

    let disc_cfg = DiscriminatorConfig {
        scale: gen_cfg.scale,
        in_channels: gen_cfg.in_channels + gen_cfg.out_channels,
    };
    let (mut gen, mut disc, fine_tuned_from) = match init {
        Some(ckpt) => {
            let fresh = Generator::<f32>::new(gen_cfg, 0)?;
            if ckpt.generator.param_descs() != fresh.param_descs() {
                return Err(ModelError::ShapeMismatch(
                    "init checkpoint architecture differs from requested architecture".into(),
                ));
            }
            let fresh_d = Discriminator::<f32>::new(&disc_cfg, 0)?;
            if ckpt.discriminator.param_descs() != fresh_d.param_descs() {
                return Err(ModelError::ShapeMismatch(
                    "init discriminator architecture differs".into(),
                ));
            }
            let from = Some(ckpt.provenance.condition.clone());
            (ckpt.generator, ckpt.discriminator, from)
        }
        None => (
            Generator::<f32>::new(gen_cfg, cfg.seed)?,
            Discriminator::<f32>::new(&disc_cfg, cfg.seed.wrapping_add(1))?,
        // discriminator gets its own init stream
            None,
        ),
    };

    let gen_descs = gen.param_descs();
    let disc_descs = disc.param_descs();
    let gen_sizes: Vec<usize> = gen_descs.iter().map(|d| d.len()).collect();
    let disc_sizes: Vec<usize> = disc_descs.iter().map(|d| d.len()).collect();
    let mut adam_g = Adam::<f32>::new(cfg.lr_generator, 0.5, 0.999, &gen_sizes);
    let mut adam_d = Adam::<f32>::new(cfg.lr_discriminator, 0.5, 0.999, &disc_sizes);

    let mut log = TrainingLog {
        config: *cfg,
        stats: Vec::new(),
    };
    let mut consecutive_nonfinite = 0usize;

    for epoch in 1..=cfg.epochs {
        let batches = epoch_batches(
            catalog,
            Split::Train,
            cfg.batch_size,
            cfg.seed,
            epoch - 1,
            cfg.augment,
        )?;
        let mut epoch_d = 0.0f64;
        let mut epoch_gan = 0.0f64;
        let mut epoch_l1 = 0.0f64;
        let mut n_batches = 0usize;

        for (step, batch) in batches.iter().enumerate() {
            let pairs = load_batch(catalog, batch)?;
            let samples: Vec<Sample> = pairs
                .iter()
                .map(|p| Sample {
                    x: rgb_to_tensor(&p.rgb),
                    y: codes_to_tensor(&p.thermal),
                })
                .collect();
            let n = samples.len();
            let inv_n = 1.0f32 / n as f32;

            // Discriminator phase: real and translated pairs.
            let phase_a: Vec<_> = samples
                .par_iter()
                .enumerate()
                .map(|(si, s)| {
                    let mut drop_rng =
                        ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, epoch, step, si));
                    let (y_hat, gcache) = gen.forward(&s.x, Some(&mut drop_rng));

                    let mut gd = GradBuf::zeros(&disc_descs);
                    let real = concat_channels(&s.x, &s.y);
                    let (logits_r, cache_r) = disc.forward(&real);
                    let (loss_r, mut dlog_r) = bce_with_logits(&logits_r, true);
                    dlog_r.mapv_inplace(|v| v * 0.5);
                    disc.backward(&dlog_r, &cache_r, &mut gd, false);

                    let fake = concat_channels(&s.x, &y_hat);
                    let (logits_f, cache_f) = disc.forward(&fake);
                    let (loss_f, mut dlog_f) = bce_with_logits(&logits_f, false);
                    dlog_f.mapv_inplace(|v| v * 0.5);
                    disc.backward(&dlog_f, &cache_f, &mut gd, false);

                    let d_loss = 0.5 * (loss_r + loss_f) as f64;
                    (d_loss, gd, y_hat, gcache)
                })
                .collect();

            let mut d_grads = GradBuf::zeros(&disc_descs);
            let mut d_loss = 0.0f64;
            let mut y_hats = Vec::with_capacity(n);
            let mut gcaches = Vec::with_capacity(n);
            for (loss, gd, y_hat, gcache) in phase_a {
                d_loss += loss / n as f64;
                d_grads.add_scaled(&gd, inv_n);
                y_hats.push(y_hat);
                gcaches.push(gcache);
            }
            adam_d.step(&mut disc.params_mut(), &d_grads);

            // Generator phase against the updated discriminator.
            let phase_b: Vec<_> = samples
                .par_iter()
                .zip(y_hats.par_iter().zip(gcaches.par_iter()))
                .map(|(s, (y_hat, gcache))| {
                    let fake = concat_channels(&s.x, y_hat);
                    let (logits, dcache) = disc.forward(&fake);
                    let (gan_loss, dlog) = bce_with_logits(&logits, true);
                    let mut scratch = GradBuf::zeros(&disc_descs);
                    let d_fake = disc.backward(&dlog, &dcache, &mut scratch, true).unwrap();
                    // Gradient w.r.t. the thermal channel(s) of the concat.
                    let d_y_gan = d_fake
                        .slice(ndarray::s![gen_cfg.in_channels.., .., ..])
                        .to_owned();

                    let (l1, d_l1) = l1_loss(y_hat, &s.y);
                    let lw = cfg.l1_weight as f32;
                    let mut d_y = d_y_gan;
                    d_y.zip_mut_with(&d_l1, |a, &b| *a += lw * b);

                    let mut gg = GradBuf::zeros(&gen_descs);
                    gen.backward(&d_y, gcache, &mut gg);
                    (gan_loss as f64, l1 as f64, gg)
                })
                .collect();

            let mut g_grads = GradBuf::zeros(&gen_descs);
            let mut gan_loss = 0.0f64;
            let mut l1_loss_val = 0.0f64;
            for (gan, l1, gg) in phase_b {
                gan_loss += gan / n as f64;
                l1_loss_val += l1 / n as f64;
                g_grads.add_scaled(&gg, inv_n);
            }
            adam_g.step(&mut gen.params_mut(), &g_grads);

            let finite = d_loss.is_finite() && gan_loss.is_finite() && l1_loss_val.is_finite();
            if finite {
                consecutive_nonfinite = 0;
            } else {
                consecutive_nonfinite += 1;
                if consecutive_nonfinite >= 3 {
                    return Err(ModelError::NonFiniteLoss { epoch, step });
                }
            }

            epoch_d += d_loss;
            epoch_gan += gan_loss;
            epoch_l1 += l1_loss_val;
            n_batches += 1;
        }

        let (val_l1, val_mad) = validate(&gen, catalog)?;
        let stats = EpochStats {
            epoch,
            d_loss: epoch_d / n_batches as f64,
            g_gan_loss: epoch_gan / n_batches as f64,
            g_l1_loss: epoch_l1 / n_batches as f64,
            val_l1,
            val_mad_c: val_mad,
        };
        progress(&stats);
        log.stats.push(stats);

        if let Some(dir) = checkpoint_dir {
            let periodic =
                cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0;
            if periodic || epoch == cfg.epochs {
                let ckpt = Checkpoint {
                    generator: gen.clone(),
                    discriminator: disc.clone(),
                    encoding,
                    provenance: Provenance {
                        condition: catalog.condition.name.clone(),
                        fine_tuned_from: fine_tuned_from.clone(),
                        epochs: epoch,
                        seed: cfg.seed,
                    },
                };
                let name = if epoch == cfg.epochs {
                    "final.ckpt".to_string()
                } else {
                    format!("epoch_{epoch:04}.ckpt")
                };
                save_checkpoint(&dir.join(name), &ckpt)?;
            }
        }
    }

    let provenance = Provenance {
        condition: catalog.condition.name.clone(),
        fine_tuned_from,
        epochs: cfg.epochs,
        seed: cfg.seed,
    };
    Ok((
        TrainedModels {
            generator: gen,
            discriminator: disc,
            encoding,
            provenance,
        },
        log,
    ))
}

/// Mean normalized L1 and mean absolute deviation (°C) over the eval split.
fn validate(
    gen: &Generator<f32>,
    catalog: &DatasetCatalog,
) -> Result<(Option<f64>, Option<f64>), ModelError> {
    let ids = catalog.scene_ids(Split::Eval);
    if ids.is_empty() {
        return Ok((None, None));
    }
    let results: Vec<Result<(f64, f64), ModelError>> = ids
        .par_iter()
        .map(|id| {
            let pair = catalog.load_pair(id)?;
            let x = rgb_to_tensor::<f32>(&pair.rgb);
            let y = codes_to_tensor::<f32>(&pair.thermal);
            let (y_hat, _) = gen.forward(&x, None);
            let (l1, _) = l1_loss(&y_hat, &y);
            let pred = tensor_to_codes(&y_hat, &pair.thermal.params);
            let step = pair.thermal.params.step;
            let mut mad = 0.0f64;
            let mut count = 0usize;
            for ((r, c), &valid) in pair.thermal.validity.indexed_iter() {
                if valid {
                    let dm = pair.thermal.codes[[r, c] ] as f64;
                    let dp = pred.codes[[r, c]] as f64;
                    mad += (dm - dp).abs() * step as f64;
                    count += 1;
                }
            }
            Ok((l1 as f64, mad / count.max(1) as f64))
        })
        .collect();
    let mut l1_sum = 0.0;
    let mut mad_sum = 0.0;
    for r in results {
        let (l1, mad) = r?;
        l1_sum += l1;
        mad_sum += mad;
    }
    let n = ids.len() as f64;
    Ok((Some(l1_sum / n), Some(mad_sum / n)))
}
