//! End-to-end training behavior on small synthetic sets: losses fall,
//! the learned mapping picks up scene structure, fine-tune init checks.

use once_cell::sync::Lazy;
use std::path::PathBuf;

use c2t_core::codec::read_pair;
use c2t_core::dataset::{build_catalog, ConditionTag, EvalSpec, Split};
use c2t_core::model::{
    predict, train, Checkpoint, Generator, GeneratorConfig, ModelError, Provenance, TrainedModels,
    TrainingConfig, TrainingLog,
};
use c2t_core::model::{Discriminator, DiscriminatorConfig};
use c2t_core::synth::{generate_set, AnomalyPlan, GenerateSpec, SynthCondition};

const SIZE: usize = 64;

struct Fixture {
    // Holds the tempdir open for the fixture's lifetime.
    _dir: tempfile::TempDir,
    pair_dir: PathBuf,
    models: TrainedModels,
    log: TrainingLog,
}

/// One toy training run shared by the tests below: 50 pairs of a
/// winter-like condition with strongly warm windows, scale 0.25, 5 epochs.
static TOY_RUN: Lazy<Fixture> = Lazy::new(|| {
    let dir = tempfile::tempdir().unwrap();
    let pair_dir = dir.path().join("pairs");
    let mut condition = SynthCondition::winter4();
    condition.window_delta = 3.0;
    generate_set(
        &pair_dir,
        &GenerateSpec {
            n: 50,
            condition: condition.clone(),
            anomaly_rate: 0.0,
            anomaly: AnomalyPlan::default(),
            size: SIZE,
            seed: 41,
        },
    )
    .unwrap();
    let catalog = build_catalog(
        &pair_dir,
        ConditionTag::new("winter4", -4.0),
        EvalSpec::Count(8),
        7,
    )
    .unwrap();
    let gen_cfg = GeneratorConfig {
        size: SIZE,
        scale: 0.25,
        ..GeneratorConfig::default()
    };
    let cfg = TrainingConfig {
        lr_generator: 1e-3,
        lr_discriminator: 1e-3,
        epochs: 5,
        batch_size: 3,
        l1_weight: 100.0,
        seed: 11,
        augment: true,
        checkpoint_every: 0,
    };
    let (models, log) = train(&catalog, &gen_cfg, &cfg, None, None, |_| {}).unwrap();
    Fixture {
        _dir: dir,
        pair_dir,
        models,
        log,
    }
});

#[test]
fn training_reduces_l1_and_validation_mad() {
    let fx = &*TOY_RUN;
    let first = &fx.log.stats[0];
    let last = fx.log.stats.last().unwrap();
    assert!(
        last.g_l1_loss < first.g_l1_loss,
        "train L1 did not fall: {} -> {}",
        first.g_l1_loss,
        last.g_l1_loss
    );
    assert!(
        last.val_mad_c.unwrap() < first.val_mad_c.unwrap(),
        "val MAD did not fall: {:?} -> {:?}",
        first.val_mad_c,
        last.val_mad_c
    );
    assert_eq!(fx.log.stats.len(), 5);
    assert_eq!(fx.models.provenance.epochs, 5);
    assert_eq!(fx.models.provenance.fine_tuned_from, None);
}

#[test]
fn trained_model_predicts_windows_warmer_than_walls() {
    let fx = &*TOY_RUN;
    // Evaluate on a held-out scene: window pixels must be predicted
    // warmer than wall pixels (mean code difference > 0).
    let catalog = build_catalog(
        &fx.pair_dir,
        ConditionTag::new("winter4", -4.0),
        EvalSpec::Count(8),
        7,
    )
    .unwrap();
    let eval_ids = catalog.scene_ids(Split::Eval);
    let mut checked = 0;
    let mut diffs = Vec::new();
    for id in eval_ids.iter().take(4) {
        let pair = read_pair(&fx.pair_dir, id).unwrap();
        let pred = predict(&fx.models.generator, &pair.rgb, &pair.thermal.params).unwrap();
        // Locate windows from the measured image: codes well above the
        // wall level in this condition are window (or vent) pixels.
        let mut win_sum = 0.0;
        let mut win_n = 0usize;
        let mut wall_sum = 0.0;
        let mut wall_n = 0usize;
        for (ix, &mc) in pair.thermal.codes.indexed_iter() {
            let pc = pred.codes[ix] as f64;
            // Winter walls sit near code 10 +- material; windows +3 °C higher.
            if (14..=22).contains(&mc) {
                win_sum += pc;
                win_n += 1;
            } else if (7..=12).contains(&mc) {
                wall_sum += pc;
                wall_n += 1;
            }
        }
        if win_n > 50 && wall_n > 200 {
            diffs.push(win_sum / win_n as f64 - wall_sum / wall_n as f64);
            checked += 1;
        }
    }
    assert!(checked >= 2, "not enough evaluable scenes");
    let mean_diff: f64 = diffs.iter().sum::<f64>() / diffs.len() as f64;
    assert!(
        mean_diff > 0.0,
        "predicted windows not warmer than walls: {diffs:?}"
    );
}

#[test]
fn init_shape_mismatch_rejected() {
    let fx = &*TOY_RUN;
    let catalog = build_catalog(
        &fx.pair_dir,
        ConditionTag::new("winter4", -4.0),
        EvalSpec::Count(8),
        7,
    )
    .unwrap();
    // Wrong channel width for the requested architecture.
    let wrong_gen = Generator::<f32>::new(
        &GeneratorConfig {
            size: SIZE,
            scale: 0.1,
            ..GeneratorConfig::default()
        },
        0,
    )
    .unwrap();
    let wrong_disc = Discriminator::<f32>::new(
        &DiscriminatorConfig {
            scale: 0.1,
            in_channels: 4,
        },
        0,
    )
    .unwrap();
    let init = Checkpoint {
        generator: wrong_gen,
        discriminator: wrong_disc,
        encoding: c2t_core::codec::EncodingParams::for_outdoor(-4.0),
        provenance: Provenance {
            condition: "winter4".into(),
            fine_tuned_from: None,
            epochs: 1,
            seed: 0,
        },
    };
    let gen_cfg = GeneratorConfig {
        size: SIZE,
        scale: 0.25,
        ..GeneratorConfig::default()
    };
    let cfg = TrainingConfig {
        lr_generator: 1e-3,
        lr_discriminator: 1e-3,
        epochs: 1,
        batch_size: 3,
        l1_weight: 100.0,
        seed: 1,
        augment: false,
        checkpoint_every: 0,
    };
    let err = train(&catalog, &gen_cfg, &cfg, Some(init), None, |_| {}).unwrap_err();
    assert!(matches!(err, ModelError::ShapeMismatch(_)), "{err:?}");
}

#[test]
fn divergent_training_aborts_with_nonfinite_loss() {
    let fx = &*TOY_RUN;
    let catalog = build_catalog(
        &fx.pair_dir,
        ConditionTag::new("winter4", -4.0),
        EvalSpec::Count(8),
        7,
    )
    .unwrap();
    let gen_cfg = GeneratorConfig {
        size: SIZE,
        scale: 0.1,
        ..GeneratorConfig::default()
    };
    // An unbounded learning rate turns the first update into NaNs; the
    // guard must abort instead of looping on garbage.
    let cfg = TrainingConfig {
        lr_generator: f64::INFINITY,
        lr_discriminator: f64::INFINITY,
        epochs: 2,
        batch_size: 3,
        l1_weight: 100.0,
        seed: 1,
        augment: false,
        checkpoint_every: 0,
    };
    let err = train(&catalog, &gen_cfg, &cfg, None, None, |_| {}).unwrap_err();
    assert!(matches!(err, ModelError::NonFiniteLoss { .. }), "{err:?}");
}

#[test]
fn training_config_reference_presets_validate() {
    // Winter: lr 1e-3 / 1e-3, 150 epochs, batch 3.
    let winter = TrainingConfig {
        lr_generator: 1e-3,
        lr_discriminator: 1e-3,
        epochs: 150,
        batch_size: 3,
        l1_weight: 100.0,
        seed: 0,
        augment: true,
        checkpoint_every: 25,
    };
    winter.validate().unwrap();
    // Summer fine-tune: lr 2e-4 / 2e-4, 30 epochs, batch 3.
    let summer = TrainingConfig {
        lr_generator: 2e-4,
        lr_discriminator: 2e-4,
        epochs: 30,
        ..winter
    };
    summer.validate().unwrap();

    let bad = TrainingConfig {
        lr_generator: 0.0,
        ..winter
    };
    assert!(bad.validate().is_err());
}
