//! Patch discriminator: classifies overlapping receptive fields of the
//! concatenated (RGB, thermal) input as real or translated. The five-layer
//! stack (three stride-2, two stride-1 convolutions, 4x4 kernels) gives
//! each output logit a ~70x70 pixel receptive field.

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::nn::{
    instance_norm, instance_norm_backward, leaky_relu, leaky_relu_backward, Conv2d, ConvCtx,
    GradBuf, ParamDesc, Scalar,
};

const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    /// Channel-width multiplier; 1.0 gives ndf = 64.
    pub scale: f64,
    /// Channels of the concatenated input (RGB + thermal = 4).
    pub in_channels: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            scale: 1.0,
            in_channels: 4,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.scale > 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "scale {} must be positive",
                self.scale
            )));
        }
        if self.in_channels == 0 {
            return Err(ModelError::InvalidConfig("zero channel count".into()));
        }
        Ok(())
    }

    pub fn ndf(&self) -> usize {
        ((64.0 * self.scale).round() as usize).max(1)
    }
}

#[derive(Debug, Clone)]
pub struct Discriminator<F> {
    cfg: DiscriminatorConfig,
    layers: Vec<Conv2d<F>>,
}

pub struct DiscCache<F> {
    conv_ctx: Vec<ConvCtx<F>>,
    norm_ctx: Vec<Option<(Array3<F>, Vec<F>)>>,
    act_out: Vec<Array3<F>>,
}

impl<F: Scalar> Discriminator<F> {
    pub fn new(cfg: &DiscriminatorConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ndf = cfg.ndf();
        let layers = vec![
            Conv2d::new(cfg.in_channels, ndf, 4, 2, 1, &mut rng),
            Conv2d::new(ndf, 2 * ndf, 4, 2, 1, &mut rng),
            Conv2d::new(2 * ndf, 4 * ndf, 4, 2, 1, &mut rng),
            Conv2d::new(4 * ndf, 8 * ndf, 4, 1, 1, &mut rng),
            Conv2d::new(8 * ndf, 1, 4, 1, 1, &mut rng),
        ];
        Ok(Self { cfg: *cfg, layers })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.cfg
    }

    pub fn param_descs(&self) -> Vec<ParamDesc> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push(ParamDesc {
                name: format!("disc{i}.weight"),
                shape: vec![l.c_out, l.c_in, l.k, l.k],
            });
            out.push(ParamDesc {
                name: format!("disc{i}.bias"),
                shape: vec![l.c_out],
            });
        }
        out
    }

    pub fn params(&self) -> Vec<&[F]> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(l.w.as_slice().unwrap());
            out.push(l.b.as_slice().unwrap());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [F]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(l.w.as_slice_mut().unwrap());
            out.push(l.b.as_slice_mut().unwrap());
        }
        out
    }

    /// Score a (RGB, thermal) pair already concatenated to `in_channels`.
    /// Returns the spatial grid of real/fake logits.
    pub fn forward(&self, x: &Array3<F>) -> (Array3<F>, DiscCache<F>) {
        assert_eq!(x.dim().0, self.cfg.in_channels, "discriminator input");
        assert!(
            x.dim().1 >= 32 && x.dim().2 >= 32,
            "discriminator needs at least 32x32 input"
        );
        let mut conv_ctx = Vec::with_capacity(5);
        let mut norm_ctx = Vec::with_capacity(4);
        let mut act_out = Vec::with_capacity(4);
        let mut t = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (mut out, ctx) = layer.forward(&t);
            conv_ctx.push(ctx);
            if i == self.layers.len() - 1 {
                t = out;
                break;
            }
            if i > 0 {
                let (n, nc) = instance_norm(&out);
                out = n;
                norm_ctx.push(Some(nc));
            } else {
                norm_ctx.push(None);
            }
            let a = leaky_relu(&out, LEAKY_SLOPE);
            act_out.push(a.clone());
            t = a;
        }
        (
            t,
            DiscCache {
                conv_ctx,
                norm_ctx,
                act_out,
            },
        )
    }

    /// Backpropagate logit gradients; accumulates parameter gradients into
    /// `grads` and optionally returns the gradient at the input (used to
    /// drive the generator).
    pub fn backward(
        &self,
        d_logits: &Array3<F>,
        cache: &DiscCache<F>,
        grads: &mut GradBuf<F>,
        want_dx: bool,
    ) -> Option<Array3<F>> {
        let mut g = d_logits.clone();
        for i in (0..self.layers.len()).rev() {
            if i < self.layers.len() - 1 {
                g = leaky_relu_backward(&g, &cache.act_out[i], LEAKY_SLOPE);
                if i > 0 {
                    g = instance_norm_backward(&g, cache.norm_ctx[i].as_ref().unwrap());
                }
            }
            let (dw, db) = {
                let (a, b) = grads.slots.split_at_mut(2 * i + 1);
                (a.last_mut().unwrap(), b.first_mut().unwrap())
            };
            let dx = self.layers[i].backward(&g, &cache.conv_ctx[i], dw, db, i > 0 || want_dx);
            match dx {
                Some(d) => g = d,
                None => return None,
            }
        }
        Some(g)
    }
}
