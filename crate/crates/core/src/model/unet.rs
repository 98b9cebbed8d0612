//! U-Net encoder-decoder generator with skip connections.
//!
//! Structure follows the standard conditional image-translation recipe:
//! 4x4 stride-2 convolutions halve the resolution down to (near) 1x1,
//! transposed convolutions mirror the path back up, and each decoder
//! level concatenates the matching encoder features. Channel widths are
//! `ngf * min(2^i, 8)` with `ngf = 64 * scale`; instance normalization
//! (no affine terms) everywhere except the outermost and bottleneck
//! layers; dropout 0.5 on the three decoder levels after the bottleneck.

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::nn::{
    concat_channels, dropout, dropout_backward, instance_norm, instance_norm_backward,
    leaky_relu, leaky_relu_backward, split_channels, tanh_backward, tanh_map, Conv2d, ConvCtx,
    ConvTranspose2d, DeconvCtx, GradBuf, ParamDesc, Scalar,
};

const LEAKY_SLOPE: f64 = 0.2;
const DROPOUT_P: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Input resolution; must be a power of two, at least 16.
    pub size: usize,
    /// Channel-width multiplier; 1.0 is full scale (ngf = 64).
    pub scale: f64,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Dropout on the inner decoder levels during training.
    pub dropout: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            size: 512,
            scale: 1.0,
            in_channels: 3,
            out_channels: 1,
            dropout: true,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.size.is_power_of_two() || self.size < 16 {
            return Err(ModelError::InvalidConfig(format!(
                "size {} must be a power of two >= 16",
                self.size
            )));
        }
        if !(self.scale > 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "scale {} must be positive",
                self.scale
            )));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(ModelError::InvalidConfig("zero channel count".into()));
        }
        Ok(())
    }

    /// Number of down/up levels: 8 at 512 and 256, fewer at smaller sizes.
    pub fn depth(&self) -> usize {
        (self.size.trailing_zeros() as usize).min(8)
    }

    pub fn ngf(&self) -> usize {
        ((64.0 * self.scale).round() as usize).max(1)
    }

    fn enc_channels(&self) -> Vec<usize> {
        let ngf = self.ngf();
        (0..self.depth())
            .map(|i| ngf * (1usize << i.min(3)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Generator<F> {
    cfg: GeneratorConfig,
    enc: Vec<Conv2d<F>>,
    dec: Vec<ConvTranspose2d<F>>,
}

/// Per-layer forward state kept for backpropagation.
pub struct GenCache<F> {
    enc_ctx: Vec<ConvCtx<F>>,
    enc_norm: Vec<Option<(Array3<F>, Vec<F>)>>,
    enc_out: Vec<Array3<F>>,
    dec_relu: Vec<Array3<F>>,
    dec_ctx: Vec<DeconvCtx<F>>,
    dec_norm: Vec<Option<(Array3<F>, Vec<F>)>>,
    dec_drop: Vec<Option<Array3<F>>>,
    y: Array3<F>,
}

impl<F: Scalar> Generator<F> {
    pub fn new(cfg: &GeneratorConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let depth = cfg.depth();
        let ch = cfg.enc_channels();

        let mut enc = Vec::with_capacity(depth);
        for i in 0..depth {
            let c_in = if i == 0 { cfg.in_channels } else { ch[i - 1] };
            enc.push(Conv2d::new(c_in, ch[i], 4, 2, 1, &mut rng));
        }
        let mut dec = Vec::with_capacity(depth);
        for j in 0..depth {
            let c_in = if j == 0 {
                ch[depth - 1]
            } else {
                Self::dec_out_channels(cfg, j - 1) + ch[depth - 1 - j]
            };
            let c_out = Self::dec_out_channels(cfg, j);
            dec.push(ConvTranspose2d::new(c_in, c_out, 4, 2, 1, &mut rng));
        }
        Ok(Self {
            cfg: *cfg,
            enc,
            dec,
        })
    }

    fn dec_out_channels(cfg: &GeneratorConfig, j: usize) -> usize {
        let depth = cfg.depth();
        if j == depth - 1 {
            cfg.out_channels
        } else {
            cfg.enc_channels()[depth - 2 - j]
        }
    }

    fn dropout_active(&self, j: usize) -> bool {
        self.cfg.dropout && (1..=3).contains(&j) && j < self.cfg.depth() - 1
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    pub fn param_descs(&self) -> Vec<ParamDesc> {
        let mut out = Vec::new();
        for (i, l) in self.enc.iter().enumerate() {
            out.push(ParamDesc {
                name: format!("enc{i}.weight"),
                shape: vec![l.c_out, l.c_in, l.k, l.k],
            });
            out.push(ParamDesc {
                name: format!("enc{i}.bias"),
                shape: vec![l.c_out],
            });
        }
        for (j, l) in self.dec.iter().enumerate() {
            out.push(ParamDesc {
                name: format!("dec{j}.weight"),
                shape: vec![l.c_in, l.c_out, l.k, l.k],
            });
            out.push(ParamDesc {
                name: format!("dec{j}.bias"),
                shape: vec![l.c_out],
            });
        }
        out
    }

    pub fn params(&self) -> Vec<&[F]> {
        let mut out = Vec::new();
        for l in &self.enc {
            out.push(l.w.as_slice().unwrap());
            out.push(l.b.as_slice().unwrap());
        }
        for l in &self.dec {
            out.push(l.w.as_slice().unwrap());
            out.push(l.b.as_slice().unwrap());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [F]> {
        let mut out = Vec::new();
        for l in &mut self.enc {
            out.push(l.w.as_slice_mut().unwrap());
            out.push(l.b.as_slice_mut().unwrap());
        }
        for l in &mut self.dec {
            out.push(l.w.as_slice_mut().unwrap());
            out.push(l.b.as_slice_mut().unwrap());
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Run the network. `dropout_rng` enables training-mode dropout;
    /// inference passes `None` and is fully deterministic.
    pub fn forward(
        &self,
        x: &Array3<F>,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> (Array3<F>, GenCache<F>) {
        let depth = self.cfg.depth();
        assert_eq!(
            x.dim(),
            (self.cfg.in_channels, self.cfg.size, self.cfg.size),
            "generator input shape"
        );

        let mut enc_ctx = Vec::with_capacity(depth);
        let mut enc_norm = Vec::with_capacity(depth);
        let mut enc_out: Vec<Array3<F>> = Vec::with_capacity(depth);
        for i in 0..depth {
            let input = if i == 0 {
                x.clone()
            } else {
                leaky_relu(&enc_out[i - 1], LEAKY_SLOPE)
            };
            let (mut t, ctx) = self.enc[i].forward(&input);
            enc_ctx.push(ctx);
            if i > 0 && i < depth - 1 {
                let (n, nctx) = instance_norm(&t);
                t = n;
                enc_norm.push(Some(nctx));
            } else {
                enc_norm.push(None);
            }
            enc_out.push(t);
        }

        let mut dec_relu = Vec::with_capacity(depth);
        let mut dec_ctx = Vec::with_capacity(depth);
        let mut dec_norm = Vec::with_capacity(depth);
        let mut dec_drop = Vec::with_capacity(depth);
        let mut prev: Option<Array3<F>> = None;
        let mut y = Array3::zeros((self.cfg.out_channels, self.cfg.size, self.cfg.size));
        for j in 0..depth {
            let input = if j == 0 {
                enc_out[depth - 1].clone()
            } else {
                concat_channels(prev.as_ref().unwrap(), &enc_out[depth - 1 - j])
            };
            let relu_out = leaky_relu(&input, 0.0);
            let (mut t, ctx) = self.dec[j].forward(&relu_out);
            dec_relu.push(relu_out);
            dec_ctx.push(ctx);
            if j < depth - 1 {
                let (n, nctx) = instance_norm(&t);
                t = n;
                dec_norm.push(Some(nctx));
                if self.dropout_active(j) {
                    if let Some(rng) = dropout_rng.as_deref_mut() {
                        let (d, mask) = dropout(&t, DROPOUT_P, rng);
                        t = d;
                        dec_drop.push(Some(mask));
                    } else {
                        dec_drop.push(None);
                    }
                } else {
                    dec_drop.push(None);
                }
                prev = Some(t);
            } else {
                dec_norm.push(None);
                dec_drop.push(None);
                y = tanh_map(&t);
            }
        }

        let cache = GenCache {
            enc_ctx,
            enc_norm,
            enc_out,
            dec_relu,
            dec_ctx,
            dec_norm,
            dec_drop,
            y: y.clone(),
        };
        (y, cache)
    }

    /// Backpropagate `d_out` (gradient at the tanh output) and accumulate
    /// parameter gradients into `grads` (ordered as `param_descs`).
    pub fn backward(&self, d_out: &Array3<F>, cache: &GenCache<F>, grads: &mut GradBuf<F>) {
        let depth = self.cfg.depth();
        let enc_slot = |i: usize| 2 * i;
        let dec_slot = |j: usize| 2 * (depth + j);

        let mut d_enc: Vec<Option<Array3<F>>> = (0..depth).map(|_| None).collect();
        let add_enc = |store: &mut Vec<Option<Array3<F>>>, i: usize, g: Array3<F>| {
            match &mut store[i] {
                Some(acc) => {
                    *acc = &*acc + &g;
                }
                slot => *slot = Some(g),
            }
        };

        let mut g = tanh_backward(d_out, &cache.y);
        for j in (0..depth).rev() {
            if j < depth - 1 {
                if let Some(mask) = &cache.dec_drop[j] {
                    g = dropout_backward(&g, mask);
                }
                g = instance_norm_backward(&g, cache.dec_norm[j].as_ref().unwrap());
            }
            let (dw, db) = {
                let (a, b) = grads.slots.split_at_mut(dec_slot(j) + 1);
                (a.last_mut().unwrap(), b.first_mut().unwrap())
            };
            let d_pre = self.dec[j]
                .backward(&g, &cache.dec_ctx[j], dw, db, true)
                .unwrap();
            let d_input = leaky_relu_backward(&d_pre, &cache.dec_relu[j], 0.0);
            if j == 0 {
                add_enc(&mut d_enc, depth - 1, d_input);
            } else {
                let prev_ch = Self::dec_out_channels(&self.cfg, j - 1);
                let (d_prev, d_skip) = split_channels(&d_input, prev_ch);
                add_enc(&mut d_enc, depth - 1 - j, d_skip);
                g = d_prev;
            }
        }

        for i in (0..depth).rev() {
            let mut g = d_enc[i].take().expect("encoder gradient present");
            if i > 0 && i < depth - 1 {
                g = instance_norm_backward(&g, cache.enc_norm[i].as_ref().unwrap());
            }
            let (dw, db) = {
                let (a, b) = grads.slots.split_at_mut(enc_slot(i) + 1);
                (a.last_mut().unwrap(), b.first_mut().unwrap())
            };
            let d_pre = self.enc[i].backward(&g, &cache.enc_ctx[i], dw, db, i > 0);
            if i > 0 {
                let d = leaky_relu_backward(&d_pre.unwrap(), &cache.enc_out[i - 1], LEAKY_SLOPE);
                add_enc(&mut d_enc, i - 1, d);
            }
        }
    }
}
