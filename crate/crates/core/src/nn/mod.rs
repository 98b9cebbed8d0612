//! Minimal dense tensor ops for the translation networks: convolutions
//! via im2col + GEMM, instance normalization, activations, losses, Adam.
//!
//! Everything operates on per-sample `(channels, height, width)` feature
//! maps; batching is handled one sample at a time by the training loop,
//! which keeps results independent of batch composition and thread count.
//! Ops are generic over the float type so gradient checks can run in f64
//! while training stays in f32.

mod adam;
mod conv;
mod ops;

pub use adam::Adam;
pub use conv::{Conv2d, ConvCtx, ConvTranspose2d, DeconvCtx};
pub use ops::{
    bce_with_logits, concat_channels, dropout, dropout_backward, instance_norm,
    instance_norm_backward, l1_loss, leaky_relu, leaky_relu_backward, split_channels, tanh_map,
    tanh_backward,
};

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Float type the networks are instantiated over.
pub trait Scalar:
    ndarray::LinalgScalar + num_traits::Float + Send + Sync + std::fmt::Debug + 'static
{
}
impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn sc<F: Scalar>(x: f64) -> F {
    F::from(x).expect("scalar conversion")
}

/// `out = a . b + beta * out`
pub(crate) fn matmul<F: Scalar>(
    a: ArrayView2<F>,
    b: ArrayView2<F>,
    out: &mut Array2<F>,
    beta: F,
) {
    general_mat_mul(F::one(), &a, &b, beta, out);
}

/// Draw from N(0, std) with Box-Muller; deterministic given the rng state.
pub(crate) fn sample_normal<F: Scalar>(rng: &mut ChaCha8Rng, std: f64) -> F {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    sc((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos() * std)
}

/// Shape and name of one parameter tensor, for checkpoints and
/// shape-compatibility checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamDesc {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamDesc {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat per-parameter gradient accumulator aligned with a network's
/// parameter order.
#[derive(Debug, Clone)]
pub struct GradBuf<F> {
    pub slots: Vec<Vec<F>>,
}

impl<F: Scalar> GradBuf<F> {
    pub fn zeros(descs: &[ParamDesc]) -> Self {
        Self {
            slots: descs.iter().map(|d| vec![F::zero(); d.len()]).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &GradBuf<F>, scale: F) {
        for (dst, src) in self.slots.iter_mut().zip(&other.slots) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = *d + s * scale;
            }
        }
    }

    pub fn scale(&mut self, factor: F) {
        for slot in &mut self.slots {
            for v in slot.iter_mut() {
                *v = *v * factor;
            }
        }
    }
}
