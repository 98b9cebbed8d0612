//! Normalization, activations, dropout, channel concat/split, losses.

use ndarray::Array3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{sc, Scalar};

const NORM_EPS: f64 = 1e-5;

/// Per-channel instance normalization without affine parameters.
/// Returns the normalized map and `(x_hat, inv_std)` for the backward pass.
pub fn instance_norm<F: Scalar>(x: &Array3<F>) -> (Array3<F>, (Array3<F>, Vec<F>)) {
    let (c, h, w) = x.dim();
    let n = sc::<F>((h * w) as f64);
    let mut y = Array3::zeros((c, h, w));
    let mut inv_stds = Vec::with_capacity(c);
    for ch in 0..c {
        let plane = x.index_axis(ndarray::Axis(0), ch);
        let mut mean = F::zero();
        for &v in plane.iter() {
            mean = mean + v;
        }
        mean = mean / n;
        let mut var = F::zero();
        for &v in plane.iter() {
            let d = v - mean;
            var = var + d * d;
        }
        var = var / n;
        let inv_std = F::one() / (var + sc(NORM_EPS)).sqrt();
        inv_stds.push(inv_std);
        let mut out = y.index_axis_mut(ndarray::Axis(0), ch);
        for (o, &v) in out.iter_mut().zip(plane.iter()) {
            *o = (v - mean) * inv_std;
        }
    }
    (y.clone(), (y, inv_stds))
}

pub fn instance_norm_backward<F: Scalar>(
    dy: &Array3<F>,
    ctx: &(Array3<F>, Vec<F>),
) -> Array3<F> {
    let (x_hat, inv_stds) = ctx;
    let (c, h, w) = dy.dim();
    let n = sc::<F>((h * w) as f64);
    let mut dx = Array3::zeros((c, h, w));
    for ch in 0..c {
        let g = dy.index_axis(ndarray::Axis(0), ch);
        let xh = x_hat.index_axis(ndarray::Axis(0), ch);
        let mut g_mean = F::zero();
        let mut gx_mean = F::zero();
        for (&gv, &xv) in g.iter().zip(xh.iter()) {
            g_mean = g_mean + gv;
            gx_mean = gx_mean + gv * xv;
        }
        g_mean = g_mean / n;
        gx_mean = gx_mean / n;
        let inv_std = inv_stds[ch];
        let mut out = dx.index_axis_mut(ndarray::Axis(0), ch);
        for ((o, &gv), &xv) in out.iter_mut().zip(g.iter()).zip(xh.iter()) {
            *o = inv_std * (gv - g_mean - xv * gx_mean);
        }
    }
    dx
}

pub fn leaky_relu<F: Scalar>(x: &Array3<F>, slope: f64) -> Array3<F> {
    let s = sc::<F>(slope);
    x.mapv(|v| if v > F::zero() { v } else { v * s })
}

/// Backward from the activation output; valid because the sign of the
/// output matches the sign of the input for slope >= 0.
pub fn leaky_relu_backward<F: Scalar>(dy: &Array3<F>, y: &Array3<F>, slope: f64) -> Array3<F> {
    let s = sc::<F>(slope);
    let mut dx = dy.clone();
    for (d, &yv) in dx.iter_mut().zip(y.iter()) {
        if yv <= F::zero() {
            *d = *d * s;
        }
    }
    dx
}

pub fn tanh_map<F: Scalar>(x: &Array3<F>) -> Array3<F> {
    x.mapv(|v| v.tanh())
}

pub fn tanh_backward<F: Scalar>(dy: &Array3<F>, y: &Array3<F>) -> Array3<F> {
    let mut dx = dy.clone();
    for (d, &yv) in dx.iter_mut().zip(y.iter()) {
        *d = *d * (F::one() - yv * yv);
    }
    dx
}

/// Inverted dropout; returns the output and the multiplier mask applied,
/// which the backward pass reuses.
pub fn dropout<F: Scalar>(x: &Array3<F>, p: f64, rng: &mut ChaCha8Rng) -> (Array3<F>, Array3<F>) {
    let keep_scale = sc::<F>(1.0 / (1.0 - p));
    let mask = Array3::from_shape_fn(x.dim(), |_| {
        if rng.gen::<f64>() < p {
            F::zero()
        } else {
            keep_scale
        }
    });
    (x * &mask, mask)
}

pub fn dropout_backward<F: Scalar>(dy: &Array3<F>, mask: &Array3<F>) -> Array3<F> {
    dy * mask
}

pub fn concat_channels<F: Scalar>(a: &Array3<F>, b: &Array3<F>) -> Array3<F> {
    let (ca, h, w) = a.dim();
    let (cb, hb, wb) = b.dim();
    assert_eq!((h, w), (hb, wb), "concat spatial mismatch");
    let mut out = Array3::zeros((ca + cb, h, w));
    out.slice_mut(ndarray::s![..ca, .., ..]).assign(a);
    out.slice_mut(ndarray::s![ca.., .., ..]).assign(b);
    out
}

pub fn split_channels<F: Scalar>(x: &Array3<F>, ca: usize) -> (Array3<F>, Array3<F>) {
    (
        x.slice(ndarray::s![..ca, .., ..]).to_owned(),
        x.slice(ndarray::s![ca.., .., ..]).to_owned(),
    )
}

/// Mean absolute error and its gradient with respect to the prediction.
pub fn l1_loss<F: Scalar>(pred: &Array3<F>, target: &Array3<F>) -> (F, Array3<F>) {
    assert_eq!(pred.dim(), target.dim());
    let n = sc::<F>(pred.len() as f64);
    let inv_n = F::one() / n;
    let mut loss = F::zero();
    let mut grad = Array3::zeros(pred.dim());
    for ((g, &p), &t) in grad.iter_mut().zip(pred.iter()).zip(target.iter()) {
        let d = p - t;
        loss = loss + d.abs();
        *g = if d > F::zero() {
            inv_n
        } else if d < F::zero() {
            -inv_n
        } else {
            F::zero()
        };
    }
    (loss * inv_n, grad)
}

/// Binary cross-entropy on logits against a constant 0/1 target, mean
/// reduced; numerically stable form. Returns the loss and dloss/dlogits.
pub fn bce_with_logits<F: Scalar>(logits: &Array3<F>, target_is_real: bool) -> (F, Array3<F>) {
    let n = sc::<F>(logits.len() as f64);
    let inv_n = F::one() / n;
    let t = if target_is_real { F::one() } else { F::zero() };
    let mut loss = F::zero();
    let mut grad = Array3::zeros(logits.dim());
    for (g, &z) in grad.iter_mut().zip(logits.iter()) {
        let max_part = if z > F::zero() { z } else { F::zero() };
        loss = loss + max_part - z * t + (F::one() + (-z.abs()).exp()).ln();
        let sigma = F::one() / (F::one() + (-z).exp());
        *g = (sigma - t) * inv_n;
    }
    (loss * inv_n, grad)
}
