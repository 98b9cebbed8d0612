//! Strided convolution and transposed convolution via im2col/col2im.

use ndarray::{Array1, Array2, Array3, ArrayView2};
use rand_chacha::ChaCha8Rng;

use super::{matmul, sample_normal, Scalar};

/// Gather input patches: `cols[(c*k + ky)*k + kx, oy*ow + ox] =
/// x[c, oy*stride + ky - pad, ox*stride + kx - pad]` (zero outside).
fn im2col<F: Scalar>(
    x: &Array3<F>,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Array2<F> {
    let (c_in, h, w) = x.dim();
    let mut cols = Array2::zeros((c_in * k * k, oh * ow));
    let xs = x.as_slice().expect("standard layout");
    let cs = cols.as_slice_mut().expect("standard layout");
    for c in 0..c_in {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let row_base = row * oh * ow;
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src_base = c * h * w + iy as usize * w;
                    let dst_base = row_base + oy * ow;
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            cs[dst_base + ox] = xs[src_base + ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add patches back into an image; the adjoint of `im2col`.
fn col2im_add<F: Scalar>(
    cols: &Array2<F>,
    c_img: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Array3<F> {
    let mut img = Array3::zeros((c_img, h, w));
    let is = img.as_slice_mut().expect("standard layout");
    let cs = cols.as_slice().expect("standard layout");
    for c in 0..c_img {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let row_base = row * oh * ow;
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst_base = c * h * w + iy as usize * w;
                    let src_base = row_base + oy * ow;
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            let d = dst_base + ix as usize;
                            is[d] = is[d] + cs[src_base + ox];
                        }
                    }
                }
            }
        }
    }
    img
}

/// 2D convolution with weights flattened to `(c_out, c_in*k*k)`.
#[derive(Debug, Clone)]
pub struct Conv2d<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

/// Forward context kept for the backward pass.
#[derive(Debug)]
pub struct ConvCtx<F> {
    cols: Array2<F>,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
}

impl<F: Scalar> Conv2d<F> {
    pub fn new(
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut w = Array2::zeros((c_out, c_in * k * k));
        for v in w.iter_mut() {
            *v = sample_normal(rng, 0.02);
        }
        Self {
            w,
            b: Array1::zeros(c_out),
            c_in,
            c_out,
            k,
            stride,
            pad,
        }
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.k) / self.stride + 1,
            (w + 2 * self.pad - self.k) / self.stride + 1,
        )
    }

    pub fn forward(&self, x: &Array3<F>) -> (Array3<F>, ConvCtx<F>) {
        let (c_in, h, w) = x.dim();
        assert_eq!(c_in, self.c_in);
        let (oh, ow) = self.out_size(h, w);
        let cols = im2col(x, self.k, self.stride, self.pad, oh, ow);
        let mut y_flat = Array2::zeros((self.c_out, oh * ow));
        matmul(self.w.view(), cols.view(), &mut y_flat, F::zero());
        for (mut row, &b) in y_flat.rows_mut().into_iter().zip(self.b.iter()) {
            for v in row.iter_mut() {
                *v = *v + b;
            }
        }
        let y = y_flat
            .into_shape_with_order((self.c_out, oh, ow))
            .expect("reshape");
        (
            y,
            ConvCtx {
                cols,
                in_h: h,
                in_w: w,
                out_h: oh,
                out_w: ow,
            },
        )
    }

    /// Accumulates `dw`/`db` and returns the input gradient when requested.
    pub fn backward(
        &self,
        dy: &Array3<F>,
        ctx: &ConvCtx<F>,
        dw: &mut [F],
        db: &mut [F],
        want_dx: bool,
    ) -> Option<Array3<F>> {
        let (c_out, oh, ow) = dy.dim();
        assert_eq!((c_out, oh, ow), (self.c_out, ctx.out_h, ctx.out_w));
        let dy_flat =
            ArrayView2::from_shape((c_out, oh * ow), dy.as_slice().expect("layout")).unwrap();

        let mut dw_arr = Array2::zeros((self.c_out, self.c_in * self.k * self.k));
        matmul(dy_flat, ctx.cols.t(), &mut dw_arr, F::zero());
        for (d, &s) in dw.iter_mut().zip(dw_arr.as_slice().unwrap()) {
            *d = *d + s;
        }
        for (c, row) in dy_flat.rows().into_iter().enumerate() {
            let mut sum = F::zero();
            for &v in row {
                sum = sum + v;
            }
            db[c] = db[c] + sum;
        }

        if !want_dx {
            return None;
        }
        let mut dcols = Array2::zeros((self.c_in * self.k * self.k, oh * ow));
        matmul(self.w.t(), dy_flat, &mut dcols, F::zero());
        Some(col2im_add(
            &dcols, self.c_in, ctx.in_h, ctx.in_w, self.k, self.stride, self.pad, oh, ow,
        ))
    }
}

/// Transposed 2D convolution with weights flattened to `(c_in, c_out*k*k)`.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

#[derive(Debug)]
pub struct DeconvCtx<F> {
    x_flat: Array2<F>,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
}

impl<F: Scalar> ConvTranspose2d<F> {
    pub fn new(
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut w = Array2::zeros((c_in, c_out * k * k));
        for v in w.iter_mut() {
            *v = sample_normal(rng, 0.02);
        }
        Self {
            w,
            b: Array1::zeros(c_out),
            c_in,
            c_out,
            k,
            stride,
            pad,
        }
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h - 1) * self.stride + self.k - 2 * self.pad,
            (w - 1) * self.stride + self.k - 2 * self.pad,
        )
    }

    pub fn forward(&self, x: &Array3<F>) -> (Array3<F>, DeconvCtx<F>) {
        let (c_in, h, w) = x.dim();
        assert_eq!(c_in, self.c_in);
        let (oh, ow) = self.out_size(h, w);
        let x_flat = Array2::from_shape_vec(
            (c_in, h * w),
            x.as_slice().expect("layout").to_vec(),
        )
        .unwrap();
        let mut cols = Array2::zeros((self.c_out * self.k * self.k, h * w));
        matmul(self.w.t(), x_flat.view(), &mut cols, F::zero());
        // The input grid plays the role of the conv output grid here.
        let mut y = col2im_add(&cols, self.c_out, oh, ow, self.k, self.stride, self.pad, h, w);
        for (c, &b) in self.b.iter().enumerate() {
            for v in y.index_axis_mut(ndarray::Axis(0), c).iter_mut() {
                *v = *v + b;
            }
        }
        (
            y,
            DeconvCtx {
                x_flat,
                in_h: h,
                in_w: w,
                out_h: oh,
                out_w: ow,
            },
        )
    }

    pub fn backward(
        &self,
        dy: &Array3<F>,
        ctx: &DeconvCtx<F>,
        dw: &mut [F],
        db: &mut [F],
        want_dx: bool,
    ) -> Option<Array3<F>> {
        let (c_out, oh, ow) = dy.dim();
        assert_eq!((c_out, oh, ow), (self.c_out, ctx.out_h, ctx.out_w));
        let dcols = im2col(dy, self.k, self.stride, self.pad, ctx.in_h, ctx.in_w);

        let mut dw_arr = Array2::zeros((self.c_in, self.c_out * self.k * self.k));
        matmul(ctx.x_flat.view(), dcols.t(), &mut dw_arr, F::zero());
        for (d, &s) in dw.iter_mut().zip(dw_arr.as_slice().unwrap()) {
            *d = *d + s;
        }
        for c in 0..self.c_out {
            let mut sum = F::zero();
            for &v in dy.index_axis(ndarray::Axis(0), c).iter() {
                sum = sum + v;
            }
            db[c] = db[c] + sum;
        }

        if !want_dx {
            return None;
        }
        let mut dx_flat = Array2::zeros((self.c_in, ctx.in_h * ctx.in_w));
        matmul(self.w.view(), dcols.view(), &mut dx_flat, F::zero());
        Some(
            dx_flat
                .into_shape_with_order((self.c_in, ctx.in_h, ctx.in_w))
                .expect("reshape"),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rand_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Array3<f64> {
        Array3::from_shape_fn((c, h, w), |_| rng.gen_range(-1.0..1.0))
    }

    /// Scalar loss: projection of the output onto fixed random weights.
    fn proj_loss(y: &Array3<f64>, proj: &Array3<f64>) -> f64 {
        y.iter().zip(proj.iter()).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let conv = Conv2d::<f64>::new(2, 3, 4, 2, 1, &mut rng);
        let x = rand_tensor(&mut rng, 2, 6, 6);
        let (y, ctx) = conv.forward(&x);
        let proj = rand_tensor(&mut rng, y.dim().0, y.dim().1, y.dim().2);

        let mut dw = vec![0.0; conv.w.len()];
        let mut db = vec![0.0; conv.b.len()];
        let dx = conv.backward(&proj, &ctx, &mut dw, &mut db, true).unwrap();

        let h = 1e-6;
        // dW
        let mut conv_p = conv.clone();
        for idx in [0usize, 7, 31, conv.w.len() - 1] {
            let orig = conv.w.as_slice().unwrap()[idx];
            conv_p.w.as_slice_mut().unwrap()[idx] = orig + h;
            let lp = proj_loss(&conv_p.forward(&x).0, &proj);
            conv_p.w.as_slice_mut().unwrap()[idx] = orig - h;
            let lm = proj_loss(&conv_p.forward(&x).0, &proj);
            conv_p.w.as_slice_mut().unwrap()[idx] = orig;
            let num = (lp - lm) / (2.0 * h);
            assert!((num - dw[idx]).abs() < 1e-6, "dw[{idx}] {num} vs {}", dw[idx]);
        }
        // db
        for idx in 0..db.len() {
            let mut cp = conv.clone();
            cp.b[idx] += h;
            let lp = proj_loss(&cp.forward(&x).0, &proj);
            cp.b[idx] -= 2.0 * h;
            let lm = proj_loss(&cp.forward(&x).0, &proj);
            let num = (lp - lm) / (2.0 * h);
            assert!((num - db[idx]).abs() < 1e-6);
        }
        // dx
        let mut xp = x.clone();
        for idx in [0usize, 17, 35, 71] {
            let orig = xp.as_slice().unwrap()[idx];
            xp.as_slice_mut().unwrap()[idx] = orig + h;
            let lp = proj_loss(&conv.forward(&xp).0, &proj);
            xp.as_slice_mut().unwrap()[idx] = orig - h;
            let lm = proj_loss(&conv.forward(&xp).0, &proj);
            xp.as_slice_mut().unwrap()[idx] = orig;
            let num = (lp - lm) / (2.0 * h);
            let got = dx.as_slice().unwrap()[idx];
            assert!((num - got).abs() < 1e-6, "dx[{idx}] {num} vs {got}");
        }
    }

    #[test]
    fn deconv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let deconv = ConvTranspose2d::<f64>::new(3, 2, 4, 2, 1, &mut rng);
        let x = rand_tensor(&mut rng, 3, 3, 3);
        let (y, ctx) = deconv.forward(&x);
        assert_eq!(y.dim(), (2, 6, 6));
        let proj = rand_tensor(&mut rng, 2, 6, 6);

        let mut dw = vec![0.0; deconv.w.len()];
        let mut db = vec![0.0; deconv.b.len()];
        let dx = deconv
            .backward(&proj, &ctx, &mut dw, &mut db, true)
            .unwrap();

        let h = 1e-6;
        let mut dp = deconv.clone();
        for idx in [0usize, 5, 19, deconv.w.len() - 1] {
            let orig = deconv.w.as_slice().unwrap()[idx];
            dp.w.as_slice_mut().unwrap()[idx] = orig + h;
            let lp = proj_loss(&dp.forward(&x).0, &proj);
            dp.w.as_slice_mut().unwrap()[idx] = orig - h;
            let lm = proj_loss(&dp.forward(&x).0, &proj);
            dp.w.as_slice_mut().unwrap()[idx] = orig;
            let num = (lp - lm) / (2.0 * h);
            assert!((num - dw[idx]).abs() < 1e-6, "dw[{idx}] {num} vs {}", dw[idx]);
        }
        for idx in 0..db.len() {
            let mut cp = deconv.clone();
            cp.b[idx] += h;
            let lp = proj_loss(&cp.forward(&x).0, &proj);
            cp.b[idx] -= 2.0 * h;
            let lm = proj_loss(&cp.forward(&x).0, &proj);
            let num = (lp - lm) / (2.0 * h);
            assert!((num - db[idx]).abs() < 1e-6);
        }
        let mut xp = x.clone();
        for idx in [0usize, 11, 26] {
            let orig = xp.as_slice().unwrap()[idx];
            xp.as_slice_mut().unwrap()[idx] = orig + h;
            let lp = proj_loss(&deconv.forward(&xp).0, &proj);
            xp.as_slice_mut().unwrap()[idx] = orig - h;
            let lm = proj_loss(&deconv.forward(&xp).0, &proj);
            xp.as_slice_mut().unwrap()[idx] = orig;
            let num = (lp - lm) / (2.0 * h);
            let got = dx.as_slice().unwrap()[idx];
            assert!((num - got).abs() < 1e-6, "dx[{idx}] {num} vs {got}");
        }
    }

    #[test]
    fn conv_downsamples_and_deconv_upsamples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv2d::<f32>::new(3, 8, 4, 2, 1, &mut rng);
        let x = Array3::<f32>::zeros((3, 16, 16));
        let (y, _) = conv.forward(&x);
        assert_eq!(y.dim(), (8, 8, 8));

        let deconv = ConvTranspose2d::<f32>::new(8, 3, 4, 2, 1, &mut rng);
        let (z, _) = deconv.forward(&y);
        assert_eq!(z.dim(), (3, 16, 16));
    }
}
