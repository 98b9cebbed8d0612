//! Adam optimizer over flat parameter slices.

use super::{sc, GradBuf, Scalar};

#[derive(Debug, Clone)]
pub struct Adam<F> {
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
    t: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(lr: f64, beta1: f64, beta2: f64, param_sizes: &[usize]) -> Self {
        Self {
            lr: sc(lr),
            beta1: sc(beta1),
            beta2: sc(beta2),
            eps: sc(1e-8),
            t: 0,
            m: param_sizes.iter().map(|&n| vec![F::zero(); n]).collect(),
            v: param_sizes.iter().map(|&n| vec![F::zero(); n]).collect(),
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = sc(lr);
    }

    pub fn step(&mut self, params: &mut [&mut [F]], grads: &GradBuf<F>) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.slots.len(), self.m.len());
        self.t += 1;
        let b1t = sc::<F>(1.0) - self.beta1.powi(self.t as i32);
        let b2t = sc::<F>(1.0) - self.beta2.powi(self.t as i32);
        let one = F::one();
        for (slot, (param, grad)) in params.iter_mut().zip(grads.slots.iter()).enumerate() {
            let m = &mut self.m[slot];
            let v = &mut self.v[slot];
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (one - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (one - self.beta2) * g * g;
                let m_hat = m[i] / b1t;
                let v_hat = v[i] / b2t;
                param[i] = param[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamDesc;

    #[test]
    fn adam_descends_a_quadratic() {
        // Minimize f(x) = sum (x - 3)^2 over a 4-vector.
        let mut x = vec![0.0f64; 4];
        let descs = [ParamDesc {
            name: "x".into(),
            shape: vec![4],
        }];
        let mut opt = Adam::new(0.1, 0.5, 0.999, &[4]);
        for _ in 0..500 {
            let mut g = GradBuf::zeros(&descs);
            for i in 0..4 {
                g.slots[0][i] = 2.0 * (x[i] - 3.0);
            }
            let mut refs: Vec<&mut [f64]> = vec![x.as_mut_slice()];
            opt.step(&mut refs, &g);
        }
        for v in x {
            assert!((v - 3.0).abs() < 1e-3, "got {v}");
        }
    }

    #[test]
    fn first_step_size_is_lr() {
        // With bias correction, |Δ| of the first step is ~lr regardless of g.
        let mut x = vec![1.0f64];
        let descs = [ParamDesc {
            name: "x".into(),
            shape: vec![1],
        }];
        let mut g = GradBuf::zeros(&descs);
        g.slots[0][0] = 1e-4;
        let mut opt = Adam::new(0.01, 0.5, 0.999, &[1]);
        let mut refs: Vec<&mut [f64]> = vec![x.as_mut_slice()];
        opt.step(&mut refs, &g);
        assert!((x[0] - (1.0 - 0.01)).abs() < 1e-6, "got {}", x[0]);
    }
}
