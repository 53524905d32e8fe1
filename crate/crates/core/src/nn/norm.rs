use ndarray::{Array1, Array4, ArrayD, Axis, IxDyn};

use super::param::{join, Param, Parameterized};
use super::Mode;
use crate::scalar::{lit, Scalar};

/// Per-channel batch normalization over `(B, H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm2d<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Param<T>,
    pub running_var: Param<T>,
    pub momentum: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct NormCache<T> {
    xhat: Array4<T>,
    inv_std: Array1<T>,
    batch_stats: bool,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::filled(&[channels], T::one()),
            beta: Param::zeros(&[channels]),
            running_mean: Param::buffer(ArrayD::zeros(IxDyn(&[channels]))),
            running_var: Param::buffer(ArrayD::ones(IxDyn(&[channels]))),
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// In train mode normalizes by batch statistics and folds them into the running
    /// estimates; in eval mode uses the running estimates only.
    pub fn forward(&mut self, x: &Array4<T>, mode: Mode) -> (Array4<T>, NormCache<T>) {
        let c = self.channels();
        let (b, _, h, w) = x.dim();
        let n = b * h * w;
        let eps = lit::<T>(self.eps);
        let (mean, var) = match mode {
            Mode::Train => {
                let mut mean = Array1::zeros(c);
                let mut var = Array1::zeros(c);
                let nf = T::from_usize(n).expect("count");
                for ch in 0..c {
                    let view = x.index_axis(Axis(1), ch);
                    let m = view.sum() / nf;
                    let v = view.fold(T::zero(), |acc, &v| acc + (v - m) * (v - m)) / nf;
                    mean[ch] = m;
                    var[ch] = v;
                }
                let mom = lit::<T>(self.momentum);
                let unbias = if n > 1 {
                    nf / T::from_usize(n - 1).expect("count")
                } else {
                    T::one()
                };
                for ch in 0..c {
                    let rm = &mut self.running_mean.value[[ch]];
                    *rm = (T::one() - mom) * *rm + mom * mean[ch];
                    let rv = &mut self.running_var.value[[ch]];
                    *rv = (T::one() - mom) * *rv + mom * var[ch] * unbias;
                }
                (mean, var)
            }
            Mode::Eval => (
                Array1::from_iter(self.running_mean.value.iter().copied()),
                Array1::from_iter(self.running_var.value.iter().copied()),
            ),
        };
        let inv_std = var.mapv(|v| T::one() / (v + eps).sqrt());
        let mut xhat = x.to_owned();
        let mut y = Array4::zeros(x.raw_dim());
        for ch in 0..c {
            let (m, s) = (mean[ch], inv_std[ch]);
            let (g, bt) = (self.gamma.value[[ch]], self.beta.value[[ch]]);
            let mut xh = xhat.index_axis_mut(Axis(1), ch);
            xh.mapv_inplace(|v| (v - m) * s);
            y.index_axis_mut(Axis(1), ch).zip_mut_with(&xh, |o, &v| *o = v * g + bt);
        }
        let cache = NormCache {
            xhat,
            inv_std,
            batch_stats: mode == Mode::Train,
        };
        (y, cache)
    }

    pub fn backward(&mut self, cache: &NormCache<T>, dy: &Array4<T>) -> Array4<T> {
        let c = self.channels();
        let (b, _, h, w) = dy.dim();
        let nf = T::from_usize(b * h * w).expect("count");
        let mut dx = Array4::zeros(dy.raw_dim());
        for ch in 0..c {
            let dyc = dy.index_axis(Axis(1), ch);
            let xh = cache.xhat.index_axis(Axis(1), ch);
            let sum_dy = dyc.sum();
            let sum_dy_xh = ndarray::Zip::from(&dyc)
                .and(&xh)
                .fold(T::zero(), |acc, &d, &x| acc + d * x);
            self.gamma.grad[[ch]] = self.gamma.grad[[ch]] + sum_dy_xh;
            self.beta.grad[[ch]] = self.beta.grad[[ch]] + sum_dy;
            let g = self.gamma.value[[ch]];
            let s = cache.inv_std[ch];
            let mut dxc = dx.index_axis_mut(Axis(1), ch);
            if cache.batch_stats {
                let k = g * s / nf;
                ndarray::Zip::from(&mut dxc)
                    .and(&dyc)
                    .and(&xh)
                    .for_each(|o, &d, &x| *o = k * (nf * d - sum_dy - x * sum_dy_xh));
            } else {
                dxc.zip_mut_with(&dyc, |o, &d| *o = d * g * s);
            }
        }
        dx
    }
}

impl<T: Scalar> Parameterized<T> for BatchNorm2d<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        f(&join(prefix, "gamma"), &self.gamma);
        f(&join(prefix, "beta"), &self.beta);
        f(&join(prefix, "running_mean"), &self.running_mean);
        f(&join(prefix, "running_var"), &self.running_var);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f(&join(prefix, "gamma"), &mut self.gamma);
        f(&join(prefix, "beta"), &mut self.beta);
        f(&join(prefix, "running_mean"), &mut self.running_mean);
        f(&join(prefix, "running_var"), &mut self.running_var);
    }
}
