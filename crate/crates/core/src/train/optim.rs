use ndarray::{ArrayD, Zip};

use crate::nn::Param;
use crate::scalar::{lit, Scalar};

/// Adam with bias correction. Moments are stored per trainable parameter in visit order.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of updates applied so far.
    pub t: u64,
    pub m: Vec<ArrayD<T>>,
    pub v: Vec<ArrayD<T>>,
}

impl<T: Scalar> Adam<T> {
    /// Zero moments shaped after the trainable parameters `visit` walks.
    pub fn new(beta1: f64, beta2: f64, eps: f64, visit: impl FnOnce(&mut dyn FnMut(&str, &mut Param<T>))) -> Self {
        let mut m = Vec::new();
        visit(&mut |_, p| {
            if p.trainable {
                m.push(ArrayD::zeros(p.value.raw_dim()));
            }
        });
        Self {
            beta1,
            beta2,
            eps,
            t: 0,
            v: m.clone(),
            m,
        }
    }

    /// Applies one update from the accumulated gradients.
    pub fn step(&mut self, lr: f64, visit: impl FnOnce(&mut dyn FnMut(&str, &mut Param<T>))) {
        self.t += 1;
        let t = self.t as i32;
        let bc1 = lit::<T>(1.0 - self.beta1.powi(t));
        let bc2 = lit::<T>(1.0 - self.beta2.powi(t));
        let (b1, b2) = (lit::<T>(self.beta1), lit::<T>(self.beta2));
        let (lr, eps) = (lit::<T>(lr), lit::<T>(self.eps));
        let one = T::one();
        let (ms, vs) = (&mut self.m, &mut self.v);
        let mut i = 0;
        visit(&mut |name, p| {
            if !p.trainable {
                return;
            }
            assert_eq!(ms[i].shape(), p.value.shape(), "optimizer state does not match {name}");
            Zip::from(&mut p.value)
                .and(&p.grad)
                .and(&mut ms[i])
                .and(&mut vs[i])
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *w -= lr * mhat / (vhat.sqrt() + eps);
                });
            i += 1;
        });
        assert_eq!(i, ms.len(), "optimizer state covers a different parameter set");
    }

    pub fn num_slots(&self) -> usize {
        self.m.len()
    }
}
