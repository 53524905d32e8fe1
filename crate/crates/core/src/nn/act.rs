use ndarray::{Array, Dimension};

use crate::scalar::{lit, Scalar};

/// Pointwise nonlinearities. Backward passes only need the forward output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

pub fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

impl Activation {
    pub fn apply<T: Scalar, D: Dimension>(self, x: &mut Array<T, D>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => x.mapv_inplace(|v| v.max(T::zero())),
            Activation::LeakyRelu(slope) => {
                let s = lit::<T>(slope);
                x.mapv_inplace(|v| if v > T::zero() { v } else { v * s })
            }
            Activation::Tanh => x.mapv_inplace(|v| v.tanh()),
            Activation::Sigmoid => x.mapv_inplace(sigmoid),
        }
    }

    /// Multiplies `grad` in place by the activation derivative evaluated at `output`.
    pub fn backward<T: Scalar, D: Dimension>(self, output: &Array<T, D>, grad: &mut Array<T, D>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => grad.zip_mut_with(output, |g, &y| {
                if y <= T::zero() {
                    *g = T::zero()
                }
            }),
            Activation::LeakyRelu(slope) => {
                let s = lit::<T>(slope);
                grad.zip_mut_with(output, |g, &y| {
                    if y <= T::zero() {
                        *g = *g * s
                    }
                })
            }
            Activation::Tanh => grad.zip_mut_with(output, |g, &y| *g = *g * (T::one() - y * y)),
            Activation::Sigmoid => grad.zip_mut_with(output, |g, &y| *g = *g * y * (T::one() - y)),
        }
    }
}
