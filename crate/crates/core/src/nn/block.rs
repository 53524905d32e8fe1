use ndarray::Array4;
use rand::Rng;

use super::conv::{Conv2d, ConvCache, ConvTranspose2d, DeconvCache};
use super::norm::{BatchNorm2d, NormCache};
use super::param::{join, Param, Parameterized};
use super::{Activation, Mode};
use crate::error::Result;
use crate::scalar::Scalar;

/// conv → optional batch norm → activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock<T> {
    pub conv: Conv2d<T>,
    pub norm: Option<BatchNorm2d<T>>,
    pub act: Activation,
}

#[derive(Debug, Clone)]
pub struct BlockCache<C, T> {
    inner: C,
    norm: Option<NormCache<T>>,
    out: Array4<T>,
}

impl<T: Scalar> ConvBlock<T> {
    pub fn new(conv: Conv2d<T>, norm: bool, act: Activation) -> Self {
        let norm = norm.then(|| BatchNorm2d::new(conv.out_channels));
        Self { conv, norm, act }
    }

    pub fn init_normal(&mut self, std: f64, rng: &mut impl Rng) {
        self.conv.init_normal(std, rng);
    }

    pub fn forward(&mut self, x: &Array4<T>, mode: Mode) -> Result<(Array4<T>, BlockCache<ConvCache<T>, T>)> {
        let (mut y, inner) = self.conv.forward(x)?;
        let norm = match &mut self.norm {
            Some(bn) => {
                let (z, c) = bn.forward(&y, mode);
                y = z;
                Some(c)
            }
            None => None,
        };
        self.act.apply(&mut y);
        Ok((y.clone(), BlockCache { inner, norm, out: y }))
    }

    pub fn backward(&mut self, cache: &BlockCache<ConvCache<T>, T>, dy: &Array4<T>) -> Array4<T> {
        let mut g = dy.clone();
        self.act.backward(&cache.out, &mut g);
        if let (Some(bn), Some(nc)) = (&mut self.norm, &cache.norm) {
            g = bn.backward(nc, &g);
        }
        self.conv.backward(&cache.inner, &g)
    }
}

impl<T: Scalar> Parameterized<T> for ConvBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.conv.visit(&join(prefix, "conv"), f);
        if let Some(bn) = &self.norm {
            bn.visit(&join(prefix, "norm"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.conv.visit_mut(&join(prefix, "conv"), f);
        if let Some(bn) = &mut self.norm {
            bn.visit_mut(&join(prefix, "norm"), f);
        }
    }
}

/// transposed conv → optional batch norm → activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DeconvBlock<T> {
    pub deconv: ConvTranspose2d<T>,
    pub norm: Option<BatchNorm2d<T>>,
    pub act: Activation,
}

impl<T: Scalar> DeconvBlock<T> {
    pub fn new(deconv: ConvTranspose2d<T>, norm: bool, act: Activation) -> Self {
        let norm = norm.then(|| BatchNorm2d::new(deconv.out_channels));
        Self { deconv, norm, act }
    }

    pub fn init_normal(&mut self, std: f64, rng: &mut impl Rng) {
        self.deconv.init_normal(std, rng);
    }

    pub fn forward(&mut self, x: &Array4<T>, mode: Mode) -> Result<(Array4<T>, BlockCache<DeconvCache<T>, T>)> {
        let (mut y, inner) = self.deconv.forward(x)?;
        let norm = match &mut self.norm {
            Some(bn) => {
                let (z, c) = bn.forward(&y, mode);
                y = z;
                Some(c)
            }
            None => None,
        };
        self.act.apply(&mut y);
        Ok((y.clone(), BlockCache { inner, norm, out: y }))
    }

    pub fn backward(&mut self, cache: &BlockCache<DeconvCache<T>, T>, dy: &Array4<T>) -> Array4<T> {
        let mut g = dy.clone();
        self.act.backward(&cache.out, &mut g);
        if let (Some(bn), Some(nc)) = (&mut self.norm, &cache.norm) {
            g = bn.backward(nc, &g);
        }
        self.deconv.backward(&cache.inner, &g)
    }
}

impl<T: Scalar> Parameterized<T> for DeconvBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.deconv.visit(&join(prefix, "deconv"), f);
        if let Some(bn) = &self.norm {
            bn.visit(&join(prefix, "norm"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.deconv.visit_mut(&join(prefix, "deconv"), f);
        if let Some(bn) = &mut self.norm {
            bn.visit_mut(&join(prefix, "norm"), f);
        }
    }
}

/// `x + norm(conv(relu(norm(conv(x)))))`, 3×3 convs at constant width.
#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock<T> {
    pub first: ConvBlock<T>,
    pub second: ConvBlock<T>,
}

#[derive(Debug, Clone)]
pub struct ResCache<T> {
    first: BlockCache<ConvCache<T>, T>,
    second: BlockCache<ConvCache<T>, T>,
}

impl<T: Scalar> ResBlock<T> {
    pub fn new(channels: usize, norm: bool) -> Self {
        Self {
            first: ConvBlock::new(Conv2d::new(channels, channels, 3, 1, 1), norm, Activation::Relu),
            second: ConvBlock::new(Conv2d::new(channels, channels, 3, 1, 1), norm, Activation::Identity),
        }
    }

    pub fn init_normal(&mut self, std: f64, rng: &mut impl Rng) {
        self.first.init_normal(std, rng);
        self.second.init_normal(std, rng);
    }

    pub fn forward(&mut self, x: &Array4<T>, mode: Mode) -> Result<(Array4<T>, ResCache<T>)> {
        let (h, first) = self.first.forward(x, mode)?;
        let (mut y, second) = self.second.forward(&h, mode)?;
        y += x;
        Ok((y, ResCache { first, second }))
    }

    pub fn backward(&mut self, cache: &ResCache<T>, dy: &Array4<T>) -> Array4<T> {
        let dh = self.second.backward(&cache.second, dy);
        let mut dx = self.first.backward(&cache.first, &dh);
        dx += dy;
        dx
    }
}

impl<T: Scalar> Parameterized<T> for ResBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.first.visit(&join(prefix, "first"), f);
        self.second.visit(&join(prefix, "second"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.first.visit_mut(&join(prefix, "first"), f);
        self.second.visit_mut(&join(prefix, "second"), f);
    }
}
