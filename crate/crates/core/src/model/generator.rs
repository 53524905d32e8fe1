use ndarray::Array4;
use rand::Rng;

use crate::error::{shape_mismatch, Result};
use crate::nn::block::{BlockCache, ResCache};
use crate::nn::conv::{ConvCache, DeconvCache};
use crate::nn::param::join;
use crate::nn::{Activation, Conv2d, ConvBlock, ConvTranspose2d, DeconvBlock, Mode, Param, Parameterized, ResBlock};
use crate::scalar::Scalar;

/// Encoder / residual trunk / decoder translating one glyph image into another.
///
/// Layers: two stride-2 4×4 convs (1→c, c→2c), `res_blocks` residual blocks of two
/// 3×3 convs at 2c, two stride-2 4×4 transposed convs (2c→c, c→1) with a tanh
/// output. Batch norm follows every conv except the output one.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T> {
    pub down: [ConvBlock<T>; 2],
    pub trunk: Vec<ResBlock<T>>,
    pub up: [DeconvBlock<T>; 2],
}

#[derive(Debug, Clone)]
pub struct GeneratorCache<T> {
    down: Vec<BlockCache<ConvCache<T>, T>>,
    trunk: Vec<ResCache<T>>,
    up: Vec<BlockCache<DeconvCache<T>, T>>,
}

impl<T: Scalar> Generator<T> {
    pub fn new(base_channels: usize, res_blocks: usize) -> Self {
        let c = base_channels;
        Self {
            down: [
                ConvBlock::new(Conv2d::new(1, c, 4, 2, 1), true, Activation::Relu),
                ConvBlock::new(Conv2d::new(c, 2 * c, 4, 2, 1), true, Activation::Relu),
            ],
            trunk: (0..res_blocks).map(|_| ResBlock::new(2 * c, true)).collect(),
            up: [
                DeconvBlock::new(ConvTranspose2d::new(2 * c, c, 4, 2, 1), true, Activation::Relu),
                DeconvBlock::new(ConvTranspose2d::new(c, 1, 4, 2, 1), false, Activation::Tanh),
            ],
        }
    }

    pub fn init_normal(&mut self, std: f64, rng: &mut impl Rng) {
        for b in &mut self.down {
            b.init_normal(std, rng);
        }
        for r in &mut self.trunk {
            r.init_normal(std, rng);
        }
        for b in &mut self.up {
            b.init_normal(std, rng);
        }
    }

    pub fn conv_layer_count(&self) -> usize {
        self.down.len() + 2 * self.trunk.len() + self.up.len()
    }

    /// Sum of `k·k·c_in·c_out + c_out` over all conv layers.
    pub fn conv_param_count(&self) -> usize {
        self.down.iter().map(|b| b.conv.param_count()).sum::<usize>()
            + self
                .trunk
                .iter()
                .map(|r| r.first.conv.param_count() + r.second.conv.param_count())
                .sum::<usize>()
            + self.up.iter().map(|b| b.deconv.param_count()).sum::<usize>()
    }

    pub fn forward(&mut self, x: &Array4<T>, mode: Mode) -> Result<(Array4<T>, GeneratorCache<T>)> {
        let (_, c, h, w) = x.dim();
        if c != 1 || h % 4 != 0 || w % 4 != 0 || h == 0 || w == 0 {
            return Err(shape_mismatch("(B, 1, H, W) with H, W divisible by 4", x.dim()));
        }
        let mut cache = GeneratorCache {
            down: Vec::with_capacity(2),
            trunk: Vec::with_capacity(self.trunk.len()),
            up: Vec::with_capacity(2),
        };
        let mut y = x.clone();
        for b in &mut self.down {
            let (z, c) = b.forward(&y, mode)?;
            cache.down.push(c);
            y = z;
        }
        for r in &mut self.trunk {
            let (z, c) = r.forward(&y, mode)?;
            cache.trunk.push(c);
            y = z;
        }
        for b in &mut self.up {
            let (z, c) = b.forward(&y, mode)?;
            cache.up.push(c);
            y = z;
        }
        Ok((y, cache))
    }

    pub fn backward(&mut self, cache: &GeneratorCache<T>, dy: &Array4<T>) -> Array4<T> {
        let mut g = dy.clone();
        for (b, c) in self.up.iter_mut().zip(&cache.up).rev() {
            g = b.backward(c, &g);
        }
        for (r, c) in self.trunk.iter_mut().zip(&cache.trunk).rev() {
            g = r.backward(c, &g);
        }
        for (b, c) in self.down.iter_mut().zip(&cache.down).rev() {
            g = b.backward(c, &g);
        }
        g
    }
}

impl<T: Scalar> Parameterized<T> for Generator<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        for (i, b) in self.down.iter().enumerate() {
            b.visit(&join(prefix, &format!("down{i}")), f);
        }
        for (i, r) in self.trunk.iter().enumerate() {
            r.visit(&join(prefix, &format!("res{i}")), f);
        }
        for (i, b) in self.up.iter().enumerate() {
            b.visit(&join(prefix, &format!("up{i}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        for (i, b) in self.down.iter_mut().enumerate() {
            b.visit_mut(&join(prefix, &format!("down{i}")), f);
        }
        for (i, r) in self.trunk.iter_mut().enumerate() {
            r.visit_mut(&join(prefix, &format!("res{i}")), f);
        }
        for (i, b) in self.up.iter_mut().enumerate() {
            b.visit_mut(&join(prefix, &format!("up{i}")), f);
        }
    }
}
