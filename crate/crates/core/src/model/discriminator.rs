use ndarray::{Array2, Array4, Axis};
use rand::Rng;

use crate::error::{shape_mismatch, Result};
use crate::nn::act::sigmoid;
use crate::nn::block::BlockCache;
use crate::nn::conv::{conv_out, ConvCache};
use crate::nn::param::join;
use crate::nn::{Activation, Conv2d, ConvBlock, Mode, Param, Parameterized};
use crate::scalar::Scalar;
use crate::stroke::NUM_STROKE_TYPES;

/// Width multipliers of the six hidden convs relative to the base width.
pub const HIDDEN_WIDTHS: [usize; 6] = [1, 2, 4, 8, 8, 8];
/// Strides of the six hidden convs. Stride-2 layers use 4×4 kernels, stride-1 layers 3×3.
pub const HIDDEN_STRIDES: [usize; 6] = [2, 2, 2, 1, 1, 1];

/// PatchGAN discriminator with a second head decoding the stroke encoding.
///
/// For an `H×W` input the realism map is `H/8 × W/8` when both are divisible by 8
/// (three halvings; stride-1 layers and both 3×3 heads preserve size). The stroke
/// head is a 3×3 conv to 32 channels, global average pooling and a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator<T> {
    pub hidden: Vec<ConvBlock<T>>,
    pub realism_head: Conv2d<T>,
    pub stroke_head: Conv2d<T>,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorOutput<T> {
    /// `B×1×h×w` pre-sigmoid scores.
    pub realism_logits: Array4<T>,
    /// `B×1×h×w` probabilities in (0, 1).
    pub realism: Array4<T>,
    /// `B×32` pre-sigmoid stroke scores.
    pub stroke_logits: Array2<T>,
    /// `B×32` stroke probabilities in (0, 1).
    pub stroke: Array2<T>,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorCache<T> {
    hidden: Vec<BlockCache<ConvCache<T>, T>>,
    realism: ConvCache<T>,
    stroke: ConvCache<T>,
    stroke_map: (usize, usize),
}

fn kernel_for(stride: usize) -> usize {
    if stride == 2 {
        4
    } else {
        3
    }
}

/// Realism map extent for an `h×w` input, following the layer plan.
pub fn realism_map_size(h: usize, w: usize) -> Option<(usize, usize)> {
    let (mut h, mut w) = (h, w);
    for s in HIDDEN_STRIDES {
        h = conv_out(h, kernel_for(s), s, 1)?;
        w = conv_out(w, kernel_for(s), s, 1)?;
    }
    Some((conv_out(h, 3, 1, 1)?, conv_out(w, 3, 1, 1)?))
}

impl<T: Scalar> Discriminator<T> {
    pub fn new(base_channels: usize) -> Self {
        let mut hidden = Vec::with_capacity(6);
        let mut c_in = 1;
        for (mult, stride) in HIDDEN_WIDTHS.into_iter().zip(HIDDEN_STRIDES) {
            let c_out = mult * base_channels;
            hidden.push(ConvBlock::new(
                Conv2d::new(c_in, c_out, kernel_for(stride), stride, 1),
                true,
                Activation::LeakyRelu(0.2),
            ));
            c_in = c_out;
        }
        Self {
            hidden,
            realism_head: Conv2d::new(c_in, 1, 3, 1, 1),
            stroke_head: Conv2d::new(c_in, NUM_STROKE_TYPES, 3, 1, 1),
        }
    }

    pub fn init_normal(&mut self, std: f64, rng: &mut impl Rng) {
        for b in &mut self.hidden {
            b.init_normal(std, rng);
        }
        self.realism_head.init_normal(std, rng);
        self.stroke_head.init_normal(std, rng);
    }

    pub fn conv_layer_count(&self) -> usize {
        self.hidden.len() + 2
    }

    pub fn conv_param_count(&self) -> usize {
        self.hidden.iter().map(|b| b.conv.param_count()).sum::<usize>()
            + self.realism_head.param_count()
            + self.stroke_head.param_count()
    }

    pub fn forward(&mut self, x: &Array4<T>, mode: Mode) -> Result<(DiscriminatorOutput<T>, DiscriminatorCache<T>)> {
        let (b, c, h, w) = x.dim();
        if c != 1 || realism_map_size(h, w).is_none() {
            return Err(shape_mismatch("(B, 1, H, W) with H, W >= 8", x.dim()));
        }
        let mut caches = Vec::with_capacity(self.hidden.len());
        let mut y = x.clone();
        for blk in &mut self.hidden {
            let (z, c) = blk.forward(&y, mode)?;
            caches.push(c);
            y = z;
        }
        let (realism_logits, realism_cache) = self.realism_head.forward(&y)?;
        let realism = realism_logits.mapv(sigmoid);
        let (stroke_map, stroke_cache) = self.stroke_head.forward(&y)?;
        let (_, _, sh, sw) = stroke_map.dim();
        let area = T::from_usize(sh * sw).expect("area");
        let mut stroke_logits = Array2::zeros((b, NUM_STROKE_TYPES));
        for ((bi, k), v) in stroke_logits.indexed_iter_mut() {
            *v = stroke_map.slice(ndarray::s![bi, k, .., ..]).sum() / area;
        }
        let stroke = stroke_logits.mapv(sigmoid);
        Ok((
            DiscriminatorOutput {
                realism_logits,
                realism,
                stroke_logits,
                stroke,
            },
            DiscriminatorCache {
                hidden: caches,
                realism: realism_cache,
                stroke: stroke_cache,
                stroke_map: (sh, sw),
            },
        ))
    }

    /// Back-propagates gradients given with respect to the two heads' logits.
    pub fn backward(
        &mut self,
        cache: &DiscriminatorCache<T>,
        d_realism_logits: &Array4<T>,
        d_stroke_logits: &Array2<T>,
    ) -> Array4<T> {
        let mut g = self.realism_head.backward(&cache.realism, d_realism_logits);
        let (sh, sw) = cache.stroke_map;
        let b = d_stroke_logits.nrows();
        let area = T::from_usize(sh * sw).expect("area");
        let mut d_map = Array4::zeros((b, NUM_STROKE_TYPES, sh, sw));
        for (mut img, row) in d_map.axis_iter_mut(Axis(0)).zip(d_stroke_logits.axis_iter(Axis(0))) {
            for (mut ch, &d) in img.axis_iter_mut(Axis(0)).zip(row.iter()) {
                ch.fill(d / area);
            }
        }
        g += &self.stroke_head.backward(&cache.stroke, &d_map);
        for (blk, c) in self.hidden.iter_mut().zip(&cache.hidden).rev() {
            g = blk.backward(c, &g);
        }
        g
    }
}

impl<T: Scalar> Parameterized<T> for Discriminator<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        for (i, b) in self.hidden.iter().enumerate() {
            b.visit(&join(prefix, &format!("hidden{i}")), f);
        }
        self.realism_head.visit(&join(prefix, "realism_head"), f);
        self.stroke_head.visit(&join(prefix, "stroke_head"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        for (i, b) in self.hidden.iter_mut().enumerate() {
            b.visit_mut(&join(prefix, &format!("hidden{i}")), f);
        }
        self.realism_head.visit_mut(&join(prefix, "realism_head"), f);
        self.stroke_head.visit_mut(&join(prefix, "stroke_head"), f);
    }
}
