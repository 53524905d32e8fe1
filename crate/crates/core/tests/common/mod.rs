//! Shared test helpers: finite-difference gradient checks and reference oracles.

#![allow(dead_code)]

pub mod oracles;

use glyphgan::losses::{
    adversarial_loss, adversarial_loss_grad, cycle_loss, cycle_loss_grad, discriminator_adv_from_logits, fs3_loss,
    fs3_loss_grad, generator_adv_from_logits, stroke_loss, stroke_loss_grad, GeneratorAdvLoss,
};
use glyphgan::model::{Discriminator, Generator};
use glyphgan::nn::{Activation, BatchNorm2d, Conv2d, ConvBlock, ConvTranspose2d, DeconvBlock, Mode, Param, Parameterized, ResBlock};
use ndarray::{Array2, Array4, ArrayD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-3;
/// Whole networks stack many ReLU kinks; a 1e-3 step crosses some of them.
pub const NETWORK_FD_STEP: f64 = 1e-6;
pub const GRAD_TOL: f64 = 1e-4;
/// Roundoff of a central difference at [`NETWORK_FD_STEP`] on O(1) objectives.
const NETWORK_NOISE_FLOOR: f64 = 1e-4;
const COORDS_PER_TENSOR: usize = 10;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    rel_err_floor(analytic, numeric, 1e-7)
}

fn rel_err_floor(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn random4(rng: &mut ChaCha8Rng, shape: (usize, usize, usize, usize)) -> Array4<f64> {
    Array4::from_shape_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn picks(rng: &mut ChaCha8Rng, len: usize) -> Vec<usize> {
    if len <= COORDS_PER_TENSOR {
        (0..len).collect()
    } else {
        (0..COORDS_PER_TENSOR).map(|_| rng.gen_range(0..len)).collect()
    }
}

fn perturb<M: Parameterized<f64>>(m: &mut M, tensor: usize, idx: usize, delta: f64) {
    let mut k = 0;
    m.visit_mut("", &mut |_, p: &mut Param<f64>| {
        if p.trainable {
            if k == tensor {
                let v = p.value.as_slice_mut().expect("contiguous parameter");
                v[idx] += delta;
            }
            k += 1;
        }
    });
}

/// Compares the analytic gradient of `L = Σ r ⊙ f(x)` (w.r.t. input and every
/// trainable tensor) with central differences. `run` does forward, and when `dy`
/// is given also backward, returning `(L, dx)`.
pub fn check_module<M>(mut module: M, x: Array4<f64>, seed: u64, step: f64, run: impl Fn(&mut M, &Array4<f64>, bool) -> (f64, Option<Array4<f64>>)) -> f64
where
    M: Parameterized<f64> + Clone,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    module.zero_grad();
    let (_, dx) = run(&mut module, &x, true);
    let dx = dx.expect("backward result");
    let mut grads: Vec<ArrayD<f64>> = Vec::new();
    module.visit("", &mut |_, p| {
        if p.trainable {
            grads.push(p.grad.clone())
        }
    });
    let eval = |m: &M, x: &Array4<f64>| run(&mut m.clone(), x, false).0;
    let floor = if step < FD_STEP { NETWORK_NOISE_FLOOR } else { 1e-7 };
    let mut worst = 0.0f64;
    for i in picks(&mut rng, x.len()) {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp.as_slice_mut().unwrap()[i] += step;
        xm.as_slice_mut().unwrap()[i] -= step;
        let num = (eval(&module, &xp) - eval(&module, &xm)) / (2.0 * step);
        worst = worst.max(rel_err_floor(dx.as_slice().unwrap()[i], num, floor));
    }
    for (t, g) in grads.iter().enumerate() {
        for i in picks(&mut rng, g.len()) {
            let mut mp = module.clone();
            perturb(&mut mp, t, i, step);
            let mut mm = module.clone();
            perturb(&mut mm, t, i, -step);
            let num = (eval(&mp, &x) - eval(&mm, &x)) / (2.0 * step);
            worst = worst.max(rel_err_floor(g.as_slice().unwrap()[i], num, floor));
        }
    }
    worst
}

fn weighted(y: &Array4<f64>, r: &Array4<f64>) -> f64 {
    (y * r).sum()
}

fn init<M>(m: &mut M, seed: u64, std: f64)
where
    M: Parameterized<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    m.visit_mut("", &mut |name, p| {
        if p.trainable && !name.ends_with("gamma") {
            p.value.mapv_inplace(|_| rng.gen_range(-std..std));
        }
    });
}

#[derive(Clone)]
pub struct Pair<A, B>(A, B);

impl<A: Parameterized<f64>, B: Parameterized<f64>> Parameterized<f64> for Pair<A, B> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<f64>)) {
        self.0.visit(&format!("{prefix}a"), f);
        self.1.visit(&format!("{prefix}b"), f);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<f64>)) {
        self.0.visit_mut(&format!("{prefix}a"), f);
        self.1.visit_mut(&format!("{prefix}b"), f);
    }
}

pub fn conv_pair() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut a = Conv2d::<f64>::new(2, 3, 4, 2, 1);
    let mut b = Conv2d::<f64>::new(3, 2, 3, 1, 1);
    init(&mut a, 11, 0.5);
    init(&mut b, 12, 0.5);
    let x = random4(&mut rng, (2, 2, 8, 8));
    let r = random4(&mut rng, (2, 2, 4, 4));
    check_module(Pair(a, b), x, 1, FD_STEP, move |p, x, back| {
        let (h, ca) = p.0.forward(x).unwrap();
        let (y, cb) = p.1.forward(&h).unwrap();
        let l = weighted(&y, &r);
        if !back {
            return (l, None);
        }
        let dh = p.1.backward(&cb, &r);
        (l, Some(p.0.backward(&ca, &dh)))
    })
}

pub fn deconv_pair() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut a = ConvTranspose2d::<f64>::new(2, 3, 4, 2, 1);
    let mut b = ConvTranspose2d::<f64>::new(3, 1, 4, 2, 1);
    init(&mut a, 21, 0.5);
    init(&mut b, 22, 0.5);
    let x = random4(&mut rng, (2, 2, 3, 3));
    let r = random4(&mut rng, (2, 1, 12, 12));
    check_module(Pair(a, b), x, 2, FD_STEP, move |p, x, back| {
        let (h, ca) = p.0.forward(x).unwrap();
        let (y, cb) = p.1.forward(&h).unwrap();
        let l = weighted(&y, &r);
        if !back {
            return (l, None);
        }
        let dh = p.1.backward(&cb, &r);
        (l, Some(p.0.backward(&ca, &dh)))
    })
}

pub fn batchnorm_pair() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut a = BatchNorm2d::<f64>::new(2);
    let mut b = BatchNorm2d::<f64>::new(2);
    init(&mut a, 31, 0.5);
    init(&mut b, 32, 0.5);
    for bn in [&mut a, &mut b] {
        bn.gamma.value.mapv_inplace(|_| rng.gen_range(0.5..1.5));
    }
    let x = random4(&mut rng, (3, 2, 3, 3));
    let r = random4(&mut rng, (3, 2, 3, 3));
    check_module(Pair(a, b), x, 3, FD_STEP, move |p, x, back| {
        let (h, ca) = p.0.forward(x, Mode::Train);
        let h = h.mapv(|v| v * v + v);
        let (y, cb) = p.1.forward(&h, Mode::Train);
        let l = weighted(&y, &r);
        if !back {
            return (l, None);
        }
        let mut dh = p.1.backward(&cb, &r);
        // chain through the v² + v coupling so the second norm sees a non-affine input
        let (h0, _) = p.0.clone().forward(x, Mode::Train);
        dh.zip_mut_with(&h0, |d, &v| *d *= 2.0 * v + 1.0);
        (l, Some(p.0.backward(&ca, &dh)))
    })
}

pub fn conv_block_pair() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut a = ConvBlock::<f64>::new(Conv2d::new(1, 3, 4, 2, 1), true, Activation::LeakyRelu(0.2));
    let mut b = ConvBlock::<f64>::new(Conv2d::new(3, 2, 3, 1, 1), true, Activation::LeakyRelu(0.2));
    init(&mut a, 41, 0.5);
    init(&mut b, 42, 0.5);
    let x = random4(&mut rng, (2, 1, 8, 8));
    let r = random4(&mut rng, (2, 2, 4, 4));
    check_module(Pair(a, b), x, 4, FD_STEP, move |p, x, back| {
        let (h, ca) = p.0.forward(x, Mode::Train).unwrap();
        let (y, cb) = p.1.forward(&h, Mode::Train).unwrap();
        let l = weighted(&y, &r);
        if !back {
            return (l, None);
        }
        let dh = p.1.backward(&cb, &r);
        (l, Some(p.0.backward(&ca, &dh)))
    })
}

pub fn deconv_block_pair() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut a = DeconvBlock::<f64>::new(ConvTranspose2d::new(2, 2, 4, 2, 1), true, Activation::Relu);
    let mut b = DeconvBlock::<f64>::new(ConvTranspose2d::new(2, 1, 4, 2, 1), false, Activation::Tanh);
    init(&mut a, 51, 0.5);
    init(&mut b, 52, 0.5);
    let x = random4(&mut rng, (2, 2, 3, 3));
    let r = random4(&mut rng, (2, 1, 12, 12));
    check_module(Pair(a, b), x, 5, FD_STEP, move |p, x, back| {
        let (h, ca) = p.0.forward(x, Mode::Train).unwrap();
        let (y, cb) = p.1.forward(&h, Mode::Train).unwrap();
        let l = weighted(&y, &r);
        if !back {
            return (l, None);
        }
        let dh = p.1.backward(&cb, &r);
        (l, Some(p.0.backward(&ca, &dh)))
    })
}

pub fn res_block_pair() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut a = ResBlock::<f64>::new(2, true);
    let mut b = ResBlock::<f64>::new(2, true);
    init(&mut a, 61, 0.5);
    init(&mut b, 62, 0.5);
    let x = random4(&mut rng, (2, 2, 4, 4));
    let r = random4(&mut rng, (2, 2, 4, 4));
    check_module(Pair(a, b), x, 6, FD_STEP, move |p, x, back| {
        let (h, ca) = p.0.forward(x, Mode::Train).unwrap();
        let (y, cb) = p.1.forward(&h, Mode::Train).unwrap();
        let l = weighted(&y, &r);
        if !back {
            return (l, None);
        }
        let dh = p.1.backward(&cb, &r);
        (l, Some(p.0.backward(&ca, &dh)))
    })
}

pub fn generator_miniature() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut g = Generator::<f64>::new(2, 1);
    init(&mut g, 71, 0.5);
    let x = random4(&mut rng, (2, 1, 8, 8));
    let r = random4(&mut rng, (2, 1, 8, 8));
    check_module(g, x, 7, NETWORK_FD_STEP, move |g, x, back| {
        let (y, c) = g.forward(x, Mode::Train).unwrap();
        let l = weighted(&y, &r);
        (l, back.then(|| g.backward(&c, &r)))
    })
}

pub fn discriminator_miniature() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut d = Discriminator::<f64>::new(1);
    init(&mut d, 81, 0.5);
    let x = random4(&mut rng, (2, 1, 16, 16));
    let r_map = random4(&mut rng, (2, 1, 2, 2));
    let r_st = Array2::from_shape_fn((2, 32), |_| rng.gen_range(-1.0..1.0));
    check_module(d, x, 8, NETWORK_FD_STEP, move |d, x, back| {
        let (out, c) = d.forward(x, Mode::Train).unwrap();
        let l = weighted(&out.realism_logits, &r_map) + (&out.stroke_logits * &r_st).sum();
        (l, back.then(|| d.backward(&c, &r_map, &r_st)))
    })
}

/// Central differences of a scalar function of a flat 10-element input.
fn check_scalar(x: &[f64], f: impl Fn(&[f64]) -> f64, grad: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += FD_STEP;
        xm[i] -= FD_STEP;
        let num = (f(&xp) - f(&xm)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(grad[i], num));
    }
    worst
}

fn patch(seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..10).map(|_| rng.gen_range(lo..hi)).collect()
}

fn arr(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, v.len()), v.to_vec()).unwrap()
}

pub fn adversarial_probabilities() -> f64 {
    let real = patch(100, 0.1, 0.9);
    let fake = patch(101, 0.1, 0.9);
    let (gr, gf) = adversarial_loss_grad(&arr(&real), &arr(&fake));
    let a = check_scalar(&real, |v| adversarial_loss(&arr(v), &arr(&fake)).unwrap(), gr.as_slice().unwrap());
    let b = check_scalar(&fake, |v| adversarial_loss(&arr(&real), &arr(v)).unwrap(), gf.as_slice().unwrap());
    a.max(b)
}

pub fn adversarial_logits() -> f64 {
    let real = patch(102, -3.0, 3.0);
    let fake = patch(103, -3.0, 3.0);
    let (_, gr, gf) = discriminator_adv_from_logits(&arr(&real), &arr(&fake));
    let d = |r: &[f64], f: &[f64]| discriminator_adv_from_logits(&arr(r), &arr(f)).0;
    let mut worst = check_scalar(&real, |v| d(v, &fake), gr.as_slice().unwrap());
    worst = worst.max(check_scalar(&fake, |v| d(&real, v), gf.as_slice().unwrap()));
    for kind in [GeneratorAdvLoss::NonSaturating, GeneratorAdvLoss::Saturating] {
        let (_, g) = generator_adv_from_logits(&arr(&fake), kind);
        worst = worst.max(check_scalar(&fake, |v| generator_adv_from_logits(&arr(v), kind).0, g.as_slice().unwrap()));
    }
    worst
}

pub fn cycle() -> f64 {
    let x = patch(104, -1.0, 1.0);
    let rec = patch(105, -1.0, 1.0);
    let g = cycle_loss_grad(&arr(&x), &arr(&rec));
    check_scalar(&rec, |v| cycle_loss(&arr(&x), &arr(v)).unwrap(), g.as_slice().unwrap())
}

pub fn stroke() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let pred: Vec<f64> = (0..32).map(|_| rng.gen_range(0.05..0.95)).collect();
    let target: Vec<f64> = (0..32).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect();
    let g = stroke_loss_grad(&arr(&pred), &arr(&target));
    // perturb a 10-element patch of the 32 outputs
    let f = |v: &[f64]| {
        let mut p = pred.clone();
        p[..10].copy_from_slice(v);
        stroke_loss(&arr(&p), &arr(&target)).unwrap()
    };
    check_scalar(&pred[..10], f, &g.as_slice().unwrap()[..10])
}

pub fn fs3() -> f64 {
    let generated = patch(107, -1.0, 1.0);
    let truth = patch(108, -1.0, 1.0);
    let shape = (5, 2);
    let mask = [true, false, true, true, false];
    let a = |v: &[f64]| Array2::from_shape_vec(shape, v.to_vec()).unwrap();
    let g = fs3_loss_grad(&a(&generated), &a(&truth), &mask);
    check_scalar(&generated, |v| fs3_loss(&a(v), &a(&truth), &mask).unwrap(), g.as_slice().unwrap())
}

pub type GradCase = (&'static str, fn() -> f64);

pub const LOSS_CASES: [GradCase; 5] = [
    ("adversarial (probabilities)", adversarial_probabilities),
    ("adversarial (logits, D and both G forms)", adversarial_logits),
    ("cycle L1", cycle),
    ("stroke L2", stroke),
    ("few-shot L1", fs3),
];

pub const BLOCK_CASES: [GradCase; 8] = [
    ("conv ×2", conv_pair),
    ("transposed conv ×2", deconv_pair),
    ("batch norm ×2", batchnorm_pair),
    ("conv block ×2", conv_block_pair),
    ("deconv block ×2", deconv_block_pair),
    ("residual block ×2", res_block_pair),
    ("generator miniature", generator_miniature),
    ("discriminator miniature", discriminator_miniature),
];
