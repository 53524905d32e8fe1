use ndarray::{ArrayBase, Data, Ix2};

use crate::error::{shape_mismatch, Error, Result};
use crate::scalar::Scalar;

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 8;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        for v in iter {
            s.add(v);
        }
        s
    }
}

fn check_same<S1, S2, T>(a: &ArrayBase<S1, Ix2>, b: &ArrayBase<S2, Ix2>) -> Result<()>
where
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
{
    if a.dim() != b.dim() {
        return Err(shape_mismatch(a.dim(), b.dim()));
    }
    Ok(())
}

fn f<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Peak signal-to-noise ratio in dB of two images on `[0, max_value]`;
/// [`PSNR_CAP_DB`] when they are identical.
pub fn psnr<S1, S2, T>(a: &ArrayBase<S1, Ix2>, b: &ArrayBase<S2, Ix2>, max_value: f64) -> Result<f64>
where
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    T: Scalar,
{
    check_same(a, b)?;
    let se: CompensatedSum = a.iter().zip(b.iter()).map(|(&x, &y)| (f(x) - f(y)).powi(2)).collect();
    let mse = se.value() / a.len().max(1) as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (max_value * max_value / mse).log10()).min(PSNR_CAP_DB))
}

/// Mean SSIM over all `8×8` windows at stride 1 with uniform weights and
/// population (1/N) moments; `data_range` is `L`.
pub fn ssim<S1, S2, T>(a: &ArrayBase<S1, Ix2>, b: &ArrayBase<S2, Ix2>, data_range: f64) -> Result<f64>
where
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    T: Scalar,
{
    check_same(a, b)?;
    let (h, w) = a.dim();
    let k = SSIM_WINDOW;
    if h < k || w < k {
        return Err(Error::ImageTooSmall { got: h.min(w), window: k });
    }
    let a = a.mapv(f);
    let b = b.mapv(f);
    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let n = (k * k) as f64;
    // column sums of each moment over k rows, updated as the window slides down
    let mut total = CompensatedSum::default();
    for y in 0..=h - k {
        let mut cols = vec![[0.0f64; 5]; w];
        for (x, col) in cols.iter_mut().enumerate() {
            for yy in y..y + k {
                let (p, q) = (a[[yy, x]], b[[yy, x]]);
                col[0] += p;
                col[1] += q;
                col[2] += p * p;
                col[3] += q * q;
                col[4] += p * q;
            }
        }
        for x in 0..=w - k {
            let mut s = [0.0f64; 5];
            for col in &cols[x..x + k] {
                for i in 0..5 {
                    s[i] += col[i];
                }
            }
            total.add(ssim_from_sums(s, n, c1, c2));
        }
    }
    Ok(total.value() / ((h - k + 1) * (w - k + 1)) as f64)
}

fn ssim_from_sums(s: [f64; 5], n: f64, c1: f64, c2: f64) -> f64 {
    let (ma, mb) = (s[0] / n, s[1] / n);
    let va = s[2] / n - ma * ma;
    let vb = s[3] / n - mb * mb;
    let cov = s[4] / n - ma * mb;
    ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
}
