//! Independent reference implementations the library is checked against.

use glyphgan::stroke::StrokeTable;
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` entries with 1..=6 stroke ids each (duplicates allowed), from a narrow id
/// range so that collisions actually occur.
pub fn random_stroke_entries(n: usize, seed: u64) -> Vec<(char, Vec<u8>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let c = char::from_u32(0x4E00 + i as u32).unwrap();
            let hi = if i % 3 == 0 { 6 } else { 32 };
            let len = rng.gen_range(1..=6);
            (c, (0..len).map(|_| rng.gen_range(1..=hi)).collect())
        })
        .collect()
}

/// Bit `k` is set iff stroke type `k + 1` occurs in the list.
pub fn membership_bits(strokes: &[u8]) -> [bool; 32] {
    let mut bits = [false; 32];
    for (k, b) in bits.iter_mut().enumerate() {
        *b = strokes.iter().any(|&s| s as usize == k + 1);
    }
    bits
}

/// Groups of characters with equal stroke sets, by comparing every pair.
pub fn pairwise_collisions(table: &StrokeTable) -> Vec<Vec<char>> {
    let entries: Vec<(char, [bool; 32])> = table.entries().map(|(c, s)| (c, membership_bits(s))).collect();
    let mut taken = vec![false; entries.len()];
    let mut groups = Vec::new();
    for i in 0..entries.len() {
        if taken[i] {
            continue;
        }
        let mut group = vec![entries[i].0];
        for j in i + 1..entries.len() {
            if !taken[j] && entries[i].1 == entries[j].1 {
                taken[j] = true;
                group.push(entries[j].0);
            }
        }
        if group.len() > 1 {
            groups.push(group);
        }
    }
    groups.sort();
    groups
}

pub fn psnr_naive(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mse = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        100.0
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

/// Mean over all 8×8 windows, each computed with two-pass moments.
pub fn ssim_naive(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (h, w) = a.dim();
    let mut total = 0.0;
    let mut windows = 0;
    for y0 in 0..=h - 8 {
        for x0 in 0..=w - 8 {
            let pa: Vec<f64> = (0..64).map(|k| a[[y0 + k / 8, x0 + k % 8]]).collect();
            let pb: Vec<f64> = (0..64).map(|k| b[[y0 + k / 8, x0 + k % 8]]).collect();
            let ma = pa.iter().sum::<f64>() / 64.0;
            let mb = pb.iter().sum::<f64>() / 64.0;
            let va = pa.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / 64.0;
            let vb = pb.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / 64.0;
            let cov = pa.iter().zip(&pb).map(|(p, q)| (p - ma) * (q - mb)).sum::<f64>() / 64.0;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            windows += 1;
        }
    }
    total / windows as f64
}

/// Square root of a matrix with positive real spectrum by Denman–Beavers iteration.
pub fn sqrtm_denman_beavers(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..100 {
        let yi = y.clone().try_inverse().expect("invertible iterate");
        let zi = z.clone().try_inverse().expect("invertible iterate");
        let ny = (&y + zi) * 0.5;
        let nz = (&z + yi) * 0.5;
        let done = (&ny - &y).norm() < 1e-14 * ny.norm();
        y = ny;
        z = nz;
        if done {
            break;
        }
    }
    y
}

/// Textbook FID: unbiased covariances and `(Σ₁Σ₂)^{1/2}` of the unsymmetrized product.
pub fn fid_reference(x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let stats = |m: &Array2<f64>| {
        let (n, d) = m.dim();
        let mu: Vec<f64> = (0..d).map(|j| m.column(j).sum() / n as f64).collect();
        let cov = DMatrix::from_fn(d, d, |i, j| {
            (0..n).map(|r| (m[[r, i]] - mu[i]) * (m[[r, j]] - mu[j])).sum::<f64>() / (n - 1) as f64
        });
        (mu, cov)
    };
    let (m1, s1) = stats(x);
    let (m2, s2) = stats(y);
    let diff: f64 = m1.iter().zip(&m2).map(|(a, b)| (a - b).powi(2)).sum();
    let covmean = sqrtm_denman_beavers(&(&s1 * &s2));
    diff + s1.trace() + s2.trace() - 2.0 * covmean.trace()
}
