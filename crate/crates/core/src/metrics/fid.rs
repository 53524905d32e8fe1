use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{ArrayBase, Data, Ix2};

use crate::error::{shape_mismatch, Error, Result};

/// Diagonal jitter added to both covariances when the first attempt is ill-conditioned.
pub const FID_JITTER: f64 = 1e-6;

/// Sample mean and unbiased covariance of the rows of `x` (zero covariance for one row).
pub fn mean_and_covariance<S: Data<Elem = f64>>(x: &ArrayBase<S, Ix2>) -> (DVector<f64>, DMatrix<f64>) {
    let (n, d) = x.dim();
    let mut mu = DVector::zeros(d);
    for row in x.rows() {
        for (m, &v) in mu.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    mu /= n.max(1) as f64;
    let mut cov = DMatrix::zeros(d, d);
    for row in x.rows() {
        let c = DVector::from_iterator(d, row.iter().zip(mu.iter()).map(|(&v, &m)| v - m));
        cov += &c * c.transpose();
    }
    if n > 1 {
        cov /= (n - 1) as f64;
    }
    (mu, cov)
}

/// Principal square root of a symmetric positive semi-definite matrix.
/// Returns `None` if an eigenvalue is clearly negative or non-finite.
fn sqrt_psd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if !v.is_finite() || *v < -1e-8 * scale {
            return None;
        }
        *v = v.max(0.0).sqrt();
    }
    Some(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose())
}

/// `Tr((Σ₁Σ₂)^{1/2})`, computed as `Tr((√Σ₁ Σ₂ √Σ₁)^{1/2})`, which has the same
/// eigenvalues and stays symmetric.
fn trace_sqrt_product(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Option<f64> {
    let r1 = sqrt_psd(s1)?;
    let inner = &r1 * s2 * &r1;
    let root = sqrt_psd(&inner)?;
    let t = root.trace();
    t.is_finite().then_some(t)
}

/// Fréchet distance between Gaussian fits of two feature sets:
/// `‖μ₁−μ₂‖² + Tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^{1/2})`, clamped at 0.
pub fn fid<S1, S2>(real: &ArrayBase<S1, Ix2>, fake: &ArrayBase<S2, Ix2>) -> Result<f64>
where
    S1: Data<Elem = f64>,
    S2: Data<Elem = f64>,
{
    if real.ncols() != fake.ncols() {
        return Err(shape_mismatch(format!("{} feature columns", real.ncols()), fake.dim()));
    }
    if real.nrows() == 0 || fake.nrows() == 0 {
        return Err(Error::DegenerateCovariance("empty feature set".into()));
    }
    let d = real.ncols();
    if real.nrows() <= d || fake.nrows() <= d {
        log::warn!(
            "FID with {} / {} samples for {d}-dimensional features; covariances are singular",
            real.nrows(),
            fake.nrows()
        );
    }
    let (m1, s1) = mean_and_covariance(real);
    let (m2, s2) = mean_and_covariance(fake);
    let diff = (&m1 - &m2).norm_squared();
    let tr = match trace_sqrt_product(&s1, &s2) {
        Some(t) => t,
        None => {
            let jitter = DMatrix::identity(d, d) * FID_JITTER;
            let (j1, j2) = (&s1 + &jitter, &s2 + &jitter);
            trace_sqrt_product(&j1, &j2)
                .ok_or_else(|| Error::DegenerateCovariance("matrix square root failed after jitter".into()))?
        }
    };
    let value = diff + s1.trace() + s2.trace() - 2.0 * tr;
    if !value.is_finite() {
        return Err(Error::DegenerateCovariance(format!("non-finite distance {value}")));
    }
    Ok(value.max(0.0))
}
