//! Small Hermitian matrix helpers (N <= 3 in practice).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = nalgebra::DVector<Complex64>;

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn from_real(rows: &[Vec<f64>]) -> Result<CMat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Structural(
            "matrix must be square and non-empty".into(),
        ));
    }
    Ok(CMat::from_fn(n, n, |i, j| Complex64::new(rows[i][j], 0.0)))
}

pub fn diag(values: &[f64]) -> CMat {
    let n = values.len();
    CMat::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(values[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    (0..m.nrows())
        .all(|i| (0..m.ncols()).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= tol * scale))
}

/// `m^t` for Hermitian positive definite `m`, via eigendecomposition.
pub fn hermitian_power(m: &CMat, t: f64) -> Result<CMat> {
    let n = m.nrows();
    if is_diagonal(m) {
        let mut out = CMat::zeros(n, n);
        for i in 0..n {
            let v = m[(i, i)].re;
            if !(v > 0.0) {
                return Err(Error::DegenerateWeight(format!(
                    "non-positive eigenvalue {v:e}"
                )));
            }
            out[(i, i)] = Complex64::new(v.powf(t), 0.0);
        }
        return Ok(out);
    }
    let eig = m.clone().symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        if !(lam > 0.0) {
            return Err(Error::DegenerateWeight(format!(
                "non-positive eigenvalue {lam:e}"
            )));
        }
        let f = lam.powf(t);
        for i in 0..n {
            scaled[(i, j)] *= f;
        }
    }
    Ok(&scaled * eig.eigenvectors.adjoint())
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

fn is_diagonal(m: &CMat) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == Complex64::new(0.0, 0.0)))
}

/// Spectral (operator 2-) norm.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    let g = m.adjoint() * m;
    let lam = hermitian_eigenvalues(&g);
    lam.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Structural("singular matrix".into()))
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn mat_vec(m: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    let n = m.nrows();
    (0..n)
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_roundtrip_on_full_hermitian() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.5, 0.3),
                Complex64::new(0.5, -0.3),
                Complex64::new(1.0, 0.0),
            ],
        );
        let p = 3.0;
        let root = hermitian_power(&m, 1.0 / p).unwrap();
        let back = &root * &root * &root;
        assert!((back - &m).norm() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_diag() {
        assert!((spectral_norm(&diag(&[0.5, -3.0])) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_power_is_degenerate() {
        assert!(matches!(
            hermitian_power(&diag(&[1.0, 0.0]), 0.5),
            Err(Error::DegenerateWeight(_))
        ));
    }
}
