//! Small dense complex matrix helpers for spatial covariance work.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>` (column-major); the hot loops
//! read the raw slice directly.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub fn zeros(m: usize) -> CMatrix {
    CMatrix::zeros(m, m)
}

pub fn identity(m: usize) -> CMatrix {
    CMatrix::identity(m, m)
}

/// `acc += weight * y y^H`
#[inline]
pub fn accumulate_outer(acc: &mut CMatrix, y: &[Complex64], weight: f64) {
    let m = y.len();
    let data = acc.as_mut_slice();
    for j in 0..m {
        let yj = y[j].conj() * weight;
        for i in 0..m {
            data[i + j * m] += y[i] * yj;
        }
    }
}

/// Real part of `z^H A z` (exact for Hermitian `A`).
#[inline]
pub fn quad_form(a: &CMatrix, z: &[Complex64]) -> f64 {
    let m = z.len();
    let data = a.as_slice();
    let mut acc = 0.0;
    for j in 0..m {
        let mut col = Complex64::new(0.0, 0.0);
        for i in 0..m {
            col += z[i].conj() * data[i + j * m];
        }
        acc += (col * z[j]).re;
    }
    acc
}

pub fn trace_re(a: &CMatrix) -> f64 {
    (0..a.nrows()).map(|i| a[(i, i)].re).sum()
}

/// Replace `a` by `(a + a^H) / 2`.
pub fn hermitize(a: &mut CMatrix) {
    let m = a.nrows();
    for i in 0..m {
        a[(i, i)].im = 0.0;
        for j in (i + 1)..m {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
}

/// Add `rel * trace(a) / M` to the diagonal.
pub fn load_diagonal(a: &mut CMatrix, rel: f64) {
    let m = a.nrows();
    let load = rel * trace_re(a) / m as f64;
    for i in 0..m {
        a[(i, i)].re += load;
    }
}

/// Inverse and log-determinant of a Hermitian positive-definite matrix.
pub fn inverse_logdet(a: &CMatrix) -> Option<(CMatrix, f64)> {
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    let mut logdet = 0.0;
    for i in 0..a.nrows() {
        let d = l[(i, i)].re;
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        logdet += 2.0 * d.ln();
    }
    Some((chol.inverse(), logdet))
}

/// Inverse of a general square matrix.
pub fn inverse(a: &CMatrix) -> Option<CMatrix> {
    a.clone().try_inverse()
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn eigenvalues_desc(a: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Principal eigenvector (largest eigenvalue) of a Hermitian matrix.
pub fn principal_eigenvector(a: &CMatrix) -> Vec<Complex64> {
    let eig = a.clone().symmetric_eigen();
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .expect("non-empty matrix");
    eig.eigenvectors.column(idx).iter().copied().collect()
}

/// `|<a, b>| / (|a| |b|)`
pub fn cosine_similarity(a: &[Complex64], b: &[Complex64]) -> f64 {
    let dot: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    dot.norm() / (na * nb)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
