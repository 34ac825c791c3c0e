use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{CMatrix, CVector, C64};
use crate::error::{invalid, Error, Result};

/// Largest entrywise deviation `|a_ij - conj(a_ji)|`.
pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of the Hermitian part of `a`.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    hermitian_eigen(a)
        .0
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

fn spectral_map(a: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(a);
    let n = a.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        let v = vecs.column(k);
        let w = f(lam);
        for i in 0..n {
            let vi = v[i] * w;
            for j in 0..n {
                out[(i, j)] += vi * v[j].conj();
            }
        }
    }
    out
}

/// `a^{-1/2}` for a positive definite Hermitian matrix.
pub fn psd_inverse_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let (vals, _) = hermitian_eigen(a);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 1e-300 {
        return Err(Error::Numeric(format!(
            "inverse square root of a singular matrix (min eigenvalue {min:e})"
        )));
    }
    Ok(spectral_map(a, |l| 1.0 / l.sqrt()))
}

/// Principal square root of a PSD matrix; tiny negative eigenvalues are clipped.
pub fn psd_sqrt(a: &CMatrix) -> CMatrix {
    spectral_map(a, |l| l.max(0.0).sqrt())
}

/// Schatten-1 norm of a Hermitian matrix: the sum of absolute eigenvalues.
pub fn trace_norm(a: &CMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(invalid("trace norm of a non-square matrix"));
    }
    let dev = hermitian_deviation(a);
    if dev > 1e-8 {
        return Err(invalid(format!(
            "trace norm input is not Hermitian (deviation {dev:e})"
        )));
    }
    Ok(hermitian_eigen(a).0.iter().map(|l| l.abs()).sum())
}

/// Fidelity between a PSD operator and the rank-one projector `|i><i|`,
/// which reduces to `sqrt(m[i, i])`.
pub fn fidelity_rank1(m_el: &CMatrix, i: usize) -> Result<f64> {
    if i >= m_el.nrows() || !m_el.is_square() {
        return Err(invalid(format!(
            "index {i} out of range for a {}x{} matrix",
            m_el.nrows(),
            m_el.ncols()
        )));
    }
    let d = m_el[(i, i)].re;
    if d < -super::PSD_TOL {
        return Err(Error::Numeric(format!(
            "negative diagonal entry {d:e} in a PSD operator"
        )));
    }
    Ok(d.max(0.0).sqrt())
}

pub fn projector(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_ginibre<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}
