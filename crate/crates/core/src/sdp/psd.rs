//! Symmetric eigendecomposition and projection onto the PSD cone.
//!
//! Backed by faer's Hermitian EVD, always run single-threaded so results are
//! bitwise reproducible.

use faer::dyn_stack::{GlobalPodBuffer, PodStack};
use faer::linalg::evd::{compute_hermitian_evd, compute_hermitian_evd_req, ComputeVectors};
use faer::{Col, Mat, Parallelism};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const SYMMETRY_TOL: f64 = 1e-9;

pub(crate) struct SymEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Columns are eigenvectors, in the order of `values`.
    pub vectors: Mat<f64>,
}

fn evd(m: &Mat<f64>, vectors: bool) -> (Col<f64>, Option<Mat<f64>>) {
    let n = m.nrows();
    let mut s = Col::<f64>::zeros(n);
    let mut u = vectors.then(|| Mat::<f64>::zeros(n, n));
    let req = compute_hermitian_evd_req::<f64>(
        n,
        if vectors {
            ComputeVectors::Yes
        } else {
            ComputeVectors::No
        },
        Parallelism::None,
        Default::default(),
    )
    .expect("workspace size");
    let mut buf = GlobalPodBuffer::new(req);
    compute_hermitian_evd(
        m.as_ref(),
        s.as_mut(),
        u.as_mut().map(|u| u.as_mut()),
        Parallelism::None,
        PodStack::new(&mut buf),
        Default::default(),
    );
    (s, u)
}

pub(crate) fn sym_eigen(m: &Mat<f64>) -> SymEigen {
    let (s, u) = evd(m, true);
    let u = u.unwrap();
    let mut order: Vec<usize> = (0..s.nrows()).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values = order.iter().map(|&k| s[k]).collect();
    let vectors = Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, order[j])]);
    SymEigen { values, vectors }
}

/// Eigenvalues of a symmetric matrix, sorted descending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let (s, _) = evd(&to_faer(m), false);
    let mut v: Vec<f64> = (0..s.nrows()).map(|k| s[k]).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub(crate) fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub(crate) fn to_nalgebra(m: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).abs().max()
}

/// Overwrites `m` with its Frobenius-nearest PSD matrix; returns the
/// eigenvalues of the input (ascending).
pub(crate) fn project_psd_in_place(m: &mut Mat<f64>) -> Vec<f64> {
    let n = m.nrows();
    let eig = sym_eigen(m);
    let positive: Vec<usize> = (0..n).filter(|&k| eig.values[k] > 0.0).collect();
    if positive.len() == n {
        return eig.values;
    }
    if positive.len() * 2 <= n {
        // X = Σ λ⁺ u uᵀ
        let b = Mat::from_fn(n, positive.len(), |i, j| {
            let k = positive[j];
            eig.vectors[(i, k)] * eig.values[k].sqrt()
        });
        faer::linalg::matmul::matmul(
            m.as_mut(),
            b.as_ref(),
            b.transpose(),
            None,
            1.0,
            Parallelism::None,
        );
    } else {
        // X = M − Σ λ⁻ u uᵀ
        let negative: Vec<usize> = (0..n).filter(|&k| eig.values[k] <= 0.0).collect();
        let b = Mat::from_fn(n, negative.len(), |i, j| {
            let k = negative[j];
            eig.vectors[(i, k)] * (-eig.values[k]).sqrt()
        });
        faer::linalg::matmul::matmul(
            m.as_mut(),
            b.as_ref(),
            b.transpose(),
            Some(1.0),
            1.0,
            Parallelism::None,
        );
    }
    // symmetrize away rounding
    for j in 0..n {
        for i in j + 1..n {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
    eig.values
}

/// Frobenius-nearest positive semidefinite matrix to a symmetric `s`:
/// negative eigenvalues are clamped to zero.
pub fn project_psd(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !s.is_square() {
        return Err(Error::NotSymmetric(f64::INFINITY));
    }
    let asym = max_asymmetry(s);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let mut m = to_faer(&((s + s.transpose()) * 0.5));
    project_psd_in_place(&mut m);
    Ok(to_nalgebra(&m))
}
