use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, MatRef, Par, Side};

use super::block::hermitian_part;
use super::SpectralResult;
use crate::{Error, Result, C64};

pub const DENSE_EIG_CAP: usize = 5000;

/// Eigenvalues (ascending) and vectors `Q` of the Hermitian pencil `(K, M)`
/// with `M` positive definite, normalised so that `Qᴴ M Q = I`.
pub fn generalized_eigen(k: MatRef<'_, C64>, m: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let n = k.nrows();
    let mh = hermitian_part(&m.to_owned());
    let llt = mh
        .llt(Side::Lower)
        .map_err(|e| Error::Factorization(format!("mass matrix not positive definite: {e:?}")))?;
    let l = llt.L();
    let mut y = hermitian_part(&k.to_owned());
    solve_lower_triangular_in_place(l, y.as_mut(), Par::Seq);
    let mut z = y.adjoint().to_owned();
    solve_lower_triangular_in_place(l, z.as_mut(), Par::Seq);
    let c = hermitian_part(&z.adjoint().to_owned());
    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Factorization(format!("dense eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    let mut q = evd.U().to_owned();
    solve_upper_triangular_in_place(l.adjoint(), q.as_mut(), Par::Seq);
    Ok((values, q))
}

/// Transformation `T` with `Tᴴ G T = I` on the numerically nonsingular part
/// of a Hermitian positive semi-definite Gram matrix; directions whose
/// scaled eigenvalue falls below `drop_tol` relative to the largest are
/// discarded.
pub(crate) fn orthonormalizing_transform(g: &Mat<C64>, drop_tol: f64) -> Result<Mat<C64>> {
    let n = g.nrows();
    let d: Vec<f64> = (0..n).map(|i| {
        let v = g[(i, i)].re;
        if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 }
    }).collect();
    let gs = Mat::from_fn(n, n, |i, j| {
        let v = (g[(i, j)] + g[(j, i)].conj()) * 0.5;
        v * (d[i] * d[j])
    });
    let evd = gs
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Factorization(format!("Gram eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let smax = (0..n).map(|i| s[i].re).fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n).filter(|&i| s[i].re > drop_tol * smax && s[i].re > 0.0).collect();
    Ok(Mat::from_fn(n, keep.len(), |i, c| {
        let j = keep[c];
        u[(i, j)] * (d[i] / s[j].re.sqrt())
    }))
}

/// Full ascending spectrum of a dense Hermitian pencil, with residuals
/// `‖Kv − λMv‖ / max(1, |λ|)` measured in the `diag(M)⁻¹` norm for
/// `M`-normalised `v`.
pub fn dense_eigs(k: &Mat<C64>, m: &Mat<C64>) -> Result<SpectralResult> {
    let n = k.nrows();
    if n > DENSE_EIG_CAP {
        return Err(Error::DenseCap { dim: n, cap: DENSE_EIG_CAP });
    }
    if k.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::Parameter("pencil matrices must be square and of equal size".into()));
    }
    let (values, q) = generalized_eigen(k.as_ref(), m.as_ref())?;
    let kq = k * &q;
    let mq = m * &q;
    let mdiag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    let mut residuals = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for j in 0..n {
        let lam = values[j];
        let r: f64 = (0..n)
            .map(|i| (kq[(i, j)] - mq[(i, j)] * lam).norm_sqr() / mdiag[i])
            .sum::<f64>()
            .sqrt();
        residuals.push(r / lam.abs().max(1.0));
        vectors.push((0..n).map(|i| q[(i, j)]).collect());
    }
    Ok(SpectralResult {
        eigenvalues: values,
        residuals,
        vectors,
        iterations: 0,
    })
}
