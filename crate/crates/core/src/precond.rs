//! Sparse direct factorisations and the tensor-product preconditioner used
//! by the fibre eigen- and linear solvers.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::{Accum, Conj, Mat, MatMut, MatRef, Par, Side};

use crate::assembly::{FibreFactors, HermitianForm};
use crate::eigensolve::{generalized_eigen, Operator};
use crate::mesh::CoefficientProfile;
use crate::{Error, Result, C64};

/// Sparse Cholesky factorisation of a Hermitian positive definite form.
#[derive(Debug, Clone)]
pub struct SparseLlt {
    n: usize,
    llt: Llt<usize, C64>,
}

impl SparseLlt {
    pub fn new(a: &HermitianForm) -> Result<Self> {
        let mat = a.to_faer()?;
        let symbolic = SymbolicLlt::try_new(mat.symbolic(), Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Self::with_symbolic(a.dim(), symbolic, a)
    }

    fn with_symbolic(n: usize, symbolic: SymbolicLlt<usize>, a: &HermitianForm) -> Result<Self> {
        let mat = a.to_faer()?;
        let llt = Llt::try_new_with_symbolic(symbolic, mat.as_ref(), Side::Lower)
            .map_err(|e| Error::Factorization(format!("matrix is not positive definite: {e:?}")))?;
        Ok(Self { n, llt })
    }

    pub fn solve_in_place(&self, x: &mut [C64]) {
        let rhs = MatMut::from_column_major_slice_mut(x, self.n, 1);
        self.llt.solve_in_place_with_conj(Conj::No, rhs);
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

impl Operator for SparseLlt {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(x);
        self.solve_in_place(y);
    }
}

/// Exact inverse of `P₂ ⊗ M₁ + Q₂ ⊗ K₁` by diagonalising the axial pencil
/// `K₁ q = μ M₁ q`: one sparse Cholesky factorisation of `P₂ + μⱼ Q₂` per
/// axial mode, all sharing one symbolic analysis.
#[derive(Debug, Clone)]
pub struct KronPreconditioner {
    n2: usize,
    n1: usize,
    q: Mat<C64>,
    mu: Vec<f64>,
    factors: Vec<SparseLlt>,
}

impl KronPreconditioner {
    pub fn new(p2: &HermitianForm, q2: &HermitianForm, k1: &HermitianForm, m1: &HermitianForm) -> Result<Self> {
        let (n2, n1) = (p2.dim(), m1.dim());
        let (mu, q) = generalized_eigen(k1.to_dense().as_ref(), m1.to_dense().as_ref())?;
        let pattern = HermitianForm::linear_combination(&[(1.0, p2), (1.0, q2)]).to_faer()?;
        let symbolic = SymbolicLlt::try_new(pattern.symbolic(), Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let factors = mu
            .iter()
            .map(|&m| {
                let a = HermitianForm::linear_combination(&[(1.0, p2), (m, q2)]);
                SparseLlt::with_symbolic(n2, symbolic.clone(), &a)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n2, n1, q, mu, factors })
    }

    /// Preconditioner for `K + σM` of the fibre pencil at period `eps`. The
    /// axial coefficient in the fibre is replaced by the geometric mean of
    /// its extreme values, so the inverse is exact for constant profiles and
    /// spectrally equivalent with ratio `max a / min a` otherwise.
    pub fn for_pencil(f: &FibreFactors, eps: f64, shift: f64, profile: &CoefficientProfile) -> Result<Self> {
        let w = 1.0 / (eps * eps);
        let c = (profile.min_value() * profile.max_value()).sqrt();
        let p2 = HermitianForm::linear_combination(&[(w, &f.k2_matrix), (1.0, &f.k2_fibre), (shift, &f.m2_all)]);
        let q2 = HermitianForm::linear_combination(&[(w, &f.m2_matrix), (w * c, &f.m2_fibre)]);
        Self::new(&p2, &q2, &f.k1_unit, &f.m1)
    }

    pub fn axial_eigenvalues(&self) -> &[f64] {
        &self.mu
    }

    pub fn solve_into(&self, b: &[C64], x: &mut [C64]) {
        let (n2, n1) = (self.n2, self.n1);
        let one = C64::new(1.0, 0.0);
        // C = Qᴴ B with B the n₁ × n₂ view of b
        let mut c = Mat::<C64>::zeros(n1, n2);
        matmul(
            c.as_mut(),
            Accum::Replace,
            self.q.adjoint(),
            MatRef::from_column_major_slice(b, n1, n2),
            one,
            Par::Seq,
        );
        let mut col = vec![C64::new(0.0, 0.0); n2];
        let mut y = Mat::<C64>::zeros(n1, n2);
        for (j, f) in self.factors.iter().enumerate() {
            for (i2, v) in col.iter_mut().enumerate() {
                *v = c[(j, i2)];
            }
            f.solve_in_place(&mut col);
            for (i2, v) in col.iter().enumerate() {
                y[(j, i2)] = *v;
            }
        }
        matmul(
            MatMut::from_column_major_slice_mut(x, n1, n2),
            Accum::Replace,
            self.q.as_ref(),
            y.as_ref(),
            one,
            Par::Seq,
        );
    }
}

impl Operator for KronPreconditioner {
    fn dim(&self) -> usize {
        self.n2 * self.n1
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        self.solve_into(x, y)
    }
}

/// Preconditioned conjugate gradients for a Hermitian positive definite
/// `a`, stopped when `‖r‖_T ≤ tol·‖b‖_T` in the norm of the preconditioner
/// `T ≈ a⁻¹`, which tracks the energy norm of the error. The criterion is
/// confirmed on a freshly computed residual. Returns the solution and the
/// iteration count.
pub fn pcg(a: &dyn Operator, b: &[C64], precond: &dyn Operator, tol: f64, max_iter: usize) -> Result<(Vec<C64>, usize)> {
    let n = b.len();
    let dot = |u: &[C64], v: &[C64]| -> C64 { u.iter().zip(v).map(|(x, y)| x.conj() * y).sum() };
    let mut x = vec![C64::new(0.0, 0.0); n];
    let mut r = b.to_vec();
    let mut z = vec![C64::new(0.0, 0.0); n];
    precond.apply_into(&r, &mut z);
    let mut rz = dot(&r, &z).re;
    let target = tol * tol * rz;
    if rz == 0.0 {
        return Ok((x, 0));
    }
    let mut p = z.clone();
    let mut ap = vec![C64::new(0.0, 0.0); n];
    for it in 1..=max_iter {
        a.apply_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap).re;
        for i in 0..n {
            x[i] += p[i] * alpha;
            r[i] -= ap[i] * alpha;
        }
        precond.apply_into(&r, &mut z);
        let mut rz_new = dot(&r, &z).re;
        if rz_new <= target {
            a.apply_into(&x, &mut ap);
            r.iter_mut().zip(b).zip(&ap).for_each(|((ri, bi), ai)| *ri = bi - ai);
            precond.apply_into(&r, &mut z);
            rz_new = dot(&r, &z).re;
            if rz_new <= target {
                return Ok((x, it));
            }
            // restart from the true residual
            p.copy_from_slice(&z);
            rz = rz_new;
            continue;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + p[i] * beta;
        }
    }
    Err(Error::LinearSolve(format!(
        "conjugate gradients stalled after {max_iter} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::compose_pencil;
    use crate::mesh::{build_cross_section_mesh, build_interval_mesh, CellMeshes};

    #[test]
    fn exact_for_constant_profiles() {
        let m2 = build_cross_section_mesh(0.25, 0.1).unwrap();
        let p = CoefficientProfile::constant(2.0).unwrap();
        let m1 = build_interval_mesh(8, &p).unwrap();
        let meshes = CellMeshes { cross: &m2, axial: &m1 };
        let pencil = compose_pencil(0.2, [0.4, -0.3, 1.1], meshes, &p).unwrap();
        let pre = KronPreconditioner::for_pencil(&pencil.factors, 0.2, 1.0, &p).unwrap();
        let n = pencil.stiffness.dim();
        let x: Vec<C64> = (0..n).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let mut b = pencil.stiffness.apply(&x);
        for (bi, mi) in b.iter_mut().zip(pencil.mass.apply(&x)) {
            *bi += mi;
        }
        let mut y = vec![C64::new(0.0, 0.0); n];
        pre.solve_into(&b, &mut y);
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn sparse_cholesky_solves() {
        let a = HermitianForm::from_triplets(
            3,
            vec![
                (0, 0, C64::new(4.0, 0.0)),
                (0, 1, C64::new(1.0, 1.0)),
                (1, 0, C64::new(1.0, -1.0)),
                (1, 1, C64::new(3.0, 0.0)),
                (2, 2, C64::new(2.0, 0.0)),
            ],
        );
        let b = vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0), C64::new(-1.0, 0.5)];
        let x = SparseLlt::new(&a).unwrap().solve(&b);
        let r = a.apply(&x);
        assert!(r.iter().zip(&b).all(|(u, v)| (u - v).norm() < 1e-13));
    }
}
