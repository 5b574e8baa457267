//! Smallest eigenpairs of Hermitian pencils `K v = λ M v`.
//!
//! [`smallest_eigs`] is a matrix-free locally optimal block preconditioned
//! conjugate gradient iteration; [`dense_eigs`] is the dense reference used
//! on small problems and in tests.

mod block;
mod dense;
mod lobpcg;

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use rayon::prelude::*;

pub use block::Block;
pub use dense::{dense_eigs, generalized_eigen, DENSE_EIG_CAP};
pub use lobpcg::{smallest_eigs, EigenOptions};

use crate::assembly::{HermitianForm, KronForm};
use crate::{Error, Result, C64};

/// A linear map applied to vectors; used for stiffness, mass and
/// preconditioner alike.
pub trait Operator: Sync {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[C64], y: &mut [C64]);
    /// Real diagonal, when cheaply available.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

impl Operator for HermitianForm {
    fn dim(&self) -> usize {
        HermitianForm::dim(self)
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        self.matvec(x, y)
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(HermitianForm::diagonal(self).iter().map(|v| v.re).collect())
    }
}

impl Operator for KronForm {
    fn dim(&self) -> usize {
        KronForm::dim(self)
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        self.matvec(x, y)
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(KronForm::diagonal(self))
    }
}

/// Dense matrices act as operators too (tests and small problems).
impl Operator for Mat<C64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..self.ncols()).map(|j| self[(i, j)] * x[j]).sum();
        }
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        Some((0..self.nrows()).map(|i| self[(i, i)].re).collect())
    }
}

/// Operator given by a closure.
pub struct FnOperator<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[C64], &mut [C64]) + Sync> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(&[C64], &mut [C64]) + Sync> Operator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        (self.f)(x, y)
    }
}

/// Diagonal scaling `y = x / d`.
pub struct Jacobi {
    inv: Vec<f64>,
}

impl Jacobi {
    pub fn new(diag: &[f64]) -> Self {
        Self {
            inv: diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect(),
        }
    }
}

impl Operator for Jacobi {
    fn dim(&self) -> usize {
        self.inv.len()
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        for ((yi, xi), s) in y.iter_mut().zip(x).zip(&self.inv) {
            *yi = xi * *s;
        }
    }
}

/// Oblique projector `P x = x − Y G⁻¹ (EY)ᴴ x` with `G = Yᴴ E Y`, removing
/// the span of `Y` along its `E`-orthogonal complement. With `E = M` and
/// `Y` a known kernel this is the usual `M`-orthogonal deflation; with `E`
/// an energy form it restricts a problem to the `E`-orthogonal complement
/// of `span Y`.
///
/// Columns of `Y` and `EY` are stored sparsely, so a basis of many local
/// vectors costs little more than its nonzeros.
#[derive(Debug, Clone)]
pub struct Deflation {
    n: usize,
    y: Vec<SparseColumn>,
    ey: Vec<SparseColumn>,
    g_inv: Mat<C64>,
}

type SparseColumn = Vec<(usize, C64)>;

fn sparsify(v: &[C64]) -> SparseColumn {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != C64::new(0.0, 0.0))
        .map(|(i, x)| (i, *x))
        .collect()
}

fn sparse_dot(col: &SparseColumn, x: &[C64]) -> C64 {
    col.iter().map(|&(i, v)| v.conj() * x[i]).sum()
}

impl Deflation {
    pub fn new(y: Block, e: &dyn Operator) -> Result<Self> {
        let n = y.nrows();
        let cols = y.columns().map(sparsify).collect();
        Self::from_sparse(n, cols, e)
    }

    /// Builds the projector from columns given as `(index, value)` lists.
    pub fn from_sparse(n: usize, mut y: Vec<Vec<(usize, C64)>>, e: &dyn Operator) -> Result<Self> {
        y.iter_mut().for_each(|c| c.sort_by_key(|&(i, _)| i));
        if e.dim() != n || y.iter().flatten().any(|&(i, _)| i >= n) {
            return Err(Error::Parameter("deflation basis does not match the operator".into()));
        }
        let ey: Vec<SparseColumn> = y
            .par_iter()
            .map(|col| {
                let mut dense = vec![C64::new(0.0, 0.0); n];
                for &(i, v) in col {
                    dense[i] = v;
                }
                let mut out = vec![C64::new(0.0, 0.0); n];
                e.apply_into(&dense, &mut out);
                sparsify(&out)
            })
            .collect();
        let p = y.len();
        let mut g = Mat::<C64>::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                let mut gij = C64::new(0.0, 0.0);
                // Yᵢᴴ (E Yⱼ), merged over the two sorted index lists
                let (a, b) = (&y[i], &ey[j]);
                let (mut s, mut t) = (0, 0);
                while s < a.len() && t < b.len() {
                    match a[s].0.cmp(&b[t].0) {
                        std::cmp::Ordering::Less => s += 1,
                        std::cmp::Ordering::Greater => t += 1,
                        std::cmp::Ordering::Equal => {
                            gij += a[s].1.conj() * b[t].1;
                            s += 1;
                            t += 1;
                        }
                    }
                }
                g[(i, j)] = gij;
            }
        }
        let g = block::hermitian_part(&g);
        let llt = g
            .llt(Side::Lower)
            .map_err(|err| Error::Factorization(format!("deflation basis is degenerate: {err:?}")))?;
        Ok(Self {
            n,
            y,
            ey,
            g_inv: llt.inverse(),
        })
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// Column `j` of `Y` as a dense vector.
    pub fn basis_vector(&self, j: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.n];
        for &(i, x) in &self.y[j] {
            v[i] = x;
        }
        v
    }

    fn correct_vec(&self, left: &[SparseColumn], right: &[SparseColumn], x: &mut [C64]) {
        let c: Vec<C64> = right.iter().map(|col| sparse_dot(col, x)).collect();
        let p = self.dim();
        for (i, col) in left.iter().enumerate() {
            let d: C64 = (0..p).map(|j| self.g_inv[(i, j)] * c[j]).sum();
            for &(r, v) in col {
                x[r] -= v * d;
            }
        }
    }

    fn correct(&self, left: &[SparseColumn], right: &[SparseColumn], x: &mut Block) {
        if self.dim() == 0 {
            return;
        }
        x.columns_mut()
            .collect::<Vec<_>>()
            .into_par_iter()
            .for_each(|col| self.correct_vec(left, right, col));
    }

    /// `X ← P X`
    pub fn project(&self, x: &mut Block) {
        self.correct(&self.y, &self.ey, x)
    }

    /// `R ← Pᴴ R`, the projector acting on residual functionals.
    pub fn project_dual(&self, r: &mut Block) {
        self.correct(&self.ey, &self.y, r)
    }

    pub fn project_vec(&self, x: &mut [C64]) {
        if self.dim() > 0 {
            self.correct_vec(&self.y, &self.ey, x);
        }
    }

    /// `Yᴴ E x` for every basis column; all zero exactly when `x` lies in
    /// the range of the projector.
    pub fn constraint_values(&self, x: &[C64]) -> Vec<C64> {
        self.ey.iter().map(|col| sparse_dot(col, x)).collect()
    }
}

/// Ascending eigenvalues with residuals and `M`-orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    /// `‖Kv − λMv‖_{diag(M)⁻¹} / (‖v‖_M · max(1, |λ|))`
    pub residuals: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub iterations: usize,
}

impl SpectralResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Prepends a known eigenpair (for instance a deflated kernel vector).
    pub fn prepend(&mut self, value: f64, vector: Vec<C64>) {
        self.eigenvalues.insert(0, value);
        self.residuals.insert(0, 0.0);
        self.vectors.insert(0, vector);
    }

    pub fn truncate(&mut self, k: usize) {
        self.eigenvalues.truncate(k);
        self.residuals.truncate(k);
        self.vectors.truncate(k);
    }
}

/// `‖r‖` in the `diag(M)⁻¹` norm.
pub(crate) fn weighted_norm(r: &[C64], mdiag: &[f64]) -> f64 {
    r.iter().zip(mdiag).map(|(v, d)| v.norm_sqr() / d).sum::<f64>().sqrt()
}
