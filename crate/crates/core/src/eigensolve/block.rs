use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par};
use rayon::prelude::*;

use super::Operator;
use crate::C64;

/// Column-major `n × m` block of vectors stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    n: usize,
    m: usize,
    data: Vec<C64>,
}

impl Block {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            data: vec![C64::new(0.0, 0.0); n * m],
        }
    }

    pub fn from_columns(n: usize, cols: &[Vec<C64>]) -> Self {
        let mut b = Self::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            b.col_mut(j).copy_from_slice(c);
        }
        b
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.m
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks(self.n.max(1)).take(self.m)
    }

    pub fn columns_mut(&mut self) -> impl Iterator<Item = &mut [C64]> {
        let m = self.m;
        self.data.chunks_mut(self.n.max(1)).take(m)
    }

    pub fn as_ref(&self) -> MatRef<'_, C64> {
        MatRef::from_column_major_slice(&self.data, self.n, self.m)
    }

    pub fn as_mut(&mut self) -> MatMut<'_, C64> {
        MatMut::from_column_major_slice_mut(&mut self.data, self.n, self.m)
    }

    pub fn select(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.n, cols.len());
        for (k, &j) in cols.iter().enumerate() {
            out.col_mut(k).copy_from_slice(self.col(j));
        }
        out
    }

    /// Horizontal concatenation.
    pub fn hcat(parts: &[&Block]) -> Self {
        let n = parts.first().map_or(0, |b| b.n);
        let mut data = Vec::with_capacity(n * parts.iter().map(|b| b.m).sum::<usize>());
        for b in parts {
            assert_eq!(b.n, n);
            data.extend_from_slice(&b.data);
        }
        let m = data.len() / n.max(1);
        Self { n, m, data }
    }

    pub fn into_columns(self) -> Vec<Vec<C64>> {
        let n = self.n;
        (0..self.m).map(|j| self.data[j * n..(j + 1) * n].to_vec()).collect()
    }

    /// `self · c` for a small coefficient matrix `c`.
    pub fn times(&self, c: MatRef<'_, C64>) -> Self {
        let mut out = Self::zeros(self.n, c.ncols());
        if self.m > 0 {
            matmul(out.as_mut(), Accum::Replace, self.as_ref(), c, C64::new(1.0, 0.0), Par::Seq);
        }
        out
    }

    /// `selfᴴ · other`
    pub fn inner(&self, other: &Block) -> Mat<C64> {
        let mut out = Mat::<C64>::zeros(self.m, other.m);
        if self.n > 0 {
            matmul(
                out.as_mut(),
                Accum::Replace,
                self.as_ref().adjoint(),
                other.as_ref(),
                C64::new(1.0, 0.0),
                Par::Seq,
            );
        }
        out
    }

    /// Applies `op` to every column.
    pub fn apply(&self, op: &dyn Operator) -> Self {
        let mut out = Self::zeros(self.n, self.m);
        if self.n == 0 {
            return out;
        }
        out.data
            .par_chunks_mut(self.n)
            .zip(self.data.par_chunks(self.n))
            .for_each(|(y, x)| op.apply_into(x, y));
        out
    }
}

/// Dense Hermitian part `(G + Gᴴ)/2`.
pub(crate) fn hermitian_part(g: &Mat<C64>) -> Mat<C64> {
    Mat::from_fn(g.nrows(), g.ncols(), |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5)
}
