use std::sync::Arc;

use super::HermitianForm;
use crate::C64;

/// One term `w · (A₂ ⊗ A₁)` of a Kronecker-structured form.
#[derive(Debug, Clone)]
pub struct KronTerm {
    pub weight: f64,
    pub cross: Arc<HermitianForm>,
    pub axial: Arc<HermitianForm>,
}

/// Sum of weighted tensor products acting on vectors laid out as
/// `index = i₂ · n₁ + i₁` (cross-section index major, axial index minor).
/// The terms are never assembled into one 3D matrix.
#[derive(Debug, Clone)]
pub struct KronForm {
    n2: usize,
    n1: usize,
    terms: Vec<KronTerm>,
}

impl KronForm {
    pub fn new(n2: usize, n1: usize) -> Self {
        Self {
            n2,
            n1,
            terms: Vec::new(),
        }
    }

    pub fn with_term(mut self, weight: f64, cross: &Arc<HermitianForm>, axial: &Arc<HermitianForm>) -> Self {
        assert_eq!(cross.dim(), self.n2);
        assert_eq!(axial.dim(), self.n1);
        self.terms.push(KronTerm {
            weight,
            cross: Arc::clone(cross),
            axial: Arc::clone(axial),
        });
        self
    }

    pub fn terms(&self) -> &[KronTerm] {
        &self.terms
    }

    pub fn dim(&self) -> usize {
        self.n2 * self.n1
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n2, self.n1)
    }

    /// `y ← Σ w (A₂ ⊗ A₁) x`. Terms sharing an axial factor reuse one axial
    /// sweep.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        let (n2, n1) = (self.n2, self.n1);
        assert_eq!(x.len(), n2 * n1);
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let mut done = vec![false; self.terms.len()];
        let mut tmp = vec![C64::new(0.0, 0.0); n2 * n1];
        for t in 0..self.terms.len() {
            if done[t] {
                continue;
            }
            let axial = &self.terms[t].axial;
            for i2 in 0..n2 {
                axial.matvec(&x[i2 * n1..(i2 + 1) * n1], &mut tmp[i2 * n1..(i2 + 1) * n1]);
            }
            for (s, term) in self.terms.iter().enumerate().skip(t) {
                if done[s] || !Arc::ptr_eq(&term.axial, axial) {
                    continue;
                }
                done[s] = true;
                for i2 in 0..n2 {
                    let out = &mut y[i2 * n1..(i2 + 1) * n1];
                    for (j2, a) in term.cross.row(i2) {
                        let coef = a * term.weight;
                        let src = &tmp[j2 * n1..(j2 + 1) * n1];
                        for (o, s) in out.iter_mut().zip(src) {
                            *o += coef * s;
                        }
                    }
                }
            }
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        self.matvec(x, &mut y);
        y
    }

    pub fn quad(&self, x: &[C64]) -> C64 {
        let y = self.apply(x);
        x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim()];
        for term in &self.terms {
            let d2 = term.cross.diagonal();
            let d1 = term.axial.diagonal();
            for i2 in 0..self.n2 {
                for i1 in 0..self.n1 {
                    d[i2 * self.n1 + i1] += term.weight * (d2[i2] * d1[i1]).re;
                }
            }
        }
        d
    }

    /// Dense `n₂n₁ × n₂n₁` matrix; only for tests and small problems.
    pub fn to_dense(&self) -> faer::Mat<C64> {
        let n = self.dim();
        let mut m = faer::Mat::<C64>::zeros(n, n);
        for term in &self.terms {
            for (i2, j2, a) in term.cross.entries() {
                for (i1, j1, b) in term.axial.entries() {
                    m[(i2 * self.n1 + i1, j2 * self.n1 + j1)] += a * b * term.weight;
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_form(n: usize, seed: u64) -> HermitianForm {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut e = Vec::new();
        for i in 0..n {
            e.push((i, i, C64::new(rng.gen_range(1.0..2.0), 0.0)));
            for j in 0..i {
                if rng.gen_bool(0.5) {
                    let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    e.push((i, j, v));
                    e.push((j, i, v.conj()));
                }
            }
        }
        HermitianForm::from_triplets(n, e)
    }

    #[test]
    fn matvec_matches_dense_and_per_term_sum() {
        let a2 = Arc::new(rand_form(5, 1));
        let b2 = Arc::new(rand_form(5, 2));
        let a1 = Arc::new(rand_form(3, 3));
        let b1 = Arc::new(rand_form(3, 4));
        let k = KronForm::new(5, 3)
            .with_term(2.0, &a2, &a1)
            .with_term(-0.5, &b2, &b1)
            .with_term(1.5, &b2, &a1);
        let x: Vec<C64> = (0..15).map(|i| C64::new(i as f64 * 0.1, 1.0 - i as f64 * 0.05)).collect();
        let y = k.apply(&x);
        let dense = k.to_dense();
        let mut sum = vec![C64::new(0.0, 0.0); 15];
        for term in k.terms() {
            let single = KronForm::new(5, 3).with_term(term.weight, &term.cross, &term.axial);
            for (s, v) in sum.iter_mut().zip(single.apply(&x)) {
                *s += v;
            }
        }
        for i in 0..15 {
            let mut d = C64::new(0.0, 0.0);
            for j in 0..15 {
                d += dense[(i, j)] * x[j];
            }
            assert!((d - y[i]).norm() < 1e-12);
            assert!((sum[i] - y[i]).norm() < 1e-12);
        }
        let diag = k.diagonal();
        for i in 0..15 {
            assert!((diag[i] - dense[(i, i)].re).abs() < 1e-12);
        }
    }
}
