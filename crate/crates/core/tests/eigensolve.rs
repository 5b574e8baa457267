use faer::Mat;
use fibrehom::assembly::HermitianForm;
use fibrehom::eigensolve::{dense_eigs, smallest_eigs, Block, Deflation, EigenOptions, Jacobi, Operator};
use fibrehom::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sparse random Hermitian pencil: `K` positive semi-definite banded, `M`
/// diagonally dominant.
fn random_pencil(n: usize, seed: u64) -> (HermitianForm, HermitianForm) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = Vec::new();
    let mut m = Vec::new();
    for i in 0..n {
        // K = Σ edges w |x_i − e^{iφ} x_j|² plus a small diagonal
        for d in 1..4 {
            let j = (i + d) % n;
            let w = rng.gen_range(0.5..2.0);
            let ph = C64::from_polar(1.0, rng.gen_range(-1.0..1.0));
            k.push((i, i, C64::new(w, 0.0)));
            k.push((j, j, C64::new(w, 0.0)));
            k.push((i, j, -ph * w));
            k.push((j, i, -ph.conj() * w));
        }
        k.push((i, i, C64::new(rng.gen_range(0.0..0.1), 0.0)));
        m.push((i, i, C64::new(rng.gen_range(1.0..2.0), 0.0)));
        let j = (i + 1) % n;
        let c = C64::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
        m.push((i, j, c));
        m.push((j, i, c.conj()));
    }
    (HermitianForm::from_triplets(n, k), HermitianForm::from_triplets(n, m))
}

#[test]
fn random_pencil_matches_dense() {
    let (k, m) = random_pencil(200, 7);
    let dense = dense_eigs(&k.to_dense(), &m.to_dense()).unwrap();
    let opts = EigenOptions::default();
    let it = smallest_eigs(&k, &m, 6, None, None, &opts).unwrap();
    assert!(it.len() >= 6);
    for (a, b) in it.eigenvalues.iter().zip(&dense.eigenvalues) {
        assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
    }
    assert!(it.residuals.iter().all(|&r| r <= opts.tol));
    // M-orthonormal eigenvectors
    for (i, vi) in it.vectors.iter().enumerate() {
        let mv = m.apply(vi);
        for (j, vj) in it.vectors.iter().enumerate() {
            let g: C64 = vj.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g - want).norm() < 1e-8);
        }
    }
}

#[test]
fn preconditioning_does_not_change_the_answer() {
    let (k, m) = random_pencil(300, 11);
    let opts = EigenOptions::default();
    let plain = smallest_eigs(&k, &m, 4, None, None, &opts).unwrap();
    let sum = HermitianForm::linear_combination(&[(1.0, &k), (1.0, &m)]);
    let jac = Jacobi::new(&sum.diagonal().iter().map(|v| v.re).collect::<Vec<_>>());
    let pre = smallest_eigs(&k, &m, 4, Some(&jac), None, &opts).unwrap();
    assert!(pre.iterations <= plain.iterations + 50);
    for (a, b) in plain.eigenvalues.iter().zip(&pre.eigenvalues) {
        assert!((a - b).abs() < 2.0 * opts.tol * a.abs().max(1.0));
    }
}

#[test]
fn deflating_the_kernel_returns_the_second_eigenvalue() {
    // graph Laplacian of a ring: constants span the kernel
    let n = 150;
    let mut e = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        e.extend([
            (i, i, C64::new(1.0, 0.0)),
            (j, j, C64::new(1.0, 0.0)),
            (i, j, C64::new(-1.0, 0.0)),
            (j, i, C64::new(-1.0, 0.0)),
        ]);
    }
    let k = HermitianForm::from_triplets(n, e);
    let m = HermitianForm::identity(n);
    let opts = EigenOptions::default();
    let full = smallest_eigs(&k, &m, 3, None, None, &opts).unwrap();
    let y = Block::from_columns(n, &[vec![C64::new(1.0, 0.0); n]]);
    let defl = Deflation::new(y, &m).unwrap();
    let reduced = smallest_eigs(&k, &m, 1, None, Some(&defl), &opts).unwrap();
    assert!(full.eigenvalues[0].abs() < 1e-10);
    assert!((reduced.eigenvalues[0] - full.eigenvalues[1]).abs() < 2.0 * opts.tol);
    // the ring has doubly degenerate nonzero eigenvalues; the cluster is kept whole
    assert_eq!(reduced.len(), 2);
}

#[test]
fn dense_and_iterative_share_the_leading_block() {
    let (k, m) = random_pencil(60, 3);
    let dense = dense_eigs(&k.to_dense(), &m.to_dense()).unwrap();
    assert!(dense.residuals.iter().all(|&r| r < 1e-10));
    let it = smallest_eigs(&k, &m, 5, None, None, &EigenOptions::default()).unwrap();
    for (a, b) in it.eigenvalues.iter().zip(&dense.eigenvalues) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn dense_matrices_are_operators() {
    let a = Mat::from_fn(3, 3, |i, j| C64::new(if i == j { 2.0 } else { 0.0 }, 0.0));
    let mut y = vec![C64::new(0.0, 0.0); 3];
    a.apply_into(&[C64::new(1.0, 0.0); 3], &mut y);
    assert_eq!(y[1], C64::new(2.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn seed_does_not_change_eigenvalues(seed in 0u64..1000, pencil in 0u64..50) {
        let (k, m) = random_pencil(120, pencil);
        let a = smallest_eigs(&k, &m, 3, None, None, &EigenOptions::default()).unwrap();
        let opts = EigenOptions { seed, ..EigenOptions::default() };
        let b = smallest_eigs(&k, &m, 3, None, None, &opts).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((x - y).abs() <= 2.0 * opts.tol * x.abs().max(1.0));
        }
    }

    #[test]
    fn adding_a_psd_term_raises_eigenvalues(pencil in 0u64..50, w in 0.0f64..3.0) {
        let (k, m) = random_pencil(100, pencil);
        let bump = HermitianForm::from_triplets(100, (0..100).step_by(7).map(|i| (i, i, C64::new(w, 0.0))).collect());
        let k2 = HermitianForm::linear_combination(&[(1.0, &k), (1.0, &bump)]);
        let opts = EigenOptions::default();
        let lo = smallest_eigs(&k, &m, 4, None, None, &opts).unwrap();
        let hi = smallest_eigs(&k2, &m, 4, None, None, &opts).unwrap();
        for (a, b) in lo.eigenvalues.iter().zip(&hi.eigenvalues) {
            prop_assert!(*b >= a - 2.0 * opts.tol * a.abs().max(1.0));
        }
    }
}
