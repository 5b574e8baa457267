use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::block::{hermitian_part, Block};
use super::dense::orthonormalizing_transform;
use super::{weighted_norm, Deflation, Operator, SpectralResult};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Extra block columns beyond the requested count.
    pub guard: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 2000,
            seed: 0x5eed_1234,
            guard: 5,
        }
    }
}

/// Basis directions with scaled Gram eigenvalue below this are dropped.
const DROP_TOL: f64 = 1e-10;
/// Iterations with unchanged Ritz values before the round-off floor may be accepted.
const STALL: usize = 20;

/// The `k` smallest eigenpairs of `A v = λ B v`, restricted to the range of
/// the projector when a deflation is given. A cluster straddling index `k`
/// is returned whole: `k` is extended while the next eigenvalue lies within
/// `10·tol·max(1,|λ|)`.
pub fn smallest_eigs(
    a: &dyn Operator,
    b: &dyn Operator,
    k: usize,
    precond: Option<&dyn Operator>,
    deflation: Option<&Deflation>,
    opts: &EigenOptions,
) -> Result<SpectralResult> {
    let n = a.dim();
    if b.dim() != n || precond.is_some_and(|t| t.dim() != n) {
        return Err(Error::Parameter("operator dimensions differ".into()));
    }
    let avail = n - deflation.map_or(0, |d| d.dim());
    if k == 0 || k > avail {
        return Err(Error::Parameter(format!("cannot compute {k} eigenpairs of a {avail}-dimensional problem")));
    }
    let m = (k + opts.guard.max(1)).min(avail);
    let mdiag = b.diagonal().unwrap_or_else(|| vec![1.0; n]);
    if mdiag.iter().any(|&d| d <= 0.0) {
        return Err(Error::Parameter("mass diagonal must be positive".into()));
    }
    if avail < 3 * m || n <= 64 {
        return small_problem(a, b, k, deflation, &mdiag, opts);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = Block::zeros(n, m);
    for c in x.columns_mut() {
        for v in c.iter_mut() {
            *v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    if let Some(d) = deflation {
        d.project(&mut x);
    }
    let mut bx = x.apply(b);
    let t = orthonormalizing_transform(&x.inner(&bx), DROP_TOL)?;
    if t.ncols() < m {
        return Err(Error::Factorization("initial block is rank deficient".into()));
    }
    x = x.times(t.as_ref());
    bx = bx.times(t.as_ref());
    let mut ax = x.apply(a);
    let (mut lambda, c) = rayleigh_ritz(&x, &ax, &bx, m)?;
    x = x.times(c.as_ref());
    ax = ax.times(c.as_ref());
    bx = bx.times(c.as_ref());
    // Residual attainable in double precision: the random start block sees
    // the top of the spectrum, and SVQB may amplify round-off by 1/√DROP_TOL.
    let floor = 10.0 * lambda.iter().fold(0.0f64, |a, l| a.max(l.abs())) * f64::EPSILON / DROP_TOL.sqrt();

    let mut p: Option<(Block, Block, Block)> = None;
    let mut res = vec![f64::INFINITY; m];
    let mut prev = lambda.clone();
    let mut stable = 0;
    for iter in 1..=opts.max_iter {
        let mut r = residual_block(&x, &ax, &bx, &lambda);
        if let Some(d) = deflation {
            d.project_dual(&mut r);
        }
        for (j, rc) in r.columns().enumerate() {
            res[j] = weighted_norm(rc, &mdiag) / lambda[j].abs().max(1.0);
        }
        let nk = cluster_extent(&lambda, k, opts.tol);
        let required = (nk + 1).min(m);
        let still = (0..required).all(|j| (lambda[j] - prev[j]).abs() <= 1e-11 * lambda[j].abs().max(1.0));
        stable = if still { stable + 1 } else { 0 };
        prev.clone_from(&lambda);
        let limit = |j: usize| {
            if stable >= STALL {
                opts.tol.max(floor / lambda[j].abs().max(1.0))
            } else {
                opts.tol
            }
        };
        if (0..required).all(|j| res[j] <= limit(j)) {
            // confirm with freshly applied operators before accepting
            ax = x.apply(a);
            bx = x.apply(b);
            let mut r = residual_block(&x, &ax, &bx, &lambda);
            if let Some(d) = deflation {
                d.project_dual(&mut r);
            }
            for (j, rc) in r.columns().enumerate() {
                res[j] = weighted_norm(rc, &mdiag) / lambda[j].abs().max(1.0);
            }
            if (0..required).all(|j| res[j] <= limit(j)) {
                if res[..required].iter().any(|&v| v > opts.tol) {
                    log::warn!(
                        "eigensolver stopped at the round-off floor: residuals {:?} above tol {}",
                        &res[..required],
                        opts.tol
                    );
                }
                log::debug!("block eigensolver converged in {iter} iterations, k = {nk}");
                return Ok(finish(&x, &lambda, &res, nk, iter));
            }
        }
        let active: Vec<usize> = (0..m).filter(|&j| res[j] > opts.tol).collect();
        let mut w = r.select(&active);
        if let Some(t) = precond {
            w = w.apply(t);
        }
        if let Some(d) = deflation {
            d.project(&mut w);
        }
        let aw = w.apply(a);
        let bw = w.apply(b);

        let (s, as_, bs) = match &p {
            Some((pp, ap, bp)) => (
                Block::hcat(&[&x, &w, pp]),
                Block::hcat(&[&ax, &aw, ap]),
                Block::hcat(&[&bx, &bw, bp]),
            ),
            None => (
                Block::hcat(&[&x, &w]),
                Block::hcat(&[&ax, &aw]),
                Block::hcat(&[&bx, &bw]),
            ),
        };
        let t = orthonormalizing_transform(&s.inner(&bs), DROP_TOL)?;
        if t.ncols() < m {
            log::debug!("search space collapsed at iteration {iter}; restarting without history");
            p = None;
            continue;
        }
        let h = hermitian_part(&(t.adjoint() * s.inner(&as_) * &t));
        let evd = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Factorization(format!("Rayleigh-Ritz eigensolver failed: {e:?}")))?;
        let sv = evd.S().column_vector();
        lambda = (0..m).map(|j| sv[j].re).collect();
        let coef = &t * evd.U().subcols(0, m);
        x = s.times(coef.as_ref());
        // the new search direction is the part of the update outside span X
        let tail = s.ncols() - m;
        let ct = coef.subrows(m, tail).to_owned();
        let tail_cols: Vec<usize> = (m..s.ncols()).collect();
        p = Some((
            s.select(&tail_cols).times(ct.as_ref()),
            as_.select(&tail_cols).times(ct.as_ref()),
            bs.select(&tail_cols).times(ct.as_ref()),
        ));
        // AX and BX are recomputed every step: updating them through the
        // coefficients lets errors build up along stiff directions, and the
        // next Rayleigh-Ritz then produces spurious Ritz values.
        ax = x.apply(a);
        bx = x.apply(b);
    }
    let nk = cluster_extent(&lambda, k, opts.tol);
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residuals: res[..nk].to_vec(),
    })
}

fn residual_block(x: &Block, ax: &Block, bx: &Block, lambda: &[f64]) -> Block {
    let mut r = ax.clone();
    for (j, rc) in r.columns_mut().enumerate() {
        for (v, bv) in rc.iter_mut().zip(bx.col(j)) {
            *v -= bv * lambda[j];
        }
    }
    debug_assert_eq!(x.ncols(), r.ncols());
    r
}

/// Index one past the last eigenvalue belonging to the cluster at `k`.
fn cluster_extent(lambda: &[f64], k: usize, tol: f64) -> usize {
    let mut nk = k;
    while nk < lambda.len() && lambda[nk] - lambda[nk - 1] <= 10.0 * tol * lambda[nk - 1].abs().max(1.0) {
        nk += 1;
    }
    if nk == lambda.len() && nk > k {
        log::warn!("eigenvalue cluster at index {k} fills the whole block");
    }
    nk
}

fn rayleigh_ritz(x: &Block, ax: &Block, bx: &Block, m: usize) -> Result<(Vec<f64>, Mat<C64>)> {
    let t = orthonormalizing_transform(&x.inner(bx), DROP_TOL)?;
    let h = hermitian_part(&(t.adjoint() * x.inner(ax) * &t));
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Factorization(format!("Rayleigh-Ritz eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let m = m.min(t.ncols());
    let lambda = (0..m).map(|j| s[j].re).collect();
    Ok((lambda, &t * evd.U().subcols(0, m)))
}

fn finish(x: &Block, lambda: &[f64], res: &[f64], nk: usize, iterations: usize) -> SpectralResult {
    SpectralResult {
        eigenvalues: lambda[..nk].to_vec(),
        residuals: res[..nk].to_vec(),
        vectors: (0..nk).map(|j| x.col(j).to_vec()).collect(),
        iterations,
    }
}

/// Rayleigh–Ritz on the whole (projected) space for problems too small for
/// a block iteration.
fn small_problem(
    a: &dyn Operator,
    b: &dyn Operator,
    k: usize,
    deflation: Option<&Deflation>,
    mdiag: &[f64],
    opts: &EigenOptions,
) -> Result<SpectralResult> {
    let n = a.dim();
    if n > super::DENSE_EIG_CAP {
        return Err(Error::DenseCap {
            dim: n,
            cap: super::DENSE_EIG_CAP,
        });
    }
    let mut z = Block::zeros(n, n);
    for j in 0..n {
        z.col_mut(j)[j] = C64::new(1.0, 0.0);
    }
    if let Some(d) = deflation {
        d.project(&mut z);
    }
    let az = z.apply(a);
    let bz = z.apply(b);
    let m = n - deflation.map_or(0, |d| d.dim());
    let (lambda, c) = rayleigh_ritz(&z, &az, &bz, m)?;
    let x = z.times(c.as_ref());
    let ax = az.times(c.as_ref());
    let bx = bz.times(c.as_ref());
    let mut r = residual_block(&x, &ax, &bx, &lambda);
    if let Some(d) = deflation {
        d.project_dual(&mut r);
    }
    let res: Vec<f64> = r
        .columns()
        .enumerate()
        .map(|(j, rc)| weighted_norm(rc, mdiag) / lambda[j].abs().max(1.0))
        .collect();
    let nk = cluster_extent(&lambda, k.min(lambda.len()), opts.tol);
    Ok(finish(&x, &lambda, &res, nk, 1))
}
