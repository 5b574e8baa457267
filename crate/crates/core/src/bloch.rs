//! The fibre problems at finite `ε`: band functions, the resolvent, the
//! modulation `𝔼_θ`, and the two coercivity scans.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::{compose_pencil, mass_1d, vertex_mass_2d, FibreFactors, Field, HermitianForm, KronForm};
use crate::eigensolve::{smallest_eigs, Deflation, EigenOptions, SpectralResult};
use crate::mesh::{CellMeshes, CoefficientProfile, PeriodicMesh1D, PeriodicMesh2D};
use crate::precond::{pcg, KronPreconditioner};
use crate::{check_theta, BlochParams, Error, Result, C64};

/// Eigenvalues below this are treated as deflation artifacts in the gap scans.
const ARTIFACT: f64 = 1e-10;

/// Relative residual demanded of resolvent solves.
pub const RESOLVENT_TOL: f64 = 1e-12;

fn ones(n: usize) -> Vec<(usize, C64)> {
    (0..n).map(|i| (i, C64::new(1.0, 0.0))).collect()
}

/// The `k` smallest eigenvalues `λ` of `ε⁻²a_θ + b_θ − c` relative to `c`.
/// At `θ = 0` the constant kernel is deflated and prepended exactly.
pub fn epsilon_bands(
    params: BlochParams,
    k: usize,
    meshes: CellMeshes<'_>,
    profile: &CoefficientProfile,
    opts: &EigenOptions,
) -> Result<SpectralResult> {
    let pencil = compose_pencil(params.eps, params.theta, meshes, profile)?;
    let pre = KronPreconditioner::for_pencil(&pencil.factors, params.eps, 1.0, profile)?;
    let n = pencil.mass.dim();
    if params.theta != [0.0; 3] {
        return smallest_eigs(&pencil.stiffness, &pencil.mass, k, Some(&pre), None, opts);
    }
    let constant = vec![C64::new(1.0, 0.0); n];
    if k == 1 {
        return Ok(SpectralResult {
            eigenvalues: vec![0.0],
            residuals: vec![0.0],
            vectors: vec![constant],
            iterations: 0,
        });
    }
    let defl = Deflation::from_sparse(n, vec![ones(n)], &pencil.mass)?;
    let mut res = smallest_eigs(&pencil.stiffness, &pencil.mass, k - 1, Some(&pre), Some(&defl), opts)?;
    res.prepend(0.0, constant);
    Ok(res)
}

/// Solves `ε⁻²a_θ(u, ũ) + b_θ(u, ũ) = c(f, ũ)` for a periodic tensor field
/// `f`, by preconditioned conjugate gradients.
pub fn solve_epsilon_resolvent(
    params: BlochParams,
    f: &Field,
    meshes: CellMeshes<'_>,
    profile: &CoefficientProfile,
) -> Result<Field> {
    let layout = Field::tensor_layout(meshes.cross, meshes.axial);
    if f.layout != layout || f.phase != [0.0; 2] {
        return Err(Error::Parameter("resolvent load must be a periodic tensor field".into()));
    }
    let pencil = compose_pencil(params.eps, params.theta, meshes, profile)?;
    let pre = KronPreconditioner::for_pencil(&pencil.factors, params.eps, 1.0, profile)?;
    let lhs = pencil.stiffness.clone().with_term(1.0, &pencil.factors.m2_all, &pencil.factors.m1);
    let rhs = pencil.mass.apply(&f.values);
    let (u, iters) = pcg(&lhs, &rhs, &pre, RESOLVENT_TOL, 1000)?;
    log::debug!("resolvent at eps={} theta={:?}: {iters} iterations", params.eps, params.theta);
    Field::new(layout, u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Adjoint,
}

/// Multiplication by `exp(±iθ′·y′)`. The phase is recorded on the field and
/// applied node by node when vertex values are taken, so an adjoint undoes a
/// forward step exactly.
pub fn modulate(theta_prime: [f64; 2], field: &Field, direction: Direction) -> Field {
    let s = match direction {
        Direction::Forward => 1.0,
        Direction::Adjoint => -1.0,
    };
    let mut out = field.clone();
    out.phase = [field.phase[0] + s * theta_prime[0], field.phase[1] + s * theta_prime[1]];
    if out.phase[0] == 0.0 && out.phase[1] == 0.0 {
        out.phase = [0.0; 2];
    }
    out
}

/// `‖g‖_{L²(□)}` for values on raw cross-section vertices ⊗ axial nodes.
pub fn vertex_l2_norm(values: &[C64], cross: &PeriodicMesh2D, axial: &PeriodicMesh1D) -> Result<f64> {
    if values.len() != cross.n_vertices() * axial.n_nodes() {
        return Err(Error::Parameter("values do not live on the vertex tensor mesh".into()));
    }
    let m = KronForm::new(cross.n_vertices(), axial.n_nodes()).with_term(
        1.0,
        &Arc::new(vertex_mass_2d(cross)),
        &Arc::new(mass_1d(axial)),
    );
    Ok(m.quad(values).re.max(0.0).sqrt())
}

/// The discrete `V`: the constant plus, for every degree of freedom strictly
/// inside the disk, its hat function extended constantly in `y₃`. Holds the
/// projector onto `W`, the `(a₀ + b₀)`-orthogonal complement of `V`.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    n2: usize,
    n1: usize,
    energy: KronForm,
    projector: Deflation,
}

impl SubspaceBasis {
    pub fn new(meshes: CellMeshes<'_>, profile: &CoefficientProfile) -> Result<Self> {
        let f = FibreFactors::new([0.0; 3], meshes, profile)?;
        let energy = f
            .a_form()
            .with_term(1.0, &f.k2_fibre, &f.m1)
            .with_term(1.0, &f.m2_all, &f.m1);
        let (n2, n1) = (f.n2(), f.n1());
        let projector = Deflation::from_sparse(n2 * n1, Self::columns(meshes.cross, n1), &energy)?;
        Ok(Self {
            n2,
            n1,
            energy,
            projector,
        })
    }

    fn columns(cross: &PeriodicMesh2D, n1: usize) -> Vec<Vec<(usize, C64)>> {
        let n = cross.n_dofs() * n1;
        let mut cols = vec![ones(n)];
        cols.extend(fibre_columns(cross, n1));
        cols
    }

    pub fn dim(&self) -> usize {
        self.projector.dim()
    }

    pub fn basis_vector(&self, j: usize) -> Vec<C64> {
        self.projector.basis_vector(j)
    }

    /// `x ← P_W x`
    pub fn project(&self, x: &mut [C64]) {
        self.projector.project_vec(x)
    }

    /// Largest `|(a₀ + b₀)(x, v)|` over basis vectors `v`, relative to the
    /// energy norms of `x` and `v`.
    pub fn orthogonality_defect(&self, x: &[C64]) -> f64 {
        let xn = self.energy.quad(x).re.sqrt();
        self.projector
            .constraint_values(x)
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let v = self.basis_vector(j);
                c.norm() / (xn * self.energy.quad(&v).re.sqrt()).max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }

    pub fn energy(&self) -> &KronForm {
        &self.energy
    }

    fn deflation(&self) -> &Deflation {
        &self.projector
    }

    fn shape(&self) -> (usize, usize) {
        (self.n2, self.n1)
    }
}

/// Hats of the interior disk degrees of freedom, constant in `y₃`.
fn fibre_columns(cross: &PeriodicMesh2D, n1: usize) -> Vec<Vec<(usize, C64)>> {
    cross
        .interior_fibre_dofs()
        .into_iter()
        .map(|d| (d * n1..(d + 1) * n1).map(|i| (i, C64::new(1.0, 0.0))).collect())
        .collect()
}

/// Inverse of `a_θ + c` for constant `a`, a spectrally equivalent
/// preconditioner otherwise.
fn a_preconditioner(f: &FibreFactors, profile: &CoefficientProfile) -> Result<KronPreconditioner> {
    let c = (profile.min_value() * profile.max_value()).sqrt();
    let p2 = HermitianForm::linear_combination(&[(1.0, &f.k2_matrix), (1.0, &f.m2_all)]);
    let q2 = HermitianForm::linear_combination(&[(1.0, &f.m2_matrix), (c, &f.m2_fibre)]);
    KronPreconditioner::new(&p2, &q2, &f.k1_unit, &f.m1)
}

/// `γ(θ) = min_{w ∈ W} a_θ[w] / c[w]` on the discrete `W`.
pub fn coercivity_gap(
    theta: [f64; 3],
    meshes: CellMeshes<'_>,
    profile: &CoefficientProfile,
    basis: &SubspaceBasis,
    opts: &EigenOptions,
) -> Result<f64> {
    check_theta(theta)?;
    let f = FibreFactors::new(theta, meshes, profile)?;
    if basis.shape() != (f.n2(), f.n1()) {
        return Err(Error::Parameter("subspace basis was built on other meshes".into()));
    }
    let a = f.a_form();
    let c = f.mass();
    let pre = a_preconditioner(&f, profile)?;
    let res = smallest_eigs(&a, &c, 2, Some(&pre), Some(basis.deflation()), opts)?;
    res.eigenvalues
        .iter()
        .copied()
        .find(|&l| l > ARTIFACT)
        .ok_or_else(|| Error::Parameter("no eigenvalue above the artifact threshold".into()))
}

/// `γ*(θ) = min a_θ[u] / (|θ₃|² c[χ₀u] + |θ|² c[χ₁u])`, computed as the
/// reciprocal of the largest eigenvalue of `(D_θ, A_θ)`. When `θ₃ = 0` the
/// common kernel (disk hats constant in `y₃`) is removed first.
pub fn directional_gap(
    theta: [f64; 3],
    meshes: CellMeshes<'_>,
    profile: &CoefficientProfile,
    opts: &EigenOptions,
) -> Result<f64> {
    check_theta(theta)?;
    let t2: f64 = theta.iter().map(|t| t * t).sum();
    if t2 == 0.0 {
        return Err(Error::Parameter("directional gap is undefined at theta = 0".into()));
    }
    let f = FibreFactors::new(theta, meshes, profile)?;
    let a = f.a_form();
    let neg_d = KronForm::new(f.n2(), f.n1())
        .with_term(-theta[2] * theta[2], &f.m2_fibre, &f.m1)
        .with_term(-t2, &f.m2_matrix, &f.m1);
    let pre = a_preconditioner(&f, profile)?;
    let kernel = if theta[2] == 0.0 {
        Some(Deflation::from_sparse(f.n2() * f.n1(), fibre_columns(meshes.cross, f.n1()), &f.mass())?)
    } else {
        None
    };
    let res = smallest_eigs(&neg_d, &a, 1, Some(&pre), kernel.as_ref(), opts)?;
    let nu = -res.eigenvalues[0];
    if nu <= 0.0 {
        return Err(Error::Parameter("directional weight vanishes".into()));
    }
    Ok(1.0 / nu)
}

/// Cell-centred grid of `n` points per axis on `(−π, π)`; `n` odd contains 0.
pub fn theta_grid(n: usize) -> Vec<[f64; 3]> {
    let axis: Vec<f64> = (0..n)
        .map(|j| {
            let v = -PI + (2 * j + 1) as f64 * PI / n as f64;
            if v.abs() < 1e-14 {
                0.0
            } else {
                v
            }
        })
        .collect();
    let mut out = Vec::with_capacity(n * n * n);
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Representatives of a grid under sign changes of each component and the
/// swap of `θ₁, θ₂`; valid for a dihedrally symmetric cross-section.
pub fn reduce_by_symmetry(grid: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let mut out: Vec<[f64; 3]> = Vec::new();
    for t in grid {
        let (a, b) = (t[0].abs(), t[1].abs());
        let rep = [a.min(b), a.max(b), t[2].abs()];
        if !out.iter().any(|q| q.iter().zip(&rep).all(|(x, y)| (x - y).abs() < 1e-12)) {
            out.push(rep);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub theta: [f64; 3],
    pub gamma: f64,
    /// `None` at `θ = 0`.
    pub gamma_star: Option<f64>,
}

/// Both gaps over a list of quasimomenta, in parallel.
pub fn gap_scan(
    thetas: &[[f64; 3]],
    meshes: CellMeshes<'_>,
    profile: &CoefficientProfile,
    opts: &EigenOptions,
) -> Result<Vec<GapRow>> {
    let basis = SubspaceBasis::new(meshes, profile)?;
    thetas
        .par_iter()
        .map(|&theta| {
            let gamma = coercivity_gap(theta, meshes, profile, &basis, opts)?;
            let gamma_star = if theta == [0.0; 3] {
                None
            } else {
                Some(directional_gap(theta, meshes, profile, opts)?)
            };
            Ok(GapRow { theta, gamma, gamma_star })
        })
        .collect()
}

/// `theta1,theta2,theta3,epsilon,k,lambda` rows, `k` counted from 1.
pub fn write_bands_csv(mut w: impl Write, rows: &[(BlochParams, SpectralResult)]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(&mut w);
    csv.write_record(["theta1", "theta2", "theta3", "epsilon", "k", "lambda"])?;
    for (p, res) in rows {
        for (k, l) in res.eigenvalues.iter().enumerate() {
            csv.serialize((p.theta[0], p.theta[1], p.theta[2], p.eps, k + 1, l))?;
        }
    }
    csv.flush().map_err(|e| Error::io("<bands>", e))?;
    Ok(())
}

/// `theta1,theta2,theta3,gamma,gamma_star`; `gamma_star` is empty at the origin.
pub fn write_gaps_csv(mut w: impl Write, rows: &[GapRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(&mut w);
    csv.write_record(["theta1", "theta2", "theta3", "gamma", "gamma_star"])?;
    for r in rows {
        csv.serialize((r.theta[0], r.theta[1], r.theta[2], r.gamma, r.gamma_star))?;
    }
    csv.flush().map_err(|e| Error::io("<gaps>", e))?;
    Ok(())
}
