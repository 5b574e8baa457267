use std::sync::Arc;

use super::{bloch_stiffness_1d, bloch_stiffness_2d, mass_1d, mass_2d, HermitianForm, KronForm};
use crate::mesh::{CellMeshes, CoefficientProfile, RegionSelect};
use crate::{check_theta, Error, Result};

/// Cross-section and axial factors of every form of the fibre problem at one
/// quasimomentum.
#[derive(Debug, Clone)]
pub struct FibreFactors {
    pub theta: [f64; 3],
    /// `∫_{□′∖B} |(∇′+iθ′)u|²`
    pub k2_matrix: Arc<HermitianForm>,
    /// `∫_B |(∇′+iθ′)u|²`
    pub k2_fibre: Arc<HermitianForm>,
    pub m2_matrix: Arc<HermitianForm>,
    pub m2_fibre: Arc<HermitianForm>,
    pub m2_all: Arc<HermitianForm>,
    pub m1: Arc<HermitianForm>,
    /// `∫ |(∂₃+iθ₃)u|²`
    pub k1_unit: Arc<HermitianForm>,
    /// `∫ a(y₃)|(∂₃+iθ₃)u|²`
    pub k1_coef: Arc<HermitianForm>,
}

impl FibreFactors {
    pub fn new(theta: [f64; 3], meshes: CellMeshes<'_>, profile: &CoefficientProfile) -> Result<Self> {
        check_theta(theta)?;
        let (m2, m1) = (meshes.cross, meshes.axial);
        let tp = [theta[0], theta[1]];
        Ok(Self {
            theta,
            k2_matrix: Arc::new(bloch_stiffness_2d(m2, tp, RegionSelect::Matrix)),
            k2_fibre: Arc::new(bloch_stiffness_2d(m2, tp, RegionSelect::Fibre)),
            m2_matrix: Arc::new(mass_2d(m2, RegionSelect::Matrix)),
            m2_fibre: Arc::new(mass_2d(m2, RegionSelect::Fibre)),
            m2_all: Arc::new(mass_2d(m2, RegionSelect::All)),
            m1: Arc::new(mass_1d(m1)),
            k1_unit: Arc::new(bloch_stiffness_1d(m1, theta[2], None)),
            k1_coef: Arc::new(bloch_stiffness_1d(m1, theta[2], Some(profile))),
        })
    }

    pub fn n2(&self) -> usize {
        self.m2_all.dim()
    }

    pub fn n1(&self) -> usize {
        self.m1.dim()
    }

    fn empty(&self) -> KronForm {
        KronForm::new(self.n2(), self.n1())
    }

    /// The degenerate form `a_θ`: full gradient in the matrix, axial
    /// derivative only in the fibre.
    pub fn a_form(&self) -> KronForm {
        self.empty()
            .with_term(1.0, &self.k2_matrix, &self.m1)
            .with_term(1.0, &self.m2_matrix, &self.k1_unit)
            .with_term(1.0, &self.m2_fibre, &self.k1_coef)
    }

    /// `c[u] = ∫_□ |u|²`
    pub fn mass(&self) -> KronForm {
        self.empty().with_term(1.0, &self.m2_all, &self.m1)
    }

    /// `c[χ u]` for the phase selected by `region`.
    pub fn region_mass(&self, region: RegionSelect) -> KronForm {
        let m2 = match region {
            RegionSelect::All => &self.m2_all,
            RegionSelect::Matrix => &self.m2_matrix,
            RegionSelect::Fibre => &self.m2_fibre,
        };
        self.empty().with_term(1.0, m2, &self.m1)
    }
}

/// The pencil `(K, M)` of the fibre problem: `K` carries `ε⁻²a_θ` plus the
/// in-plane gradient part of `b_θ`; `M` is the `L²(□)` mass, so `K + M` is
/// the full left-hand side.
#[derive(Debug, Clone)]
pub struct Pencil {
    pub eps: f64,
    pub stiffness: KronForm,
    pub mass: KronForm,
    pub factors: Arc<FibreFactors>,
}

pub fn compose_pencil(
    eps: f64,
    theta: [f64; 3],
    meshes: CellMeshes<'_>,
    profile: &CoefficientProfile,
) -> Result<Pencil> {
    let factors = Arc::new(FibreFactors::new(theta, meshes, profile)?);
    pencil_from_factors(eps, factors)
}

pub fn pencil_from_factors(eps: f64, factors: Arc<FibreFactors>) -> Result<Pencil> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("eps must lie in (0,1), got {eps}")));
    }
    let w = 1.0 / (eps * eps);
    let f = &factors;
    let stiffness = KronForm::new(f.n2(), f.n1())
        .with_term(w, &f.k2_matrix, &f.m1)
        .with_term(w, &f.m2_matrix, &f.k1_unit)
        .with_term(w, &f.m2_fibre, &f.k1_coef)
        .with_term(1.0, &f.k2_fibre, &f.m1);
    let mass = f.mass();
    Ok(Pencil {
        eps,
        stiffness,
        mass,
        factors,
    })
}
