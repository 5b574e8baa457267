//! Numerical toolkit for periodic composites made of highly anisotropic
//! cylindrical fibres embedded in an isotropic matrix.
//!
//! The crate discretises the quasimomentum fibre problems of the
//! high-contrast operator with P1 elements on a tensor-product cell
//! (interface-fitted cross-section ⊗ periodic axial interval), computes the
//! homogenised coefficients, assembles the two-scale limit operator on
//! `Z₀ ∔ Z₁`, and runs convergence studies comparing the two spectra and
//! resolvents as the period `ε` goes to zero.
//!
//! Module map:
//!
//! * [`mesh`]: cross-section and axial meshes, coefficient profiles.
//! * [`assembly`]: sparse Hermitian forms, Kronecker-structured pencils and a
//!   dense 3D oracle.
//! * [`eigensolve`]: block preconditioned eigensolver and dense fallback.
//! * [`cell`]: perforated cell problems and homogenised coefficients.
//! * [`limit`]: the limit form `𝕊_ξ`, its bands and resolvent, and a radial oracle.
//! * [`bloch`]: fibre bands, resolvent, modulation and coercivity scans.
//! * [`study`]: convergence studies, rate fitting, config parsing and output.

pub mod assembly;
pub mod bloch;
pub mod cell;
pub mod eigensolve;
mod error;
pub mod limit;
pub mod mesh;
pub mod precond;
pub mod study;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Quasimomentum and period of one fibre problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochParams {
    pub eps: f64,
    pub theta: [f64; 3],
}

impl BlochParams {
    pub fn new(eps: f64, theta: [f64; 3]) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Parameter(format!("eps must lie in (0,1), got {eps}")));
        }
        check_theta(theta)?;
        Ok(Self { eps, theta })
    }

    pub fn theta_prime(&self) -> [f64; 2] {
        [self.theta[0], self.theta[1]]
    }
}

/// Accepts θ in the closed dual cell `[-π, π]³`; the endpoint π is the same
/// fibre as −π, so both are allowed.
pub(crate) fn check_theta(theta: [f64; 3]) -> Result<()> {
    let bound = std::f64::consts::PI * (1.0 + 1e-12);
    if theta.iter().any(|t| !t.is_finite() || t.abs() > bound) {
        return Err(Error::Parameter(format!(
            "theta must lie in the dual cell [-pi, pi]^3, got {theta:?}"
        )));
    }
    Ok(())
}
