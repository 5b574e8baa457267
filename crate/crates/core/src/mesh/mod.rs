//! Cell geometry: the interface-fitted cross-section mesh of `□′` with the
//! fibre disk `B`, the periodic axial mesh of `[0,1)`, and the axial
//! coefficient profile.

mod cross_section;
mod interval;
pub mod io;
mod profile;

pub use cross_section::{
    build_cross_section_mesh, fibre_submesh, DiskMesh, PeriodicMesh2D, Region, RegionSelect,
    Triangle,
};
pub use interval::{build_interval_mesh, PeriodicMesh1D};
pub use profile::{CoefficientProfile, ProfileKind};

/// The pair of meshes a fibre problem lives on.
#[derive(Debug, Clone, Copy)]
pub struct CellMeshes<'a> {
    pub cross: &'a PeriodicMesh2D,
    pub axial: &'a PeriodicMesh1D,
}
