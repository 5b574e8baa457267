//! Exact P1 element integrals for the mass and Bloch-shifted stiffness forms.
//!
//! With real hat functions `φ` and a constant shift `θ`,
//! `∫ (∇+iθ)φⱼ · conj((∇+iθ)φᵢ) = ∫∇φⱼ·∇φᵢ + i(θ·∇φᵢ − θ·∇φⱼ)∫φ + |θ|²∫φᵢφⱼ`
//! where `∫φ` is `area/3` on a triangle and `length/2` on an interval.

use super::HermitianForm;
use crate::mesh::{CoefficientProfile, PeriodicMesh1D, PeriodicMesh2D, RegionSelect};
use crate::C64;

/// Gradients of the three hat functions and the area of a triangle.
pub(crate) fn p1_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let s = 0.5 / area;
    let grad = |a: usize, b: usize| [s * (p[a][1] - p[b][1]), s * (p[b][0] - p[a][0])];
    ([grad(1, 2), grad(2, 0), grad(0, 1)], area)
}

fn mass_local(area: f64, i: usize, j: usize) -> f64 {
    if i == j {
        area / 6.0
    } else {
        area / 12.0
    }
}

fn mass_2d_with(m: &PeriodicMesh2D, region: RegionSelect, index: impl Fn(usize) -> usize, n: usize) -> HermitianForm {
    let mut entries = Vec::with_capacity(9 * m.triangles.len());
    for (t, tri) in m.triangles.iter().enumerate() {
        if !region.contains(tri.region) {
            continue;
        }
        let area = m.triangle_area(t);
        for i in 0..3 {
            for j in 0..3 {
                entries.push((index(tri.nodes[i]), index(tri.nodes[j]), C64::new(mass_local(area, i, j), 0.0)));
            }
        }
    }
    HermitianForm::from_triplets(n, entries)
}

/// P1 mass matrix of the periodic cross-section restricted to `region`.
pub fn mass_2d(m: &PeriodicMesh2D, region: RegionSelect) -> HermitianForm {
    mass_2d_with(m, region, |v| m.dof(v), m.n_dofs())
}

/// Mass matrix on raw vertices, without periodic identification. Needed for
/// quasi-periodic fields such as `exp(iθ′·y′) u`.
pub fn vertex_mass_2d(m: &PeriodicMesh2D) -> HermitianForm {
    mass_2d_with(m, RegionSelect::All, |v| v, m.n_vertices())
}

/// `∫_region (∇′+iθ′)u · conj((∇′+iθ′)v)` on periodic P1 fields.
pub fn bloch_stiffness_2d(m: &PeriodicMesh2D, theta: [f64; 2], region: RegionSelect) -> HermitianForm {
    let th2 = theta[0] * theta[0] + theta[1] * theta[1];
    let mut entries = Vec::with_capacity(9 * m.triangles.len());
    for (t, tri) in m.triangles.iter().enumerate() {
        if !region.contains(tri.region) {
            continue;
        }
        let (g, area) = p1_gradients(m.triangle_coords(t));
        let tg = g.map(|gi| theta[0] * gi[0] + theta[1] * gi[1]);
        for i in 0..3 {
            for j in 0..3 {
                let stiff = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                let cross = (tg[i] - tg[j]) * area / 3.0;
                let val = C64::new(stiff + th2 * mass_local(area, i, j), cross);
                entries.push((m.dof(tri.nodes[i]), m.dof(tri.nodes[j]), val));
            }
        }
    }
    HermitianForm::from_triplets(m.n_dofs(), entries)
}

pub fn mass_1d(m: &PeriodicMesh1D) -> HermitianForm {
    let mut entries = Vec::with_capacity(4 * m.n_elements());
    for e in 0..m.n_elements() {
        let (a, b, len) = m.element(e);
        let nodes = [a, b];
        for i in 0..2 {
            for j in 0..2 {
                let v = if i == j { len / 3.0 } else { len / 6.0 };
                entries.push((nodes[i], nodes[j], C64::new(v, 0.0)));
            }
        }
    }
    HermitianForm::from_triplets(m.n_nodes(), entries)
}

/// `∫ a(y₃)|(∂₃+iθ₃)u|²` on the periodic axial mesh; `profile = None` means
/// `a ≡ 1`. The coefficient is sampled at element midpoints, which is exact
/// because breakpoints are nodes.
pub fn bloch_stiffness_1d(m: &PeriodicMesh1D, theta3: f64, profile: Option<&CoefficientProfile>) -> HermitianForm {
    let mut entries = Vec::with_capacity(4 * m.n_elements());
    for e in 0..m.n_elements() {
        let (a, b, len) = m.element(e);
        let coef = profile.map_or(1.0, |p| p.value_at(m.midpoint(e)));
        let grad = [-1.0 / len, 1.0 / len];
        let nodes = [a, b];
        for i in 0..2 {
            for j in 0..2 {
                let mass = if i == j { len / 3.0 } else { len / 6.0 };
                let re = grad[i] * grad[j] * len + theta3 * theta3 * mass;
                let im = theta3 * (grad[i] - grad[j]) * len / 2.0;
                entries.push((nodes[i], nodes[j], C64::new(coef * re, coef * im)));
            }
        }
    }
    HermitianForm::from_triplets(m.n_nodes(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cross_section_mesh;

    #[test]
    fn gradients_sum_to_zero() {
        let (g, area) = p1_gradients([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]);
        assert!((area - 1.0).abs() < 1e-15);
        assert!((g[0][0] + g[1][0] + g[2][0]).abs() < 1e-15);
        assert_eq!(g[1], [1.0, 0.0]);
        assert_eq!(g[2], [0.0, 0.5]);
    }

    #[test]
    fn mass_partitions_unity() {
        let m = build_cross_section_mesh(0.25, 0.1).unwrap();
        let ones = vec![C64::new(1.0, 0.0); m.n_dofs()];
        let all = mass_2d(&m, RegionSelect::All).quad(&ones).re;
        assert!((all - 1.0).abs() < 1e-12);
        let fib = mass_2d(&m, RegionSelect::Fibre).quad(&ones).re;
        assert!((fib - m.fibre_area()).abs() < 1e-15);
    }

    #[test]
    fn constants_in_kernel_at_zero_shift() {
        let m = build_cross_section_mesh(0.25, 0.1).unwrap();
        let k = bloch_stiffness_2d(&m, [0.0, 0.0], RegionSelect::All);
        let y = k.apply(&vec![C64::new(2.5, -1.0); m.n_dofs()]);
        assert!(y.iter().all(|v| v.norm() < 1e-12));
        assert!(k.is_real());
    }

    #[test]
    fn opposite_shift_conjugates() {
        let m = build_cross_section_mesh(0.25, 0.1).unwrap();
        let a = bloch_stiffness_2d(&m, [0.7, -0.3], RegionSelect::Matrix);
        let b = bloch_stiffness_2d(&m, [-0.7, 0.3], RegionSelect::Matrix);
        assert_eq!(a.conj(), b);
        assert!(a.hermitian_defect() <= 1e-12);
    }

    #[test]
    fn axial_forms() {
        let p = CoefficientProfile::constant(1.0).unwrap();
        let m = crate::mesh::build_interval_mesh(8, &p).unwrap();
        let ones = vec![C64::new(1.0, 0.0); 8];
        assert!((mass_1d(&m).quad(&ones).re - 1.0).abs() < 1e-15);
        let k = bloch_stiffness_1d(&m, 0.0, None);
        assert!(k.apply(&ones).iter().all(|v| v.norm() < 1e-14));
        // constant field with shift θ: energy θ² exactly
        let k = bloch_stiffness_1d(&m, 0.3, Some(&p));
        assert!((k.quad(&ones).re - 0.09).abs() < 1e-14);
        assert!(k.hermitian_defect() < 1e-15);
    }
}
