//! Perforated cell problems on the cross-section and the homogenised
//! coefficients built from them.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::assembly::{bloch_stiffness_2d, mass_2d, p1_gradients, Field, FieldLayout};
use crate::mesh::{CoefficientProfile, PeriodicMesh2D, Region, RegionSelect};
use crate::precond::SparseLlt;
use crate::{Error, Result, C64};

/// Homogenised data: the tensor `A^h`, the axial harmonic mean `a^h`, and
/// the mesh they were computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizedCoefficients {
    pub ah_matrix: [[f64; 3]; 3],
    pub ah: f64,
    pub r: f64,
    pub h: f64,
    /// Area of the interface polygon, the value entering `A^h₃₃`.
    pub disk_area: f64,
    /// `1 − πr²`, for comparison with `A^h₃₃`.
    pub ah33_analytic: f64,
    pub quadrature: &'static str,
}

impl HomogenizedCoefficients {
    /// `A^h ξ · ξ`
    pub fn quadratic(&self, xi: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.ah_matrix[i][j] * xi[i] * xi[j];
            }
        }
        s
    }

    /// Text block: header, three rows of `A^h`, then `a^h`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("coefficients v1\n");
        let _ = writeln!(
            s,
            "# r={:.16e} h={:.16e} disk_area={:.16e} Ah33_analytic={:.16e} quadrature={}",
            self.r, self.h, self.disk_area, self.ah33_analytic, self.quadrature
        );
        s.push_str("Ah 3x3\n");
        for row in &self.ah_matrix {
            let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", row[0], row[1], row[2]);
        }
        let _ = writeln!(s, "ah {:.16e}", self.ah);
        s
    }

    /// Reads the `A^h` rows and `a^h` back from [`to_text`](Self::to_text)
    /// output; provenance fields are taken from the comment line.
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Parse(format!("coefficients block: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("coefficients v1") {
            return Err(bad("missing header"));
        }
        let mut out = Self {
            ah_matrix: [[0.0; 3]; 3],
            ah: 0.0,
            r: f64::NAN,
            h: f64::NAN,
            disk_area: f64::NAN,
            ah33_analytic: f64::NAN,
            quadrature: "exact P1",
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}")));
        let mut row = 0;
        let mut have_ah = false;
        for line in lines {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                for kv in rest.split_whitespace() {
                    if let Some((k, v)) = kv.split_once('=') {
                        match k {
                            "r" => out.r = num(v)?,
                            "h" => out.h = num(v)?,
                            "disk_area" => out.disk_area = num(v)?,
                            "Ah33_analytic" => out.ah33_analytic = num(v)?,
                            _ => {}
                        }
                    }
                }
            } else if line == "Ah 3x3" {
                continue;
            } else if let Some(v) = line.strip_prefix("ah ") {
                out.ah = num(v.trim())?;
                have_ah = true;
            } else {
                if row == 3 {
                    return Err(bad("too many rows"));
                }
                let vals: Vec<&str> = line.split_whitespace().collect();
                if vals.len() != 3 {
                    return Err(bad("row needs three entries"));
                }
                for (c, v) in vals.iter().enumerate() {
                    out.ah_matrix[row][c] = num(v)?;
                }
                row += 1;
            }
        }
        if row != 3 || !have_ah {
            return Err(bad("incomplete block"));
        }
        Ok(out)
    }
}

/// `(∫₀¹ a⁻¹)⁻¹`, exact for piecewise constant profiles.
pub fn harmonic_mean(profile: &CoefficientProfile) -> f64 {
    1.0 / profile.pieces().map(|(len, v)| len / v).sum::<f64>()
}

fn matrix_load(m: &PeriodicMesh2D, alpha: usize) -> Vec<f64> {
    let mut b = vec![0.0; m.n_dofs()];
    for (t, tri) in m.triangles.iter().enumerate() {
        if tri.region != Region::Matrix {
            continue;
        }
        let (g, area) = p1_gradients(m.triangle_coords(t));
        for i in 0..3 {
            b[m.dof(tri.nodes[i])] += area * g[i][alpha];
        }
    }
    b
}

/// Discrete `N_α` (α ∈ {1, 2}): periodic on the matrix phase, mean zero
/// there, and satisfying `∫_{□′∖B} (∇′N_α + e_α)·∇′φ = 0` for every matrix
/// basis function. Values at degrees of freedom strictly inside the disk are
/// zero.
pub fn solve_cell_problem(m: &PeriodicMesh2D, alpha: usize) -> Result<Field> {
    if !(1..=2).contains(&alpha) {
        return Err(Error::Parameter(format!("cell problem index must be 1 or 2, got {alpha}")));
    }
    let k = bloch_stiffness_2d(m, [0.0, 0.0], RegionSelect::Matrix);
    let mass = mass_2d(m, RegionSelect::Matrix);
    let active = m.region_dofs(RegionSelect::Matrix);
    let keep: Vec<usize> = (0..m.n_dofs()).filter(|&d| active[d]).collect();
    let ones = vec![C64::new(1.0, 0.0); m.n_dofs()];
    let weights = mass.apply(&ones);
    let b = matrix_load(m, alpha - 1);

    // Constants span the kernel and the load has zero sum, so pinning one
    // node and re-centring yields the unique mean-zero solution of the
    // bordered system.
    let pinned = &keep[1..];
    let kr = k.submatrix(pinned);
    let rhs: Vec<C64> = pinned.iter().map(|&d| C64::new(-b[d], 0.0)).collect();
    let sol = SparseLlt::new(&kr)?.solve(&rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve("cell problem produced non-finite values".into()));
    }
    let mut values = vec![C64::new(0.0, 0.0); m.n_dofs()];
    for (i, &d) in pinned.iter().enumerate() {
        values[d] = C64::new(sol[i].re, 0.0);
    }
    let area: f64 = keep.iter().map(|&d| weights[d].re).sum();
    let mean = keep.iter().map(|&d| weights[d].re * values[d].re).sum::<f64>() / area;
    for &d in &keep {
        values[d] -= mean;
    }
    Field::new(FieldLayout::Cross { n: m.n_dofs() }, values)
}

/// Largest violation of the discrete cell equation over all matrix basis
/// functions, and the matrix-phase integral of the solution.
pub fn cell_residual(m: &PeriodicMesh2D, alpha: usize, n_alpha: &Field) -> (f64, f64) {
    let k = bloch_stiffness_2d(m, [0.0, 0.0], RegionSelect::Matrix);
    let kn = k.apply(&n_alpha.values);
    let b = matrix_load(m, alpha - 1);
    let active = m.region_dofs(RegionSelect::Matrix);
    let res = (0..m.n_dofs())
        .filter(|&d| active[d])
        .map(|d| (kn[d].re + b[d]).abs())
        .fold(0.0, f64::max);
    let mean = mass_2d(m, RegionSelect::Matrix).apply(&n_alpha.values).iter().map(|v| v.re).sum();
    (res, mean)
}

/// `A^h` with `A^h_{αβ} = ∫_{□′∖B}(∂_β N_α + δ_{αβ})`, `A^h₃₃ = |□′∖B|`
/// (polygonal), and zero mixed axial entries.
pub fn homogenized_matrix(m: &PeriodicMesh2D) -> Result<[[f64; 3]; 3]> {
    let (n1, n2) = rayon::join(|| solve_cell_problem(m, 1), || solve_cell_problem(m, 2));
    let sols = [n1?, n2?];
    let matrix_area = m.region_area(RegionSelect::Matrix);
    let mut ah = [[0.0; 3]; 3];
    for (alpha, n) in sols.iter().enumerate() {
        for beta in 0..2 {
            let mut s = if alpha == beta { matrix_area } else { 0.0 };
            for (t, tri) in m.triangles.iter().enumerate() {
                if tri.region != Region::Matrix {
                    continue;
                }
                let (g, area) = p1_gradients(m.triangle_coords(t));
                for i in 0..3 {
                    s += area * n.values[m.dof(tri.nodes[i])].re * g[i][beta];
                }
            }
            ah[alpha][beta] = s;
        }
    }
    ah[2][2] = matrix_area;
    Ok(ah)
}

pub fn homogenized_coefficients(m: &PeriodicMesh2D, profile: &CoefficientProfile) -> Result<HomogenizedCoefficients> {
    Ok(HomogenizedCoefficients {
        ah_matrix: homogenized_matrix(m)?,
        ah: harmonic_mean(profile),
        r: m.r,
        h: m.h,
        disk_area: m.fibre_area(),
        ah33_analytic: 1.0 - PI * m.r * m.r,
        quadrature: "exact P1",
    })
}
