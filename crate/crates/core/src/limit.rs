//! The two-scale limit operator on `Z₀ ∔ Z₁`: a scalar `z₀` (the value in
//! the matrix) plus a field `z₁` on the disk vanishing on its boundary, both
//! independent of `y₃`.
//!
//! Discrete unknowns are ordered `[z₀, z₁(p₁), …, z₁(pₙ)]` over the interior
//! vertices `pᵢ` of the disk submesh.

use std::io::Write;

use crate::assembly::{p1_gradients, Field, HermitianForm};
use crate::cell::HomogenizedCoefficients;
use crate::eigensolve::{smallest_eigs, EigenOptions, SpectralResult};
use crate::mesh::{DiskMesh, PeriodicMesh1D, PeriodicMesh2D};
use crate::precond::SparseLlt;
use crate::{Error, Result, C64};

/// Rescaled quasimomentum `ξ = θ/ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Xi(pub [f64; 3]);

impl Xi {
    pub fn new(xi: [f64; 3]) -> Result<Self> {
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("xi must be finite, got {xi:?}")));
        }
        Ok(Self(xi))
    }

    pub fn from_theta(theta: [f64; 3], eps: f64) -> Self {
        Self(theta.map(|t| t / eps))
    }
}

/// A discrete element of `Z₀ ∔ Z₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitElement {
    pub z0: C64,
    /// Values on the disk submesh vertices; zero on the interface.
    pub z1: Vec<C64>,
}

impl LimitElement {
    /// `z₀ + z₁` as a y₃-independent field on the raw cross-section
    /// vertices (`z₁` is zero outside the disk).
    pub fn vertex_values(&self, m: &PeriodicMesh2D, disk: &DiskMesh) -> Vec<C64> {
        let mut v = vec![self.z0; m.n_vertices()];
        for (local, &parent) in disk.parent_vertex.iter().enumerate() {
            v[parent] += self.z1[local];
        }
        v
    }
}

/// Disk-side matrices of the limit problem, shared by every `ξ`.
#[derive(Debug, Clone)]
pub struct LimitSpace {
    interior: Vec<usize>,
    n_disk_vertices: usize,
    /// `∫_B φᵢφⱼ` over interior vertices.
    mass: HermitianForm,
    /// `∫_B ∇′φᵢ·∇′φⱼ` over interior vertices.
    stiffness: HermitianForm,
    /// `∫_B φᵢ`
    load: Vec<f64>,
    disk_area: f64,
}

impl LimitSpace {
    pub fn new(disk: &DiskMesh) -> Self {
        let interior = disk.interior();
        let mut pos = vec![usize::MAX; disk.n_vertices()];
        for (k, &v) in interior.iter().enumerate() {
            pos[v] = k;
        }
        let ni = interior.len();
        let mut me = Vec::new();
        let mut ke = Vec::new();
        let mut load = vec![0.0; ni];
        for tri in &disk.triangles {
            let p = tri.map(|v| disk.vertices[v]);
            let (g, area) = p1_gradients(p);
            for i in 0..3 {
                let pi = pos[tri[i]];
                if pi == usize::MAX {
                    continue;
                }
                load[pi] += area / 3.0;
                for j in 0..3 {
                    let pj = pos[tri[j]];
                    if pj == usize::MAX {
                        continue;
                    }
                    let mv = if i == j { area / 6.0 } else { area / 12.0 };
                    me.push((pi, pj, C64::new(mv, 0.0)));
                    let kv = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    ke.push((pi, pj, C64::new(kv, 0.0)));
                }
            }
        }
        Self {
            interior,
            n_disk_vertices: disk.n_vertices(),
            mass: HermitianForm::from_triplets(ni, me),
            stiffness: HermitianForm::from_triplets(ni, ke),
            load,
            disk_area: disk.area(),
        }
    }

    pub fn dim(&self) -> usize {
        1 + self.interior.len()
    }

    pub fn disk_area(&self) -> f64 {
        self.disk_area
    }

    /// Bordered form `w₀₀|z₀|² + 2 Re(z̄₀ wᵀz₁) + z₁ᴴ A z₁` as a matrix.
    fn bordered(&self, corner: f64, border: &[f64], block: &[(f64, &HermitianForm)]) -> HermitianForm {
        let mut e: Vec<(usize, usize, C64)> = vec![(0, 0, C64::new(corner, 0.0))];
        for (i, &w) in border.iter().enumerate() {
            if w != 0.0 {
                e.push((0, i + 1, C64::new(w, 0.0)));
                e.push((i + 1, 0, C64::new(w, 0.0)));
            }
        }
        for &(s, a) in block {
            e.extend(a.entries().map(|(i, j, v)| (i + 1, j + 1, v * s)));
        }
        HermitianForm::from_triplets(self.dim(), e)
    }

    /// `L²(□′)` inner product of `z₀ + z₁`, with `|□′∖B| = A^h₃₃`.
    pub fn mass_form(&self, hc: &HomogenizedCoefficients) -> HermitianForm {
        self.bordered(hc.ah_matrix[2][2] + self.disk_area, &self.load, &[(1.0, &self.mass)])
    }

    /// `𝕊_ξ` restricted to the discrete space.
    pub fn form(&self, xi: Xi, hc: &HomogenizedCoefficients) -> HermitianForm {
        let q = hc.quadratic(xi.0);
        let w = hc.ah * xi.0[2] * xi.0[2];
        let corner = q + w * self.disk_area + hc.ah_matrix[2][2] + self.disk_area;
        let border: Vec<f64> = self.load.iter().map(|v| v * (1.0 + w)).collect();
        self.bordered(corner, &border, &[(1.0 + w, &self.mass), (1.0, &self.stiffness)])
    }

    /// Splits a coefficient vector into `(z₀, z₁)` on the disk vertices.
    pub fn element(&self, z: &[C64]) -> LimitElement {
        let mut z1 = vec![C64::new(0.0, 0.0); self.n_disk_vertices];
        for (k, &v) in self.interior.iter().enumerate() {
            z1[v] = z[k + 1];
        }
        LimitElement { z0: z[0], z1 }
    }

    pub fn coefficients(&self, e: &LimitElement) -> Vec<C64> {
        let mut z = Vec::with_capacity(self.dim());
        z.push(e.z0);
        z.extend(self.interior.iter().map(|&v| e.z1[v]));
        z
    }
}

/// `(S, MV)` for the given `ξ`: `S` is `𝕊_ξ` and `MV` the `L²` inner
/// product of `z₀ + z₁`.
pub fn assemble_limit_form(xi: Xi, hc: &HomogenizedCoefficients, disk: &DiskMesh) -> (HermitianForm, HermitianForm) {
    let space = LimitSpace::new(disk);
    (space.form(xi, hc), space.mass_form(hc))
}

/// The `k` smallest eigenvalues `Λ` of `𝕃_ξ`, from `S z = (Λ + 1) MV z`.
pub fn limit_bands(
    xi: Xi,
    k: usize,
    hc: &HomogenizedCoefficients,
    space: &LimitSpace,
    opts: &EigenOptions,
) -> Result<SpectralResult> {
    let s = space.form(xi, hc);
    let mv = space.mass_form(hc);
    let pre = SparseLlt::new(&s)?;
    let mut res = smallest_eigs(&s, &mv, k, Some(&pre), None, opts)?;
    for l in res.eigenvalues.iter_mut() {
        *l -= 1.0;
    }
    Ok(res)
}

/// Solves `𝕊_ξ(z, z̃) = c(𝔼_θ f, z̃₀ + z̃₁)` for all `z̃`. The load
/// functional is evaluated exactly for the P1 interpolant of the
/// quasi-periodic field `𝔼_θ f` on the raw cross-section vertices.
pub fn solve_limit_resolvent(
    xi: Xi,
    modulated: &Field,
    hc: &HomogenizedCoefficients,
    space: &LimitSpace,
    cross: &PeriodicMesh2D,
    axial: &PeriodicMesh1D,
    disk: &DiskMesh,
) -> Result<LimitElement> {
    let rhs = limit_load(modulated, space, cross, axial, disk)?;
    let s = space.form(xi, hc);
    let z = SparseLlt::new(&s)?.solve(&rhs);
    Ok(space.element(&z))
}

/// Coefficients of `z̃ ↦ ∫_□ g · conj(z̃₀ + z̃₁)` for a field `g` given on
/// cross-section vertices ⊗ axial nodes.
pub fn limit_load(
    g: &Field,
    space: &LimitSpace,
    cross: &PeriodicMesh2D,
    axial: &PeriodicMesh1D,
    disk: &DiskMesh,
) -> Result<Vec<C64>> {
    let n1 = axial.n_nodes();
    let values = g.vertex_values(cross)?;
    if values.len() != cross.n_vertices() * n1 {
        return Err(Error::Parameter("load field must live on the tensor mesh".into()));
    }
    // y₃-integral against the constant test function: row sums of M₁
    let mut w1 = vec![0.0; n1];
    for e in 0..axial.n_elements() {
        let (a, b, len) = axial.element(e);
        w1[a] += len / 2.0;
        w1[b] += len / 2.0;
    }
    let gbar: Vec<C64> = (0..cross.n_vertices())
        .map(|v| values[v * n1..(v + 1) * n1].iter().zip(&w1).map(|(x, w)| x * *w).sum())
        .collect();
    // cross-section mass on raw vertices applied to ḡ
    let mut h = vec![C64::new(0.0, 0.0); cross.n_vertices()];
    for (t, tri) in cross.triangles.iter().enumerate() {
        let area = cross.triangle_area(t);
        let s: C64 = tri.nodes.iter().map(|&v| gbar[v]).sum();
        for &v in &tri.nodes {
            h[v] += (s + gbar[v]) * (area / 12.0);
        }
    }
    let mut rhs = vec![C64::new(0.0, 0.0); space.dim()];
    rhs[0] = h.iter().sum();
    for (k, &local) in space.interior.iter().enumerate() {
        rhs[k + 1] = h[disk.parent_vertex[local]];
    }
    Ok(rhs)
}

/// Radially symmetric eigenvalues `Λ` of `𝕃_(0,0,ξ₃)` for an exact disk of
/// radius `r`, from P1 elements in the radial variable (weight `2πρ`) with
/// `n` elements, via Sylvester inertia counts and bisection.
pub fn radial_oracle(xi3: f64, r: f64, hc: &HomogenizedCoefficients, k: usize, n: usize) -> Result<Vec<f64>> {
    if !(r > 0.0 && r < 0.5) || n < 2 || k == 0 || !xi3.is_finite() {
        return Err(Error::Parameter("radial oracle needs 0 < r < 1/2, n >= 2, k >= 1".into()));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let ell = r / n as f64;
    // unknowns w₀..w_{n−1} at ρᵢ = iℓ; w_n = 0 is the Dirichlet node
    let mut md = vec![0.0; n];
    let mut mo = vec![0.0; n];
    let mut kd = vec![0.0; n];
    let mut ko = vec![0.0; n];
    let mut load = vec![0.0; n];
    for e in 0..n {
        let (a, b) = (e as f64 * ell, (e + 1) as f64 * ell);
        let m_aa = tau * ell * (3.0 * a + b) / 12.0;
        let m_ab = tau * ell * (a + b) / 12.0;
        let m_bb = tau * ell * (a + 3.0 * b) / 12.0;
        let k_ab = tau * (a + b) / (2.0 * ell);
        md[e] += m_aa;
        kd[e] += k_ab;
        load[e] += tau * ell * (2.0 * a + b) / 6.0;
        if e + 1 < n {
            md[e + 1] += m_bb;
            kd[e + 1] += k_ab;
            mo[e] = m_ab;
            ko[e] = -k_ab;
            load[e + 1] += tau * ell * (a + 2.0 * b) / 6.0;
        }
    }
    let area = 0.5 * tau * r * r;
    let w = hc.ah * xi3 * xi3;
    let q = hc.ah_matrix[2][2] * xi3 * xi3;
    // S = [[q + w|B| + 1, (1+w)m],[(1+w)m, (1+w)M + K]], MV = [[1, m],[m, M]]
    let count_below = |mu: f64| -> usize {
        let mut neg = 0;
        let mut d_prev = 0.0;
        let mut piv = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut c_prev = 0.0;
        for i in 0..n {
            let diag = (1.0 + w - mu) * md[i] + kd[i];
            let b = (1.0 + w - mu) * load[i];
            let d = if i == 0 { diag } else { diag - c_prev * c_prev / d_prev };
            let d = if d == 0.0 { f64::MIN_POSITIVE } else { d };
            if d < 0.0 {
                neg += 1;
            }
            // forward substitution of L y = b for the border column
            y[i] = if i == 0 { b } else { b - c_prev / d_prev * y[i - 1] };
            piv[i] = d;
            if i + 1 < n {
                c_prev = (1.0 + w - mu) * mo[i] + ko[i];
            }
            d_prev = d;
        }
        let schur = q + w * area + 1.0 - mu - (0..n).map(|i| y[i] * y[i] / piv[i]).sum::<f64>();
        neg + usize::from(schur < 0.0)
    };
    let mut hi = 2.0;
    while count_below(hi) < k {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NoConvergence {
                iterations: 0,
                residuals: vec![],
            });
        }
    }
    let mut out = Vec::with_capacity(k);
    for j in 1..=k {
        let (mut a, mut b) = (1.0 - 1e-9, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if count_below(mid) >= j {
                b = mid;
            } else {
                a = mid;
            }
            if b - a <= 1e-14 * b.abs() {
                break;
            }
        }
        out.push(0.5 * (a + b) - 1.0);
    }
    Ok(out)
}

/// `xi1,xi2,xi3,k,Lambda` rows, `k` counted from 1.
pub fn write_bands_csv(mut w: impl Write, rows: &[(Xi, SpectralResult)]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(&mut w);
    csv.write_record(["xi1", "xi2", "xi3", "k", "Lambda"])?;
    for (xi, res) in rows {
        for (k, l) in res.eigenvalues.iter().enumerate() {
            csv.serialize((xi.0[0], xi.0[1], xi.0[2], k + 1, l))?;
        }
    }
    csv.flush().map_err(|e| Error::io("<bands>", e))?;
    Ok(())
}
