use faer::Mat;

use crate::mesh::{CellMeshes, CoefficientProfile, Region};
use crate::{check_theta, Error, Result, C64};

pub const DENSE_CAP: usize = 5000;

/// Dense pencil `(K, M)` assembled element by element on the prisms
/// `triangle × interval`, with the full 3D shifted gradient evaluated at
/// quadrature points (edge midpoints × two-point Gauss, exact for the
/// polynomial degrees involved). Shares no code path with the Kronecker
/// composition besides the meshes. Intended for tests.
pub fn dense_oracle_form(
    eps: f64,
    theta: [f64; 3],
    meshes: CellMeshes<'_>,
    profile: &CoefficientProfile,
) -> Result<(Mat<C64>, Mat<C64>)> {
    check_theta(theta)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("eps must lie in (0,1), got {eps}")));
    }
    let (m2, m1) = (meshes.cross, meshes.axial);
    let n1 = m1.n_nodes();
    let n = m2.n_dofs() * n1;
    if n > DENSE_CAP {
        return Err(Error::DenseCap { dim: n, cap: DENSE_CAP });
    }
    let inv_eps2 = 1.0 / (eps * eps);
    let mut k = Mat::<C64>::zeros(n, n);
    let mut m = Mat::<C64>::zeros(n, n);

    let g = 0.5 / 3f64.sqrt();
    let gauss = [0.5 - g, 0.5 + g];
    let bary = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];

    for (t, tri) in m2.triangles.iter().enumerate() {
        let p = m2.triangle_coords(t);
        let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        // gradient of the barycentric coordinate λᵢ
        let grad2: Vec<[f64; 2]> = (0..3)
            .map(|i| {
                let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                [(p[a][1] - p[b][1]) / (2.0 * area), (p[b][0] - p[a][0]) / (2.0 * area)]
            })
            .collect();
        for e in 0..m1.n_elements() {
            let (left, right, len) = m1.element(e);
            let a = m1.midpoint(e);
            let coef_a = profile.value_at(a);
            // diagonal coefficient of the bilinear form, ε-scaled
            let coef = match tri.region {
                Region::Matrix => [inv_eps2; 3],
                Region::Fibre => [1.0, 1.0, inv_eps2 * coef_a],
            };
            let idx: Vec<usize> = (0..6)
                .map(|l| {
                    let (i, s) = (l / 2, l % 2);
                    m2.dof(tri.nodes[i]) * n1 + if s == 0 { left } else { right }
                })
                .collect();
            for b in &bary {
                for &s in &gauss {
                    let w = area / 3.0 * len / 2.0;
                    let z = s * len;
                    // values and shifted gradients of the six prism basis functions
                    let mut val = [0.0f64; 6];
                    let mut grad = [[C64::new(0.0, 0.0); 3]; 6];
                    for l in 0..6 {
                        let (i, sd) = (l / 2, l % 2);
                        let psi = if sd == 0 { 1.0 - z / len } else { z / len };
                        let dpsi = if sd == 0 { -1.0 / len } else { 1.0 / len };
                        let phi = b[i];
                        val[l] = phi * psi;
                        for d in 0..3 {
                            let real = if d < 2 { grad2[i][d] * psi } else { phi * dpsi };
                            grad[l][d] = C64::new(real, theta[d] * val[l]);
                        }
                    }
                    for li in 0..6 {
                        for lj in 0..6 {
                            let mut kv = C64::new(0.0, 0.0);
                            for d in 0..3 {
                                kv += coef[d] * grad[lj][d] * grad[li][d].conj();
                            }
                            k[(idx[li], idx[lj])] += kv * w;
                            m[(idx[li], idx[lj])] += C64::new(val[li] * val[lj] * w, 0.0);
                        }
                    }
                }
            }
        }
    }
    Ok((k, m))
}
