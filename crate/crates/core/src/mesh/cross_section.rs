use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use crate::{Error, Result};

/// Material phase of a cross-section triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Matrix,
    Fibre,
}

/// Which triangles an integral runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionSelect {
    All,
    Matrix,
    Fibre,
}

impl RegionSelect {
    pub fn contains(self, region: Region) -> bool {
        match self {
            RegionSelect::All => true,
            RegionSelect::Matrix => region == Region::Matrix,
            RegionSelect::Fibre => region == Region::Fibre,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub region: Region,
}

/// Interface-fitted triangulation of the closed cell `[-½,½]²`.
///
/// Vertices on the closing edges `x = ½` and `y = ½` are stored explicitly and
/// glued to their images on `x = -½`, `y = -½` through `periodic_pairs`.
/// Degrees of freedom are the periodic classes of vertices; every class has a
/// representative vertex in `[-½,½)²`.
#[derive(Debug, Clone)]
pub struct PeriodicMesh2D {
    pub r: f64,
    pub h: f64,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<Triangle>,
    pub interface_nodes: Vec<usize>,
    /// `(image, representative)`: the image lies on a closing edge and equals
    /// the representative modulo the unit lattice.
    pub periodic_pairs: Vec<(usize, usize)>,
    dof_of_vertex: Vec<usize>,
    dof_vertex: Vec<usize>,
}

/// Smallest count `≥ x` taken from a set closed under doubling, so that the
/// mesh built at `h/2` has exactly twice as many segments as the one at `h`
/// whenever `x > 8`.
pub(crate) fn refinable_count(x: f64) -> usize {
    if x <= 8.0 {
        return x.ceil().max(1.0) as usize;
    }
    let mut scale = 1.0;
    while x / scale > 16.0 {
        scale *= 2.0;
    }
    ((x / scale).ceil() * scale) as usize
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Triangulates the strip between two polylines running from the ray `y = 0`
/// to the diagonal `y = x`.
fn zip_strip(
    inner: &[usize],
    outer: &[usize],
    pts: &[[f64; 2]],
    region: Region,
    out: &mut Vec<Triangle>,
) {
    let p = inner.len() - 1;
    let q = outer.len() - 1;
    let (mut i, mut j) = (0usize, 0usize);
    while i < p || j < q {
        let advance_inner = if i == p {
            false
        } else if j == q {
            true
        } else {
            (i + 1) * q <= (j + 1) * p
        };
        let mut tri = if advance_inner {
            i += 1;
            [inner[i - 1], inner[i], outer[j]]
        } else {
            j += 1;
            [inner[i], outer[j], outer[j - 1]]
        };
        if signed_area(pts[tri[0]], pts[tri[1]], pts[tri[2]]) < 0.0 {
            tri.swap(1, 2);
        }
        out.push(Triangle { nodes: tri, region });
    }
}

const DIHEDRAL: [fn([f64; 2]) -> [f64; 2]; 8] = [
    |p| [p[0], p[1]],
    |p| [p[1], p[0]],
    |p| [-p[0], p[1]],
    |p| [p[0], -p[1]],
    |p| [-p[0], -p[1]],
    |p| [-p[1], p[0]],
    |p| [p[1], -p[0]],
    |p| [-p[1], -p[0]],
];

fn key(p: [f64; 2]) -> (u64, u64) {
    // `+ 0.0` folds -0.0 into 0.0.
    ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits())
}

/// Builds the symmetric interface-fitted mesh of the cross-section with the
/// disk of radius `r` resolved by a polygon whose vertices lie on the circle.
///
/// One eighth of the cell (`0 ≤ y ≤ x ≤ ½`) is meshed with concentric rings
/// inside the disk and with layers blending the arc into the cell edge
/// outside; the octant is then reflected under the eight symmetries of the
/// square.
pub fn build_cross_section_mesh(r: f64, h: f64) -> Result<PeriodicMesh2D> {
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::Parameter(format!("radius must lie in (0, 1/2), got {r}")));
    }
    if !(h > 0.0 && h <= 0.5 * r) {
        return Err(Error::Parameter(format!(
            "mesh size must lie in (0, r/2] = (0, {}], got {h}",
            0.5 * r
        )));
    }

    let n_arc = refinable_count(r * FRAC_PI_4 / h);
    let rings = refinable_count(r / h).max(2);
    let n_out = refinable_count((0.5 / h).max(n_arc as f64));
    let mean_gap = 0.5 * ((FRAC_1_SQRT_2 - r) + (0.5 - r));
    let layers = refinable_count(mean_gap / h);

    let mut pts: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    let mut polylines: Vec<Vec<usize>> = vec![vec![0]];

    for k in 1..=rings {
        let rho = r * k as f64 / rings as f64;
        let count = if k == rings {
            n_arc
        } else {
            refinable_count(n_arc as f64 * k as f64 / rings as f64).min(n_arc)
        };
        let line = (0..=count)
            .map(|j| {
                let p = if j == 0 {
                    [rho, 0.0]
                } else if j == count {
                    let v = rho * FRAC_1_SQRT_2;
                    [v, v]
                } else {
                    let phi = j as f64 / count as f64 * FRAC_PI_4;
                    [rho * phi.cos(), rho * phi.sin()]
                };
                pts.push(p);
                pts.len() - 1
            })
            .collect();
        polylines.push(line);
    }
    let interface_line = rings;

    for l in 1..=layers {
        let s = l as f64 / layers as f64;
        let count = if l == layers {
            n_out
        } else {
            refinable_count(n_arc as f64 + (n_out - n_arc) as f64 * s)
        };
        let line = (0..=count)
            .map(|j| {
                let t = j as f64 / count as f64;
                let p = if l == layers {
                    [0.5, 0.5 * t]
                } else if j == count {
                    let v = (1.0 - s) * r * FRAC_1_SQRT_2 + 0.5 * s;
                    [v, v]
                } else {
                    let phi = t * FRAC_PI_4;
                    [
                        (1.0 - s) * r * phi.cos() + 0.5 * s,
                        (1.0 - s) * r * phi.sin() + 0.5 * s * t,
                    ]
                };
                pts.push(p);
                pts.len() - 1
            })
            .collect();
        polylines.push(line);
    }

    let mut octant_tris = Vec::new();
    for s in 0..polylines.len() - 1 {
        let region = if s < interface_line {
            Region::Fibre
        } else {
            Region::Matrix
        };
        zip_strip(&polylines[s], &polylines[s + 1], &pts, region, &mut octant_tris);
    }
    let mut on_interface = vec![false; pts.len()];
    for &v in &polylines[interface_line] {
        on_interface[v] = true;
    }

    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut vertices: Vec<[f64; 2]> = Vec::new();
    let mut interface_nodes = Vec::new();
    let mut triangles = Vec::new();
    for g in DIHEDRAL {
        let map: Vec<usize> = pts
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let q = g(p);
                let q = [q[0] + 0.0, q[1] + 0.0];
                *index.entry(key(q)).or_insert_with(|| {
                    vertices.push(q);
                    if on_interface[i] {
                        interface_nodes.push(vertices.len() - 1);
                    }
                    vertices.len() - 1
                })
            })
            .collect();
        for t in &octant_tris {
            let mut nodes = t.nodes.map(|v| map[v]);
            if signed_area(vertices[nodes[0]], vertices[nodes[1]], vertices[nodes[2]]) < 0.0 {
                nodes.swap(1, 2);
            }
            triangles.push(Triangle {
                nodes,
                region: t.region,
            });
        }
    }

    PeriodicMesh2D::from_parts(r, h, vertices, triangles, interface_nodes)
}

impl PeriodicMesh2D {
    /// Assembles a mesh from raw parts, deriving periodic pairs and the
    /// degree-of-freedom map from vertex coordinates on the closing edges.
    pub fn from_parts(
        r: f64,
        h: f64,
        vertices: Vec<[f64; 2]>,
        triangles: Vec<Triangle>,
        interface_nodes: Vec<usize>,
    ) -> Result<Self> {
        let index: HashMap<(u64, u64), usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, &p)| (key(p), i))
            .collect();
        let mut periodic_pairs = Vec::new();
        let mut rep = (0..vertices.len()).collect::<Vec<_>>();
        for (i, p) in vertices.iter().enumerate() {
            let wrapped = [
                if p[0] == 0.5 { -0.5 } else { p[0] },
                if p[1] == 0.5 { -0.5 } else { p[1] },
            ];
            if wrapped != *p {
                let j = *index.get(&key(wrapped)).ok_or_else(|| {
                    Error::Parameter(format!("vertex {p:?} has no periodic partner"))
                })?;
                periodic_pairs.push((i, j));
                rep[i] = j;
            }
        }
        let mut dof_of_vertex = vec![usize::MAX; vertices.len()];
        let mut dof_vertex = Vec::new();
        for i in 0..vertices.len() {
            if rep[i] == i {
                dof_of_vertex[i] = dof_vertex.len();
                dof_vertex.push(i);
            }
        }
        for i in 0..vertices.len() {
            dof_of_vertex[i] = dof_of_vertex[rep[i]];
        }
        Ok(Self {
            r,
            h,
            vertices,
            triangles,
            interface_nodes,
            periodic_pairs,
            dof_of_vertex,
            dof_vertex,
        })
    }

    /// Symmetric periodic `n × n` grid without inclusion: each square is cut
    /// into four triangles through its centre. All triangles are `Matrix`.
    pub fn plain_cell(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("plain cell needs n >= 1".into()));
        }
        let step = 1.0 / n as f64;
        let coord = |i: usize| if i == n { 0.5 } else { -0.5 + i as f64 * step };
        let mut vertices = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([coord(i), coord(j)]);
            }
        }
        let corner = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let c = vertices.len();
                vertices.push([-0.5 + (i as f64 + 0.5) * step, -0.5 + (j as f64 + 0.5) * step]);
                let ring = [corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1)];
                for e in 0..4 {
                    triangles.push(Triangle {
                        nodes: [ring[e], ring[(e + 1) % 4], c],
                        region: Region::Matrix,
                    });
                }
            }
        }
        Self::from_parts(0.0, step, vertices, triangles, Vec::new())
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_vertex.len()
    }

    pub fn dof(&self, vertex: usize) -> usize {
        self.dof_of_vertex[vertex]
    }

    pub fn dof_of_vertex(&self) -> &[usize] {
        &self.dof_of_vertex
    }

    /// Representative vertex (in `[-½,½)²`) of each degree of freedom.
    pub fn dof_vertices(&self) -> &[usize] {
        &self.dof_vertex
    }

    pub fn dof_coords(&self, dof: usize) -> [f64; 2] {
        self.vertices[self.dof_vertex[dof]]
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        self.triangles[t].nodes.map(|v| self.vertices[v])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        signed_area(a, b, c)
    }

    pub fn region_area(&self, select: RegionSelect) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| select.contains(self.triangles[t].region))
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Area enclosed by the interface polygon.
    pub fn fibre_area(&self) -> f64 {
        self.region_area(RegionSelect::Fibre)
    }

    /// Degrees of freedom touched by at least one triangle of `select`.
    pub fn region_dofs(&self, select: RegionSelect) -> Vec<bool> {
        let mut used = vec![false; self.n_dofs()];
        for t in self.triangles.iter().filter(|t| select.contains(t.region)) {
            for &v in &t.nodes {
                used[self.dof(v)] = true;
            }
        }
        used
    }

    /// Degrees of freedom strictly inside the disk: touched only by fibre
    /// triangles. These span the discrete `Z₁`.
    pub fn interior_fibre_dofs(&self) -> Vec<usize> {
        let fibre = self.region_dofs(RegionSelect::Fibre);
        let matrix = self.region_dofs(RegionSelect::Matrix);
        (0..self.n_dofs()).filter(|&d| fibre[d] && !matrix[d]).collect()
    }

    /// Checks every structural invariant; returns a description of the first
    /// violation.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Parameter(msg));
        for (t, tri) in self.triangles.iter().enumerate() {
            if self.triangle_area(t) <= 0.0 {
                return fail(format!("triangle {t} has non-positive area"));
            }
            let radii = tri.nodes.map(|v| {
                let p = self.vertices[v];
                p[0].hypot(p[1])
            });
            match tri.region {
                Region::Fibre if radii.iter().any(|&q| q > self.r * (1.0 + 1e-12)) => {
                    return fail(format!("fibre triangle {t} leaves the disk"));
                }
                Region::Matrix if radii.iter().any(|&q| q < self.r * (1.0 - 1e-12)) => {
                    return fail(format!("matrix triangle {t} enters the disk"));
                }
                _ => {}
            }
        }
        for &v in &self.interface_nodes {
            let p = self.vertices[v];
            if (p[0].hypot(p[1]) - self.r).abs() > 1e-12 {
                return fail(format!("interface node {v} is off the circle"));
            }
        }
        for &(i, j) in &self.periodic_pairs {
            let (a, b) = (self.vertices[i], self.vertices[j]);
            for d in 0..2 {
                let gap = a[d] - b[d];
                if (gap - gap.round()).abs() > 1e-12 {
                    return fail(format!("periodic pair ({i},{j}) does not match"));
                }
            }
        }
        if (self.region_area(RegionSelect::All) - 1.0).abs() > 1e-12 {
            return fail("triangles do not tile the unit cell".into());
        }
        Ok(())
    }

    /// True when the vertex set is mapped onto itself by `x ↦ -x`, `y ↦ -y`
    /// and `(x, y) ↦ (y, x)` up to `tol`.
    pub fn is_dihedrally_symmetric(&self, tol: f64) -> bool {
        let maps: [fn([f64; 2]) -> [f64; 2]; 3] =
            [|p| [-p[0], p[1]], |p| [p[0], -p[1]], |p| [p[1], p[0]]];
        let quant = |x: f64| (x / tol).round() as i64;
        let set: std::collections::HashSet<(i64, i64)> = self
            .vertices
            .iter()
            .map(|p| (quant(p[0]), quant(p[1])))
            .collect();
        maps.iter().all(|g| {
            self.vertices.iter().all(|&p| {
                let q = g(p);
                // Tolerate rounding at bucket boundaries by probing neighbours.
                let (x, y) = (quant(q[0]), quant(q[1]));
                (-1..=1).any(|dx| (-1..=1).any(|dy| set.contains(&(x + dx, y + dy))))
            })
        })
    }

    /// Area defect of the polygonal disk with respect to `πr²`.
    pub fn disk_area_defect(&self) -> f64 {
        PI * self.r * self.r - self.fibre_area()
    }
}

/// Mesh of the fibre disk alone, carved out of a cross-section mesh.
///
/// Vertex and triangle numbering keep back-maps to the parent so that any
/// integral over the disk is evaluated on literally the same triangles.
#[derive(Debug, Clone)]
pub struct DiskMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub parent_vertex: Vec<usize>,
    pub parent_triangle: Vec<usize>,
    /// Dirichlet flag: the vertex lies on the interface polygon.
    pub boundary: Vec<bool>,
}

impl DiskMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        signed_area(a, b, c)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Local indices of the vertices not on the interface.
    pub fn interior(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| !self.boundary[v]).collect()
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| self.boundary[v]).collect()
    }
}

pub fn fibre_submesh(m: &PeriodicMesh2D) -> DiskMesh {
    let mut local = vec![usize::MAX; m.n_vertices()];
    let mut disk = DiskMesh {
        vertices: Vec::new(),
        triangles: Vec::new(),
        parent_vertex: Vec::new(),
        parent_triangle: Vec::new(),
        boundary: Vec::new(),
    };
    let mut on_interface = vec![false; m.n_vertices()];
    for &v in &m.interface_nodes {
        on_interface[v] = true;
    }
    for (t, tri) in m.triangles.iter().enumerate() {
        if tri.region != Region::Fibre {
            continue;
        }
        let nodes = tri.nodes.map(|v| {
            if local[v] == usize::MAX {
                local[v] = disk.vertices.len();
                disk.vertices.push(m.vertices[v]);
                disk.parent_vertex.push(v);
                disk.boundary.push(on_interface[v]);
            }
            local[v]
        });
        disk.triangles.push(nodes);
        disk.parent_triangle.push(t);
    }
    disk
}
