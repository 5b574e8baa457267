use crate::mesh::{PeriodicMesh1D, PeriodicMesh2D};
use crate::{Error, Result, C64};

/// How the entries of a [`Field`] map to mesh nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldLayout {
    /// Periodic degrees of freedom of the cross-section.
    Cross { n: usize },
    /// Raw cross-section vertices (no periodic gluing); carries
    /// quasi-periodic fields such as modulated ones.
    CrossVertices { n: usize },
    /// Periodic tensor-product degrees of freedom, `i₂ · n₁ + i₁`.
    Tensor { n2: usize, n1: usize },
    /// Raw cross-section vertices ⊗ periodic axial nodes.
    TensorVertices { nv: usize, n1: usize },
}

impl FieldLayout {
    pub fn len(&self) -> usize {
        match *self {
            FieldLayout::Cross { n } | FieldLayout::CrossVertices { n } => n,
            FieldLayout::Tensor { n2, n1 } => n2 * n1,
            FieldLayout::TensorVertices { nv, n1 } => nv * n1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of axial nodes per cross-section node (1 for cross-section layouts).
    pub fn axial(&self) -> usize {
        match *self {
            FieldLayout::Tensor { n1, .. } | FieldLayout::TensorVertices { n1, .. } => n1,
            _ => 1,
        }
    }
}

/// Complex nodal coefficients of a P1 function. A nonzero `phase` `θ′`
/// means the represented function is `e^{iθ′·y′}` times the stored one,
/// evaluated node by node on raw vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub layout: FieldLayout,
    pub values: Vec<C64>,
    pub phase: [f64; 2],
}

impl Field {
    pub fn new(layout: FieldLayout, values: Vec<C64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Parameter(format!(
                "field has {} values but layout {:?} needs {}",
                values.len(),
                layout,
                layout.len()
            )));
        }
        Ok(Self {
            layout,
            values,
            phase: [0.0; 2],
        })
    }

    pub fn constant(layout: FieldLayout, value: C64) -> Self {
        Self {
            layout,
            values: vec![value; layout.len()],
            phase: [0.0; 2],
        }
    }

    pub fn tensor_layout(m2: &PeriodicMesh2D, m1: &PeriodicMesh1D) -> FieldLayout {
        FieldLayout::Tensor {
            n2: m2.n_dofs(),
            n1: m1.n_nodes(),
        }
    }

    /// Interpolates a 1-periodic function of `(y₁, y₂, y₃)` at the
    /// representative node of every tensor degree of freedom.
    pub fn interpolate(m2: &PeriodicMesh2D, m1: &PeriodicMesh1D, f: impl Fn([f64; 3]) -> C64) -> Self {
        let n1 = m1.n_nodes();
        let mut values = Vec::with_capacity(m2.n_dofs() * n1);
        for d in 0..m2.n_dofs() {
            let p = m2.dof_coords(d);
            for &z in &m1.nodes {
                values.push(f([p[0], p[1], z]));
            }
        }
        Self {
            layout: Self::tensor_layout(m2, m1),
            values,
            phase: [0.0; 2],
        }
    }

    /// Copies periodic degrees of freedom onto every vertex of their class.
    pub fn expand_to_vertices(&self, m2: &PeriodicMesh2D) -> Result<Self> {
        let n1 = self.layout.axial();
        let layout = match self.layout {
            FieldLayout::Cross { n } if n == m2.n_dofs() => FieldLayout::CrossVertices { n: m2.n_vertices() },
            FieldLayout::Tensor { n2, n1 } if n2 == m2.n_dofs() => FieldLayout::TensorVertices {
                nv: m2.n_vertices(),
                n1,
            },
            FieldLayout::CrossVertices { n } | FieldLayout::TensorVertices { nv: n, .. } if n == m2.n_vertices() => {
                return Ok(self.clone())
            }
            _ => return Err(Error::Parameter("field does not live on this mesh".into())),
        };
        let mut values = Vec::with_capacity(layout.len());
        for v in 0..m2.n_vertices() {
            let d = m2.dof(v);
            values.extend_from_slice(&self.values[d * n1..(d + 1) * n1]);
        }
        Ok(Self {
            layout,
            values,
            phase: self.phase,
        })
    }

    /// Nodal values of the represented function on raw vertices (⊗ axial
    /// nodes), with the phase factor applied.
    pub fn vertex_values(&self, m2: &PeriodicMesh2D) -> Result<Vec<C64>> {
        let f = self.expand_to_vertices(m2)?;
        let n1 = f.layout.axial();
        let mut values = f.values;
        if self.phase != [0.0; 2] {
            for (v, p) in m2.vertices.iter().enumerate() {
                let c = C64::from_polar(1.0, self.phase[0] * p[0] + self.phase[1] * p[1]);
                values[v * n1..(v + 1) * n1].iter_mut().for_each(|x| *x *= c);
            }
        }
        Ok(values)
    }

    pub fn scale(&mut self, s: C64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}
