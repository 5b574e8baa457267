use super::CoefficientProfile;
use crate::{Error, Result};

/// Periodic partition of `[0, 1)` along the fibre axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicMesh1D {
    pub nodes: Vec<f64>,
    pub h3: f64,
}

impl PeriodicMesh1D {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Element `e` joins node `e` to node `e + 1` (the last wraps to node 0
    /// across `y₃ = 1`). Returns `(left, right, length)`.
    pub fn element(&self, e: usize) -> (usize, usize, f64) {
        let n = self.nodes.len();
        let right = (e + 1) % n;
        let end = if right == 0 { 1.0 } else { self.nodes[right] };
        (e, right, end - self.nodes[e])
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len()
    }

    pub fn midpoint(&self, e: usize) -> f64 {
        let (_, _, len) = self.element(e);
        self.nodes[e] + 0.5 * len
    }
}

/// Distributes `n` nodes over the pieces of `profile` in proportion to their
/// lengths (largest remainder), uniformly within each piece, so that every
/// breakpoint is a node.
pub fn build_interval_mesh(n: usize, profile: &CoefficientProfile) -> Result<PeriodicMesh1D> {
    if n < 2 {
        return Err(Error::Parameter(format!("interval mesh needs n >= 2, got {n}")));
    }
    let breaks = profile.breakpoints();
    if n < breaks.len() {
        return Err(Error::Parameter(format!(
            "{n} nodes cannot carry {} breakpoints",
            breaks.len()
        )));
    }
    let lengths: Vec<f64> = profile.pieces().map(|(len, _)| len).collect();
    let extra = n - breaks.len();
    let ideal: Vec<f64> = lengths.iter().map(|l| l * n as f64 - 1.0).collect();
    let mut counts: Vec<usize> = ideal.iter().map(|x| 1 + x.max(0.0).floor() as usize).collect();
    let mut assigned: usize = counts.iter().map(|c| c - 1).sum();
    // Largest remainder, ties broken by position for determinism.
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = ideal[a].max(0.0) - ideal[a].max(0.0).floor();
        let rb = ideal[b].max(0.0) - ideal[b].max(0.0).floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut k = 0;
    while assigned < extra {
        counts[order[k % order.len()]] += 1;
        assigned += 1;
        k += 1;
    }
    while assigned > extra {
        let i = (0..counts.len()).rev().max_by_key(|&i| counts[i]).unwrap_or(0);
        counts[i] -= 1;
        assigned -= 1;
    }
    let mut nodes = Vec::with_capacity(n);
    for (i, &c) in counts.iter().enumerate() {
        for j in 0..c {
            nodes.push(breaks[i] + lengths[i] * j as f64 / c as f64);
        }
    }
    let mut mesh = PeriodicMesh1D { nodes, h3: 0.0 };
    mesh.h3 = (0..n).map(|e| mesh.element(e).2).fold(0.0, f64::max);
    Ok(mesh)
}
