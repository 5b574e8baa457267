//! Plain-text mesh format.
//!
//! ```text
//! mesh2d v1 r=<r> h=<h>
//! v <x> <y>
//! t <i> <j> <k> <matrix|fibre>
//! i <v>            (interface vertex)
//! p <image> <representative>
//! ```
//!
//! Reals are written with 17 significant digits so that a round trip is exact.

use std::fmt::Write as _;

use super::{PeriodicMesh2D, Region, Triangle};
use crate::{Error, Result};

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_mesh(m: &PeriodicMesh2D) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mesh2d v1 r={} h={}", real(m.r), real(m.h));
    for p in &m.vertices {
        let _ = writeln!(out, "v {} {}", real(p[0]), real(p[1]));
    }
    for t in &m.triangles {
        let tag = match t.region {
            Region::Matrix => "matrix",
            Region::Fibre => "fibre",
        };
        let [a, b, c] = t.nodes;
        let _ = writeln!(out, "t {a} {b} {c} {tag}");
    }
    for &v in &m.interface_nodes {
        let _ = writeln!(out, "i {v}");
    }
    for &(i, j) in &m.periodic_pairs {
        let _ = writeln!(out, "p {i} {j}");
    }
    out
}

pub fn parse_mesh(text: &str) -> Result<PeriodicMesh2D> {
    let err = |line: usize, msg: &str| Error::Parse(format!("mesh line {}: {msg}", line + 1));
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(0, "empty input"))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("mesh2d") || fields.next() != Some("v1") {
        return Err(err(0, "expected `mesh2d v1` header"));
    }
    let mut r = None;
    let mut h = None;
    for f in fields {
        match f.split_once('=') {
            Some(("r", v)) => r = v.parse::<f64>().ok(),
            Some(("h", v)) => h = v.parse::<f64>().ok(),
            _ => return Err(err(0, "unknown header field")),
        }
    }
    let (r, h) = r.zip(h).ok_or_else(|| err(0, "header needs r= and h="))?;

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut interface = Vec::new();
    let mut pairs = Vec::new();
    for (no, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| -> Result<f64> {
            f.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err(no, "bad real"))
        };
        let idx = |i: usize| -> Result<usize> {
            f.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err(no, "bad index"))
        };
        match f.first().copied() {
            None => continue,
            Some("v") => vertices.push([num(1)?, num(2)?]),
            Some("t") => {
                let region = match f.get(4).copied() {
                    Some("matrix") => Region::Matrix,
                    Some("fibre") => Region::Fibre,
                    _ => return Err(err(no, "bad region tag")),
                };
                triangles.push(Triangle {
                    nodes: [idx(1)?, idx(2)?, idx(3)?],
                    region,
                });
            }
            Some("i") => interface.push(idx(1)?),
            Some("p") => pairs.push((idx(1)?, idx(2)?)),
            Some(_) => return Err(err(no, "unknown record")),
        }
    }
    let n = vertices.len();
    if triangles.iter().any(|t| t.nodes.iter().any(|&v| v >= n)) || interface.iter().any(|&v| v >= n) {
        return Err(Error::Parse("vertex index out of range".into()));
    }
    let mesh = PeriodicMesh2D::from_parts(r, h, vertices, triangles, interface)?;
    if mesh.periodic_pairs != pairs {
        return Err(Error::Parse(
            "periodic pairs disagree with vertex coordinates".into(),
        ));
    }
    Ok(mesh)
}
