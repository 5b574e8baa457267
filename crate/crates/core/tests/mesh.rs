use std::collections::HashSet;
use std::f64::consts::PI;

use fibrehom::mesh::io::{parse_mesh, write_mesh};
use fibrehom::mesh::{
    build_cross_section_mesh, build_interval_mesh, fibre_submesh, CoefficientProfile, PeriodicMesh2D, Region,
};
use fibrehom::Error;
use proptest::prelude::*;

fn key(p: [f64; 2]) -> (i64, i64) {
    ((p[0] * 1e10).round() as i64, (p[1] * 1e10).round() as i64)
}

fn check_invariants(m: &PeriodicMesh2D) {
    let r = m.r;
    let mut total = 0.0;
    for (t, tri) in m.triangles.iter().enumerate() {
        let a = m.triangle_area(t);
        assert!(a > 0.0);
        total += a;
        let c = m.triangle_coords(t);
        let centroid = [(c[0][0] + c[1][0] + c[2][0]) / 3.0, (c[0][1] + c[1][1] + c[2][1]) / 3.0];
        let rho = centroid[0].hypot(centroid[1]);
        match tri.region {
            Region::Fibre => assert!(rho < r),
            Region::Matrix => assert!(rho > r * (PI / 8.0).cos() * 0.9),
        }
    }
    assert!((total - 1.0).abs() < 1e-12, "{total}");
    for &v in &m.interface_nodes {
        let p = m.vertices[v];
        assert!((p[0].hypot(p[1]) - r).abs() < 1e-12);
    }
    for &(a, b) in &m.periodic_pairs {
        let (p, q) = (m.vertices[a], m.vertices[b]);
        for d in 0..2 {
            let diff = p[d] - q[d];
            assert!((diff - diff.round()).abs() < 1e-12);
        }
    }
    let set: HashSet<_> = m.vertices.iter().map(|&p| key(p)).collect();
    for g in [|p: [f64; 2]| [-p[0], p[1]], |p: [f64; 2]| [p[0], -p[1]], |p: [f64; 2]| [p[1], p[0]]] {
        assert!(m.vertices.iter().all(|&p| set.contains(&key(g(p)))));
    }
    assert!(m.is_dihedrally_symmetric(1e-12));
}

fn area_error(r: f64, h: f64) -> f64 {
    let m = build_cross_section_mesh(r, h).unwrap();
    (m.fibre_area() - PI * r * r).abs()
}

#[test]
fn meshes_satisfy_the_invariants() {
    for (r, h) in [(0.25, 0.1), (0.25, 0.05), (0.1, 0.05), (0.4, 0.05)] {
        check_invariants(&build_cross_section_mesh(r, h).unwrap());
    }
}

#[test]
fn disk_area_converges_at_second_order() {
    let e1 = area_error(0.25, 0.1);
    assert!(e1 <= 0.1 * 0.1, "{e1}");
    let ratio = area_error(0.25, 0.05) / area_error(0.25, 0.025);
    assert!((3.5..=4.5).contains(&ratio), "{ratio}");
}

#[test]
fn out_of_range_geometry_is_rejected() {
    assert!(matches!(build_cross_section_mesh(0.6, 0.1), Err(Error::Parameter(_))));
    assert!(matches!(build_cross_section_mesh(0.25, 0.2), Err(Error::Parameter(_))));
    assert!(matches!(build_cross_section_mesh(0.25, 0.0), Err(Error::Parameter(_))));
}

#[test]
fn interval_meshes_carry_the_breakpoints() {
    let c = build_interval_mesh(4, &CoefficientProfile::constant(1.0).unwrap()).unwrap();
    assert_eq!(c.nodes, vec![0.0, 0.25, 0.5, 0.75]);
    let p = CoefficientProfile::piecewise(vec![1.0, 2.0], vec![0.0, 0.3]).unwrap();
    let m = build_interval_mesh(4, &p).unwrap();
    assert!(m.nodes.contains(&0.3) && m.nodes.contains(&0.0));
    assert!(m.nodes.windows(2).all(|w| w[1] > w[0]));
    assert!(build_interval_mesh(1, &p).is_err());
}

#[test]
fn submesh_is_the_fibre() {
    let m = build_cross_section_mesh(0.25, 0.05).unwrap();
    let d = fibre_submesh(&m);
    let fibre = m.triangles.iter().filter(|t| t.region == Region::Fibre).count();
    assert_eq!(d.triangles.len(), fibre);
    assert_eq!(d.area(), m.fibre_area());
    let bnd: HashSet<usize> = d.boundary_vertices().into_iter().map(|v| d.parent_vertex[v]).collect();
    let iface: HashSet<usize> = m.interface_nodes.iter().copied().collect();
    assert_eq!(bnd, iface);
}

#[test]
fn text_format_round_trips() {
    let m = build_cross_section_mesh(0.2, 0.1).unwrap();
    let text = write_mesh(&m);
    assert!(text.starts_with("mesh2d v1 r="));
    let back = parse_mesh(&text).unwrap();
    assert_eq!(back.vertices, m.vertices);
    assert_eq!(back.periodic_pairs, m.periodic_pairs);
    assert_eq!(write_mesh(&back), text);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn random_geometries_are_valid(r in 0.05f64..0.45, frac in 0.2f64..0.5) {
        let m = build_cross_section_mesh(r, frac * r).unwrap();
        check_invariants(&m);
    }
}
