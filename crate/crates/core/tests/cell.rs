use std::collections::HashMap;
use std::f64::consts::PI;

use fibrehom::cell::{cell_residual, harmonic_mean, homogenized_coefficients, homogenized_matrix, solve_cell_problem};
use fibrehom::mesh::{build_cross_section_mesh, CoefficientProfile, PeriodicMesh2D};
use proptest::prelude::*;

/// Degree of freedom of the vertex at `map(p)` for every dof `p`.
fn dof_permutation(m: &PeriodicMesh2D, map: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<usize> {
    let key = |p: [f64; 2]| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
    let index: HashMap<_, _> = m.vertices.iter().enumerate().map(|(i, &p)| (key(p), i)).collect();
    (0..m.n_dofs())
        .map(|d| {
            let q = map(m.dof_coords(d));
            m.dof(index[&key(q)])
        })
        .collect()
}

#[test]
fn cell_solution_satisfies_the_weak_form_and_normalisation() {
    let m = build_cross_section_mesh(0.25, 0.05).unwrap();
    for alpha in 1..=2 {
        let n = solve_cell_problem(&m, alpha).unwrap();
        let (res, mean) = cell_residual(&m, alpha, &n);
        assert!(res <= 1e-10, "residual {res}");
        assert!(mean.abs() <= 1e-10, "mean {mean}");
    }
}

#[test]
fn cell_solutions_follow_the_disk_symmetry() {
    let m = build_cross_section_mesh(0.25, 0.05).unwrap();
    let n1 = solve_cell_problem(&m, 1).unwrap();
    let n2 = solve_cell_problem(&m, 2).unwrap();
    let flip_x = dof_permutation(&m, |p| [-p[0], p[1]]);
    let flip_y = dof_permutation(&m, |p| [p[0], -p[1]]);
    let swap = dof_permutation(&m, |p| [p[1], p[0]]);
    for d in 0..m.n_dofs() {
        let v = n1.values[d].re;
        assert!((n1.values[flip_x[d]].re + v).abs() < 1e-10, "odd in y1");
        assert!((n1.values[flip_y[d]].re - v).abs() < 1e-10, "even in y2");
        assert!((n2.values[swap[d]].re - v).abs() < 1e-10, "swap relates N1 and N2");
    }
}

#[test]
fn no_inclusion_gives_zero_corrector() {
    let m = PeriodicMesh2D::plain_cell(8).unwrap();
    let n = solve_cell_problem(&m, 1).unwrap();
    assert!(n.max_abs() < 1e-12);
    let ah = homogenized_matrix(&m).unwrap();
    assert!((ah[0][0] - 1.0).abs() < 1e-12 && (ah[2][2] - 1.0).abs() < 1e-12);
}

#[test]
fn tensor_structure_and_bounds() {
    for &(r, h) in &[(0.25, 0.05), (0.1, 0.025), (0.4, 0.05)] {
        let m = build_cross_section_mesh(r, h).unwrap();
        let p = CoefficientProfile::piecewise(vec![1.0, 4.0], vec![0.0, 0.5]).unwrap();
        let hc = homogenized_coefficients(&m, &p).unwrap();
        let a = hc.ah_matrix;
        assert!((a[2][2] - (1.0 - m.fibre_area())).abs() < 1e-12);
        assert_eq!(a[0][2], 0.0);
        assert_eq!(a[1][2], 0.0);
        assert!((a[0][1] - a[1][0]).abs() < 1e-9);
        assert!(a[0][1].abs() < 1e-8);
        assert!((a[0][0] - a[1][1]).abs() < 1e-8);
        assert!(a[0][0] > 0.0);
        assert!(a[0][0] <= 1.0 - m.fibre_area() + 1e-8, "Voigt bound");
        assert!(hc.ah > p.nu() && hc.ah < 1.0 / p.nu());
        assert!((hc.ah33_analytic - (1.0 - PI * r * r)).abs() < 1e-15);
    }
}

#[test]
fn dilute_inclusion_matches_clausius_mossotti() {
    let r = 0.1;
    let m = build_cross_section_mesh(r, 0.01).unwrap();
    let a = homogenized_matrix(&m).unwrap();
    let f = PI * r * r;
    let cm = (1.0 - f) / (1.0 + f);
    assert!((a[0][0] - cm).abs() <= 1e-2, "{} vs {cm}", a[0][0]);
}

#[test]
fn corrector_converges_at_second_order() {
    let hs = [0.1, 0.05, 0.025, 0.0125];
    let vals: Vec<f64> = hs
        .iter()
        .map(|&h| homogenized_matrix(&build_cross_section_mesh(0.25, h).unwrap()).unwrap()[0][0])
        .collect();
    let d1 = (vals[1] - vals[2]).abs();
    let d2 = (vals[2] - vals[3]).abs();
    assert!(d1 / d2 >= 3.0, "successive differences {d1} {d2}");
}

proptest! {
    #[test]
    fn harmonic_mean_is_below_arithmetic_and_shift_invariant(
        vals in prop::collection::vec(0.2f64..5.0, 1..6),
        cuts in prop::collection::vec(0.01f64..0.99, 5),
        offset in 0.0f64..1.0,
    ) {
        let mut bps: Vec<f64> = cuts[..vals.len() - 1].to_vec();
        bps.push(0.0);
        bps.sort_by(f64::total_cmp);
        bps.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let vals = vals[..bps.len()].to_vec();
        let p = CoefficientProfile::piecewise(vals, bps).unwrap();
        let ah = harmonic_mean(&p);
        prop_assert!(ah <= p.arithmetic_mean() + 1e-12);
        let q = p.shifted(offset).unwrap();
        prop_assert!((harmonic_mean(&q) - ah).abs() < 1e-12 * ah);
    }
}
