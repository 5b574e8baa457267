use fibrehom::assembly::{Field, FieldLayout};
use fibrehom::cell::{homogenized_coefficients, HomogenizedCoefficients};
use fibrehom::eigensolve::EigenOptions;
use fibrehom::limit::{limit_bands, radial_oracle, solve_limit_resolvent, LimitSpace, Xi};
use fibrehom::mesh::{build_cross_section_mesh, build_interval_mesh, fibre_submesh, CoefficientProfile, DiskMesh, PeriodicMesh2D};
use fibrehom::C64;
use proptest::prelude::*;

const J11: f64 = 3.8317059702075125;

fn profile() -> CoefficientProfile {
    CoefficientProfile::piecewise(vec![1.0, 4.0], vec![0.0, 0.5]).unwrap()
}

fn setup(r: f64, h: f64) -> (PeriodicMesh2D, DiskMesh, HomogenizedCoefficients, LimitSpace) {
    let m = build_cross_section_mesh(r, h).unwrap();
    let disk = fibre_submesh(&m);
    let hc = homogenized_coefficients(&m, &profile()).unwrap();
    let space = LimitSpace::new(&disk);
    (m, disk, hc, space)
}

fn nearest(vals: &[f64], target: f64) -> f64 {
    vals.iter().copied().min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs())).unwrap()
}

#[test]
fn bottom_of_the_spectrum_at_zero_is_the_constant() {
    let (_, _, hc, space) = setup(0.25, 0.05);
    let res = limit_bands(Xi([0.0; 3]), 3, &hc, &space, &EigenOptions::default()).unwrap();
    assert!(res.eigenvalues[0].abs() < 1e-8, "{:?}", res.eigenvalues);
    let v = &res.vectors[0];
    let z1 = v[1..].iter().map(|x| x.norm()).fold(0.0, f64::max);
    assert!(z1 < 1e-6 * v[0].norm());
    assert!(res.eigenvalues[1] > 1.0);
}

#[test]
fn disk_dirichlet_mode_converges_at_second_order() {
    let r = 0.25;
    let exact = (J11 / r) * (J11 / r);
    let errs: Vec<f64> = [0.02, 0.01]
        .iter()
        .map(|&h| {
            let (_, _, hc, space) = setup(r, h);
            let res = limit_bands(Xi([0.0; 3]), 6, &hc, &space, &EigenOptions::default()).unwrap();
            (nearest(&res.eigenvalues, exact) - exact).abs()
        })
        .collect();
    assert!(errs[0] / exact < 1e-2, "{errs:?}");
    assert!(errs[0] / errs[1] >= 3.0, "{errs:?}");
}

#[test]
fn bands_grow_with_axial_quasimomentum() {
    let (_, _, hc, space) = setup(0.25, 0.05);
    let opts = EigenOptions::default();
    let mut prev: Option<Vec<f64>> = None;
    for xi3 in [0.0, 1.0, 3.0, 10.0] {
        let res = limit_bands(Xi([0.0, 0.0, xi3]), 4, &hc, &space, &opts).unwrap();
        if let Some(p) = &prev {
            for (a, b) in p.iter().zip(&res.eigenvalues) {
                assert!(b >= &(a - 1e-8 * a.abs().max(1.0)), "{p:?} -> {:?}", res.eigenvalues);
            }
        }
        prev = Some(res.eigenvalues);
    }
}

#[test]
fn radial_oracle_is_resolved_and_matches_the_mesh() {
    let (_, _, hc, space) = setup(0.25, 0.02);
    let coarse = radial_oracle(0.0, 0.25, &hc, 3, 10_000).unwrap();
    let fine = radial_oracle(0.0, 0.25, &hc, 3, 20_000).unwrap();
    assert!(coarse[0].abs() < 1e-9);
    for (a, b) in coarse.iter().zip(&fine).skip(1) {
        assert!((a - b).abs() / b < 1e-6, "{coarse:?} {fine:?}");
    }
    for xi3 in [0.0, 2.0] {
        let oracle = radial_oracle(xi3, 0.25, &hc, 2, 10_000).unwrap();
        let res = limit_bands(Xi([0.0, 0.0, xi3]), 4, &hc, &space, &EigenOptions::default()).unwrap();
        for &o in &oracle {
            let got = nearest(&res.eigenvalues, o);
            assert!((got - o).abs() <= 1e-2 * o.max(1.0), "oracle {o} mesh {got}");
        }
    }
}

#[test]
fn higher_radial_modes_converge_to_the_oracle() {
    let oracle_err = |h: f64| {
        let (_, _, hc, space) = setup(0.25, h);
        let o = radial_oracle(0.0, 0.25, &hc, 3, 10_000).unwrap()[2];
        let res = limit_bands(Xi([0.0; 3]), 8, &hc, &space, &EigenOptions::default()).unwrap();
        (nearest(&res.eigenvalues, o) - o).abs() / o
    };
    let (e1, e2) = (oracle_err(0.02), oracle_err(0.01));
    assert!(e2 < 1e-2 && e1 / e2 >= 3.0, "{e1} {e2}");
}

#[test]
fn unit_load_at_zero_gives_the_constant() {
    let (m, disk, hc, space) = setup(0.25, 0.05);
    let axial = build_interval_mesh(6, &profile()).unwrap();
    let layout = FieldLayout::Tensor { n2: m.n_dofs(), n1: axial.n_nodes() };
    let f = Field::constant(layout, C64::new(1.0, 0.0));
    let z = solve_limit_resolvent(Xi([0.0; 3]), &f, &hc, &space, &m, &axial, &disk).unwrap();
    assert!((z.z0 - 1.0).norm() < 1e-10, "{}", z.z0);
    assert!(z.z1.iter().all(|v| v.norm() < 1e-10));
}

#[test]
fn resolvent_solution_satisfies_the_equation() {
    let (m, disk, hc, space) = setup(0.25, 0.05);
    let axial = build_interval_mesh(6, &profile()).unwrap();
    let mut f = Field::interpolate(&m, &axial, |y| C64::new((y[0] * 3.0).cos() + y[2], y[1]));
    f.phase = [0.7, -1.3];
    let xi = Xi([1.5, -0.5, 2.0]);
    let z = solve_limit_resolvent(xi, &f, &hc, &space, &m, &axial, &disk).unwrap();
    let rhs = fibrehom::limit::limit_load(&f, &space, &m, &axial, &disk).unwrap();
    let s = space.form(xi, &hc);
    let r = s.apply(&space.coefficients(&z));
    let err = r.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let scale = rhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(err <= 1e-10 * scale, "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn limit_form_dominates_the_mass(x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, x3 in -5.0f64..5.0) {
        let (_, _, hc, space) = setup(0.25, 0.1);
        let res = limit_bands(Xi([x1, x2, x3]), 1, &hc, &space, &EigenOptions::default()).unwrap();
        prop_assert!(res.eigenvalues[0] >= -1e-8);
    }
}
