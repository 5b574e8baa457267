use fibrehom::assembly::Field;
use fibrehom::limit::Xi;
use fibrehom::study::{
    eigenvalue_convergence_study, fit_rate, fit_series, read_eigen_csv, read_resolvent_csv, resolvent_convergence_study,
    resolvent_error, write_eigen_csv, write_resolvent_csv, write_svg, ConvergenceRow, FitStatus, Load, Mode, ResolventRow,
    Setup, StudyConfig,
};
use fibrehom::{BlochParams, Error, C64};
use proptest::prelude::*;

const SMALL: &str = "\
# a coarse configuration
[geometry] r=0.25 h=0.0625
[axial] n3=8
[coefficient] kind=piecewise values=1,4 breakpoints=0,0.5
[sweep]
eps=0.4,0.2,0.1
xi=0,0,0
f=one
[solver] tol=1e-8 k=1
";

#[test]
fn fit_rate_recovers_exact_power_laws() {
    let one = fit_rate(&[(1.0, 1.0), (0.5, 0.5), (0.25, 0.25)]).unwrap();
    assert!((one.slope - 1.0).abs() < 1e-12);
    let two = fit_rate(&[(1.0, 1.0), (0.5, 0.25), (0.25, 0.0625)]).unwrap();
    assert!((two.slope - 2.0).abs() < 1e-12);
    let eps = [0.4, 0.2, 0.1, 0.05];
    let synth: Vec<(f64, f64)> = eps.iter().map(|&e| (e, 3.0 * e)).collect();
    let fit = fit_rate(&synth).unwrap();
    assert!((fit.slope - 1.0).abs() < 1e-6);
    assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
    assert!(fit.residual < 1e-12);
}

#[test]
fn fit_rate_drops_zeros_and_refuses_short_series() {
    let fit = fit_rate(&[(0.4, 0.4), (0.2, 0.0), (0.1, 0.1), (0.05, 0.05)]).unwrap();
    assert_eq!(fit.dropped, 1);
    assert!((fit.slope - 1.0).abs() < 1e-12);
    assert!(matches!(fit_rate(&[(0.4, 0.4), (0.2, 0.0), (0.1, 0.1)]), Err(Error::Fit(_))));
    assert!(matches!(fit_rate(&[(0.4, 0.4), (0.2, 0.2)]), Err(Error::Fit(_))));
}

proptest! {
    #[test]
    fn fitted_slope_ignores_the_constant(c in 1e-6f64..1e6, p in 0.2f64..3.0) {
        let pts: Vec<(f64, f64)> = [0.4, 0.2, 0.1, 0.05].iter().map(|&e: &f64| (e, c * e.powf(p))).collect();
        let fit = fit_rate(&pts).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-9);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_line(key in "[a-z]{2,8}") {
        prop_assume!(!["r", "h"].contains(&key.as_str()));
        let text = format!("[geometry]\nr=0.25\n{key}=1\n");
        match StudyConfig::parse(&text) {
            Err(Error::Config { line, .. }) => prop_assert_eq!(line, 3),
            other => prop_assert!(false, "{:?}", other),
        }
    }
}

#[test]
fn config_reads_the_documented_format() {
    let text = "[geometry] r=0.25 h=0.02\n[axial] n3=64\n[coefficient] kind=piecewise values=1,4 breakpoints=0,0.5\n\
                [sweep] eps=0.4,0.2,0.1,0.05 xi=0,0,1;1,0,0\n[solver] tol=1e-8 k=3\n";
    let cfg = StudyConfig::parse(text).unwrap();
    assert_eq!(cfg.r, 0.25);
    assert_eq!(cfg.h, 0.02);
    assert_eq!(cfg.n3, 64);
    assert_eq!(cfg.eps, vec![0.4, 0.2, 0.1, 0.05]);
    assert_eq!(cfg.samples, vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]);
    assert_eq!(cfg.mode, Mode::FixedXi);
    assert_eq!(cfg.k, 3);
    assert_eq!(cfg.profile.values(), &[1.0, 4.0]);
    let small = StudyConfig::parse(SMALL).unwrap();
    assert_eq!(small.loads, vec![Load::One]);
    assert_eq!(small.k, 1);
}

#[test]
fn config_rejects_bad_sweeps() {
    let line_of = |text: &str| match StudyConfig::parse(text) {
        Err(Error::Config { line, .. }) => line,
        other => panic!("{other:?}"),
    };
    assert_eq!(line_of("[sweep]\neps=0.2,0.4\n"), 2);
    assert_eq!(line_of("[sweep] eps=0.4,1.0\n"), 1);
    assert_eq!(line_of("[sweep] eps=0.5\nxi=0,0,10\n"), 2);
    assert_eq!(line_of("[sweep] eps=0.5 mode=fixed-theta theta=4,0,0\n"), 1);
    assert_eq!(line_of("[sweep] eps=0.5 xi=0,0,1 theta=0,0,1\n"), 1);
    assert_eq!(line_of("[sweep] eps=0.5 f=two\n"), 1);
    assert_eq!(line_of("[geometry] R=0.25\n"), 1);
    assert_eq!(line_of("r=0.25\n"), 1);
    assert_eq!(line_of("[geometry] r=0.25\n[plot] x=1\n"), 2);
    assert_eq!(line_of("[geometry] r=0.25 h=0.2\n"), 1);
}

fn eigen_row(xi: [f64; 3], eps: f64, k: usize, lambda: f64, lim: f64) -> ConvergenceRow {
    ConvergenceRow {
        xi,
        eps,
        k,
        lambda,
        lambda_limit: lim,
        abs_err: (lambda - lim).abs(),
        trusted: true,
    }
}

#[test]
fn csv_round_trips() {
    let rows = vec![
        eigen_row([0.0, 0.0, 1.0], 0.4, 1, 1.234567890123, 1.2),
        eigen_row([1.0, 1.0, 2.0], 0.05, 3, 1e-17, 0.1 + 0.2),
    ];
    let mut buf = Vec::new();
    write_eigen_csv(&mut buf, &rows).unwrap();
    assert_eq!(read_eigen_csv(buf.as_slice()).unwrap(), rows);
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("xi1,xi2,xi3,eps,k,lambda,Lambda,abs_err,trusted\n"));

    let mut one = Vec::new();
    write_eigen_csv(&mut one, &rows[..1]).unwrap();
    assert_eq!(String::from_utf8(one).unwrap().lines().count(), 2);

    let res = vec![ResolventRow {
        xi: [0.0, 0.0, 1.0],
        eps: 0.1,
        load: Load::MatrixBump,
        rel_err: 0.0123,
        trusted: false,
    }];
    let mut buf = Vec::new();
    write_resolvent_csv(&mut buf, &res).unwrap();
    assert!(buf.starts_with(b"xi1,xi2,xi3,eps,ftag,rel_err,trusted\n"));
    assert_eq!(read_resolvent_csv(buf.as_slice()).unwrap(), res);
}

#[test]
fn tampered_error_column_is_rejected() {
    let text = "xi1,xi2,xi3,eps,k,lambda,Lambda,abs_err,trusted\n0,0,1,0.4,1,2.0,1.5,0.4,true\n";
    assert!(matches!(read_eigen_csv(text.as_bytes()), Err(Error::Parse(_))));
    assert!(write_eigen_csv(Vec::new(), &[]).is_err());
}

#[test]
fn svg_is_well_formed() {
    let mut rows = Vec::new();
    for (i, xi) in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [1.0, 1.0, 2.0]].into_iter().enumerate() {
        for eps in [0.4, 0.2, 0.1, 0.05] {
            rows.push(eigen_row(xi, eps, 1, 1.0 + (i + 1) as f64 * eps, 1.0));
        }
    }
    let fits = fit_series(&rows, Mode::FixedXi, 1e-8);
    assert_eq!(fits.len(), 3);
    for f in &fits {
        assert!((f.slope().unwrap() - 1.0).abs() < 1e-9);
        assert!((f.ratio.unwrap() - 1.0).abs() < 1e-9);
    }
    let mut buf = Vec::new();
    write_svg(&mut buf, &fits, "|lambda - Lambda|").unwrap();
    let text = String::from_utf8(buf).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let lines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
    assert_eq!(lines, 3);
}

#[test]
fn zero_quasimomentum_ground_state_is_exact() {
    let cfg = StudyConfig::parse(SMALL).unwrap();
    let study = eigenvalue_convergence_study(&cfg).unwrap();
    assert_eq!(study.rows.len(), 3);
    for r in &study.rows {
        assert!(r.abs_err <= 2.0 * cfg.solver.tol && r.trusted, "{r:?}");
    }
    assert_eq!(study.fits.len(), 1);
    assert_eq!(study.fits[0].status, FitStatus::Exact);
}

#[test]
fn unit_load_resolvent_is_exact() {
    let cfg = StudyConfig::parse(SMALL).unwrap();
    let study = resolvent_convergence_study(&cfg).unwrap();
    for r in &study.rows {
        assert!(r.rel_err <= 1e-10 && r.trusted, "{r:?}");
    }
    assert_eq!(study.fits[0].status, FitStatus::Exact);
}

#[test]
fn resolvent_error_is_phase_invariant() {
    let cfg = StudyConfig::parse(SMALL).unwrap();
    let s = Setup::new(cfg.r, cfg.h, cfg.n3, &cfg.profile).unwrap();
    let f = Field::interpolate(&s.cross, &s.axial, |y| Load::Exp3.eval(y, cfg.r) + Load::FibreBump.eval(y, cfg.r));
    let mut g = f.clone();
    g.scale(C64::from_polar(1.0, 0.9));
    let eps = 0.2;
    let xi = [0.5, -1.0, 1.0];
    let p = BlochParams::new(eps, xi.map(|x| eps * x)).unwrap();
    let a = resolvent_error(p, Xi(xi), &f, &s).unwrap();
    let b = resolvent_error(p, Xi(xi), &g, &s).unwrap();
    assert!(a > 1e-6);
    assert!((a - b).abs() <= 1e-10 * a, "{a} {b}");
}

#[test]
fn studies_are_deterministic() {
    let text = SMALL.replace("xi=0,0,0", "xi=0,0,1").replace("k=1", "k=2").replace("f=one", "f=exp3,matrix-bump");
    let cfg = StudyConfig::parse(&text).unwrap();
    let emit = || {
        let e = eigenvalue_convergence_study(&cfg).unwrap();
        let r = resolvent_convergence_study(&cfg).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_eigen_csv(&mut a, &e.rows).unwrap();
        write_resolvent_csv(&mut b, &r.rows).unwrap();
        (a, b)
    };
    let first = emit();
    assert_eq!(first, emit());
    assert_eq!(read_eigen_csv(first.0.as_slice()).unwrap().len(), 6);
    assert_eq!(read_resolvent_csv(first.1.as_slice()).unwrap().len(), 6);
}
