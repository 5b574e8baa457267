//! Convergence studies of the fibre problems towards the limit problem,
//! log–log rate fitting, the study configuration file, and CSV/SVG output.
//!
//! Every row is computed twice: on the configured meshes and on a companion
//! discretisation with doubled `h` and halved `n₃`. A row is trusted when
//! the two errors agree to within 10%.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{epsilon_bands, modulate, solve_epsilon_resolvent, vertex_l2_norm, Direction};
use crate::cell::{homogenized_coefficients, HomogenizedCoefficients};
use crate::eigensolve::EigenOptions;
use crate::limit::{limit_bands, solve_limit_resolvent, LimitSpace, Xi};
use crate::mesh::{
    build_cross_section_mesh, build_interval_mesh, fibre_submesh, CellMeshes, CoefficientProfile, DiskMesh,
    PeriodicMesh1D, PeriodicMesh2D,
};
use crate::{check_theta, BlochParams, Error, Result, C64};

/// Relative drift between the two discretisations above which a row is untrusted.
pub const TRUST_DRIFT: f64 = 0.1;
/// Resolvent errors at or below this count as exact.
pub const RESOLVENT_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `θ = εξ` for fixed `ξ`.
    FixedXi,
    /// `θ` fixed, `ξ = θ/ε`. Exploratory.
    FixedTheta,
}

/// Right-hand sides of the resolvent study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Load {
    One,
    /// `exp(2πi y₃)`
    Exp3,
    /// `(1 − |y′|²/ρ²)²` on `|y′| < ρ = 0.8r`.
    FibreBump,
    /// `(1 − d²/ρ²)²` with `d` the periodic distance to the cell corner, `ρ = 0.2`.
    MatrixBump,
}

impl Load {
    pub fn tag(self) -> &'static str {
        match self {
            Load::One => "one",
            Load::Exp3 => "exp3",
            Load::FibreBump => "fibre-bump",
            Load::MatrixBump => "matrix-bump",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        [Load::One, Load::Exp3, Load::FibreBump, Load::MatrixBump]
            .into_iter()
            .find(|l| l.tag() == tag)
    }

    pub fn eval(self, y: [f64; 3], r: f64) -> C64 {
        let bump = |d2: f64, rho: f64| {
            let s = 1.0 - d2 / (rho * rho);
            if s > 0.0 {
                s * s
            } else {
                0.0
            }
        };
        match self {
            Load::One => C64::new(1.0, 0.0),
            Load::Exp3 => C64::from_polar(1.0, 2.0 * PI * y[2]),
            Load::FibreBump => C64::new(bump(y[0] * y[0] + y[1] * y[1], 0.8 * r), 0.0),
            Load::MatrixBump => {
                let wrap = |x: f64| x - x.round();
                let (dx, dy) = (wrap(y[0] - 0.5), wrap(y[1] - 0.5));
                C64::new(bump(dx * dx + dy * dy, 0.2), 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub r: f64,
    pub h: f64,
    /// Axial nodes.
    pub n3: usize,
    pub profile: CoefficientProfile,
    pub eps: Vec<f64>,
    pub mode: Mode,
    /// `ξ` in fixed-xi mode, `θ` in fixed-theta mode.
    pub samples: Vec<[f64; 3]>,
    pub k: usize,
    pub loads: Vec<Load>,
    pub solver: EigenOptions,
    pub gap_grid: usize,
    pub gap_symmetry: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            r: 0.25,
            h: 0.02,
            n3: 64,
            profile: CoefficientProfile::piecewise(vec![1.0, 4.0], vec![0.0, 0.5]).expect("valid default profile"),
            eps: vec![0.4, 0.2, 0.1, 0.05],
            mode: Mode::FixedXi,
            samples: vec![[0.0, 0.0, 1.0]],
            k: 3,
            loads: vec![Load::Exp3],
            solver: EigenOptions::default(),
            gap_grid: 5,
            gap_symmetry: true,
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("geometry", &["r", "h"]),
    ("axial", &["n3"]),
    ("coefficient", &["kind", "values", "breakpoints", "nu"]),
    ("sweep", &["eps", "xi", "theta", "mode", "f"]),
    ("solver", &["tol", "k", "maxit", "seed"]),
    ("gaps", &["grid", "symmetry"]),
];

fn cfg_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(v: &str, line: usize, key: &str) -> Result<T> {
    v.parse().map_err(|_| cfg_err(line, format!("cannot parse {key}={v}")))
}

fn parse_list(v: &str, line: usize, key: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| parse_num(x.trim(), line, key)).collect()
}

fn parse_triples(v: &str, line: usize, key: &str) -> Result<Vec<[f64; 3]>> {
    v.split(';')
        .map(|t| {
            let xs = parse_list(t, line, key)?;
            <[f64; 3]>::try_from(xs).map_err(|_| cfg_err(line, format!("{key} entries need three components")))
        })
        .collect()
}

impl StudyConfig {
    /// Parses the line-oriented format: `[section]` headers, `key=value`
    /// tokens on the header line or on following lines, `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: HashMap<(&str, &str), (&str, usize)> = HashMap::new();
        let mut section: Option<(&str, usize)> = None;
        let mut headers: HashMap<&str, usize> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let mut rest = raw.split('#').next().unwrap_or("").trim();
            if let Some(body) = rest.strip_prefix('[') {
                let close = body.find(']').ok_or_else(|| cfg_err(line, "unclosed section header"))?;
                let name = &body[..close];
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(cfg_err(line, format!("unknown section [{name}]")));
                }
                if headers.insert(name, line).is_some() {
                    return Err(cfg_err(line, format!("section [{name}] repeated")));
                }
                section = Some((name, line));
                rest = &body[close + 1..];
            }
            for token in rest.split_whitespace() {
                let (sec, _) = section.ok_or_else(|| cfg_err(line, "key outside any section"))?;
                let (key, value) = token
                    .split_once('=')
                    .ok_or_else(|| cfg_err(line, format!("expected key=value, got {token}")))?;
                let allowed = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
                if !allowed.contains(&key) {
                    return Err(cfg_err(line, format!("unknown key {key} in [{sec}]")));
                }
                if entries.insert((sec, key), (value, line)).is_some() {
                    return Err(cfg_err(line, format!("key {key} repeated in [{sec}]")));
                }
            }
        }
        let get = |sec: &'static str, key: &'static str| entries.get(&(sec, key)).copied();
        let mut cfg = StudyConfig::default();

        if let Some((v, l)) = get("geometry", "r") {
            cfg.r = parse_num(v, l, "r")?;
        }
        if let Some((v, l)) = get("geometry", "h") {
            cfg.h = parse_num(v, l, "h")?;
        }
        if !(cfg.r > 0.0 && cfg.r < 0.5 && cfg.h > 0.0 && cfg.h <= 0.5 * cfg.r) {
            let l = get("geometry", "h").or(get("geometry", "r")).map_or(0, |e| e.1);
            return Err(cfg_err(l, format!("need 0 < r < 1/2 and 0 < h <= r/2, got r={} h={}", cfg.r, cfg.h)));
        }
        if let Some((v, l)) = get("axial", "n3") {
            cfg.n3 = parse_num(v, l, "n3")?;
        }

        if let Some((v, l)) = get("coefficient", "values") {
            let values = parse_list(v, l, "values")?;
            let kind = get("coefficient", "kind").map_or("piecewise", |e| e.0);
            let profile = match kind {
                "constant" if values.len() == 1 => CoefficientProfile::constant(values[0]),
                "constant" => return Err(cfg_err(l, "constant profile takes one value")),
                "piecewise" => {
                    let (b, bl) = get("coefficient", "breakpoints")
                        .ok_or_else(|| cfg_err(l, "piecewise profile needs breakpoints"))?;
                    CoefficientProfile::piecewise(values, parse_list(b, bl, "breakpoints")?)
                }
                other => return Err(cfg_err(l, format!("unknown coefficient kind {other}"))),
            };
            cfg.profile = profile.map_err(|e| cfg_err(l, e.to_string()))?;
        } else if let Some((_, l)) = get("coefficient", "kind").or(get("coefficient", "breakpoints")) {
            return Err(cfg_err(l, "coefficient section needs values"));
        }
        if let Some((v, l)) = get("coefficient", "nu") {
            let nu = parse_num(v, l, "nu")?;
            cfg.profile = cfg.profile.with_nu(nu).map_err(|e| cfg_err(l, e.to_string()))?;
        }
        build_interval_mesh(cfg.n3, &cfg.profile).map_err(|e| cfg_err(get("axial", "n3").map_or(0, |e| e.1), e.to_string()))?;

        let eps_line = get("sweep", "eps").map_or(0, |e| e.1);
        if let Some((v, l)) = get("sweep", "eps") {
            cfg.eps = parse_list(v, l, "eps")?;
        }
        if cfg.eps.is_empty() || cfg.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(cfg_err(eps_line, "eps values must lie in (0, 1)"));
        }
        if cfg.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(cfg_err(eps_line, "eps values must be strictly decreasing"));
        }
        let mode_given = get("sweep", "mode");
        cfg.mode = match mode_given.map(|e| e.0) {
            None if get("sweep", "theta").is_some() => Mode::FixedTheta,
            None | Some("fixed-xi") => Mode::FixedXi,
            Some("fixed-theta") => Mode::FixedTheta,
            Some(other) => return Err(cfg_err(mode_given.map_or(0, |e| e.1), format!("unknown mode {other}"))),
        };
        let (own, other) = match cfg.mode {
            Mode::FixedXi => ("xi", "theta"),
            Mode::FixedTheta => ("theta", "xi"),
        };
        if let Some((_, l)) = get("sweep", other) {
            return Err(cfg_err(l, format!("{other} samples given in {own} mode")));
        }
        let sample_line = match get("sweep", own) {
            Some((v, l)) => {
                cfg.samples = parse_triples(v, l, own)?;
                l
            }
            None if cfg.mode == Mode::FixedTheta => return Err(cfg_err(eps_line, "fixed-theta mode needs theta samples")),
            None => eps_line,
        };
        for s in &cfg.samples {
            match cfg.mode {
                Mode::FixedXi => {
                    for &e in &cfg.eps {
                        check_theta(s.map(|x| e * x))
                            .map_err(|_| cfg_err(sample_line, format!("theta = {e} * {s:?} leaves the dual cell")))?;
                    }
                }
                Mode::FixedTheta => {
                    check_theta(*s).map_err(|e| cfg_err(sample_line, e.to_string()))?;
                }
            }
        }
        if let Some((v, l)) = get("sweep", "f") {
            cfg.loads = v
                .split(',')
                .map(|t| Load::from_tag(t).ok_or_else(|| cfg_err(l, format!("unknown load {t}"))))
                .collect::<Result<_>>()?;
        }

        if let Some((v, l)) = get("solver", "tol") {
            cfg.solver.tol = parse_num(v, l, "tol")?;
            if !(cfg.solver.tol > 0.0) {
                return Err(cfg_err(l, "tol must be positive"));
            }
        }
        if let Some((v, l)) = get("solver", "k") {
            cfg.k = parse_num(v, l, "k")?;
            if cfg.k == 0 {
                return Err(cfg_err(l, "k must be at least 1"));
            }
        }
        if let Some((v, l)) = get("solver", "maxit") {
            cfg.solver.max_iter = parse_num(v, l, "maxit")?;
        }
        if let Some((v, l)) = get("solver", "seed") {
            cfg.solver.seed = parse_num(v, l, "seed")?;
        }

        if let Some((v, l)) = get("gaps", "grid") {
            cfg.gap_grid = parse_num(v, l, "grid")?;
            if cfg.gap_grid == 0 {
                return Err(cfg_err(l, "grid must be at least 1"));
            }
        }
        if let Some((v, l)) = get("gaps", "symmetry") {
            cfg.gap_symmetry = match v {
                "auto" => true,
                "off" => false,
                _ => return Err(cfg_err(l, format!("symmetry must be auto or off, got {v}"))),
            };
        }
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text)
    }

    /// `(ε, θ, ξ)` for every sample.
    fn couplings(&self, sample: [f64; 3], eps: f64) -> ([f64; 3], Xi) {
        match self.mode {
            Mode::FixedXi => (sample.map(|x| eps * x), Xi(sample)),
            Mode::FixedTheta => (sample, Xi::from_theta(sample, eps)),
        }
    }

    /// Meshes and limit data at the configured resolution.
    pub fn setup(&self) -> Result<Setup> {
        Setup::new(self.r, self.h, self.n3, &self.profile)
    }

    /// The companion discretisation used for the trust check: one level
    /// coarser, or one level finer when the mesh is already as coarse as `r`
    /// allows.
    pub fn companion(&self) -> Result<Setup> {
        if 2.0 * self.h <= 0.5 * self.r {
            Setup::new(self.r, 2.0 * self.h, (self.n3 / 2).max(2), &self.profile)
        } else {
            Setup::new(self.r, 0.5 * self.h, 2 * self.n3, &self.profile)
        }
    }

    fn warn_mode(&self) {
        if self.mode == Mode::FixedTheta {
            log::warn!("fixed-theta mode is exploratory: xi = theta/eps grows and the limit point moves");
        }
    }
}

/// Everything a study needs on one discretisation.
#[derive(Debug, Clone)]
pub struct Setup {
    pub profile: CoefficientProfile,
    pub cross: PeriodicMesh2D,
    pub axial: PeriodicMesh1D,
    pub disk: DiskMesh,
    pub hc: HomogenizedCoefficients,
    pub space: LimitSpace,
}

impl Setup {
    pub fn new(r: f64, h: f64, n3: usize, profile: &CoefficientProfile) -> Result<Self> {
        let cross = build_cross_section_mesh(r, h)?;
        let axial = build_interval_mesh(n3, profile)?;
        let disk = fibre_submesh(&cross);
        let hc = homogenized_coefficients(&cross, profile)?;
        let space = LimitSpace::new(&disk);
        Ok(Self {
            profile: profile.clone(),
            cross,
            axial,
            disk,
            hc,
            space,
        })
    }

    pub fn meshes(&self) -> CellMeshes<'_> {
        CellMeshes {
            cross: &self.cross,
            axial: &self.axial,
        }
    }
}

/// One eigenvalue comparison `λ_ε^{(k)}(θ)` against `Λ^{(k)}(ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub xi: [f64; 3],
    pub eps: f64,
    /// From 1.
    pub k: usize,
    pub lambda: f64,
    pub lambda_limit: f64,
    pub abs_err: f64,
    pub trusted: bool,
}

/// One resolvent comparison, `‖u − 𝔼_θ*(z₀ + z₁)‖ / ‖f‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventRow {
    pub xi: [f64; 3],
    pub eps: f64,
    pub load: Load,
    pub rel_err: f64,
    pub trusted: bool,
}

/// What a fit needs from a row.
pub trait StudyRow {
    fn eps(&self) -> f64;
    fn error(&self) -> f64;
    fn trusted(&self) -> bool;
    /// Error at or below which the row counts as exact.
    fn floor(&self, tol: f64) -> f64;
    /// Series label; `θ = εξ` identifies the point in fixed-theta mode.
    fn series(&self, mode: Mode) -> String;
}

fn point_label(xi: [f64; 3], eps: f64, mode: Mode) -> String {
    match mode {
        Mode::FixedXi => format!("xi=({:.6},{:.6},{:.6})", xi[0], xi[1], xi[2]),
        Mode::FixedTheta => {
            let t = xi.map(|x| x * eps);
            format!("theta=({:.6},{:.6},{:.6})", t[0], t[1], t[2])
        }
    }
}

impl StudyRow for ConvergenceRow {
    fn eps(&self) -> f64 {
        self.eps
    }
    fn error(&self) -> f64 {
        self.abs_err
    }
    fn trusted(&self) -> bool {
        self.trusted
    }
    fn floor(&self, tol: f64) -> f64 {
        2.0 * tol * self.lambda_limit.abs().max(1.0)
    }
    fn series(&self, mode: Mode) -> String {
        format!("{} k={}", point_label(self.xi, self.eps, mode), self.k)
    }
}

impl StudyRow for ResolventRow {
    fn eps(&self) -> f64 {
        self.eps
    }
    fn error(&self) -> f64 {
        self.rel_err
    }
    fn trusted(&self) -> bool {
        self.trusted
    }
    fn floor(&self, _tol: f64) -> f64 {
        RESOLVENT_FLOOR
    }
    fn series(&self, mode: Mode) -> String {
        format!("{} f={}", point_label(self.xi, self.eps, mode), self.load.tag())
    }
}

fn trusted(fine: f64, coarse: f64, floor: f64) -> bool {
    if fine <= floor && coarse <= floor {
        return true;
    }
    (fine - coarse).abs() < TRUST_DRIFT * fine
}

fn cmp_xi(a: &[f64; 3], b: &[f64; 3]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `log error`.
    pub residual: f64,
    /// Points dropped for a zero error.
    pub dropped: usize,
}

/// Least-squares line through `(log ε, log error)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.iter().any(|&(e, _)| !(e > 0.0 && e.is_finite())) {
        return Err(Error::Fit("eps values must be positive".into()));
    }
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, err)| err > 0.0 && err.is_finite())
        .map(|&(e, err)| (e.ln(), err.ln()))
        .collect();
    let dropped = points.len() - kept.len();
    if dropped > 0 {
        log::info!("rate fit: dropped {dropped} point(s) with zero or nonpositive error");
    }
    if kept.len() < 3 {
        return Err(Error::Fit(format!("{} usable points, need at least 3", kept.len())));
    }
    let n = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / n;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all eps values coincide".into()));
    }
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (kept.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        residual,
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitStatus {
    Fitted(RateFit),
    /// Every error is at the solver floor; there is no rate to measure.
    Exact,
    Refused(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFit {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub trusted: bool,
    pub status: FitStatus,
    /// `max(error/ε) / min(error/ε)` over nonzero errors.
    pub ratio: Option<f64>,
}

impl SeriesFit {
    pub fn slope(&self) -> Option<f64> {
        match &self.status {
            FitStatus::Fitted(f) => Some(f.slope),
            _ => None,
        }
    }
}

/// Groups rows into series and fits each. Untrusted series are fitted too
/// but carry `trusted = false`.
pub fn fit_series<R: StudyRow>(rows: &[R], mode: Mode, tol: f64) -> Vec<SeriesFit> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<&R>> = HashMap::new();
    for r in rows {
        let label = r.series(mode);
        if !groups.contains_key(&label) {
            order.push(label.clone());
        }
        groups.entry(label).or_default().push(r);
    }
    order
        .into_iter()
        .map(|label| {
            let g = &groups[&label];
            let points: Vec<(f64, f64)> = g.iter().map(|r| (r.eps(), r.error())).collect();
            let trusted = g.iter().all(|r| r.trusted());
            let status = if g.iter().all(|r| r.error() <= r.floor(tol)) {
                FitStatus::Exact
            } else {
                match fit_rate(&points) {
                    Ok(f) => FitStatus::Fitted(f),
                    Err(e) => FitStatus::Refused(e.to_string()),
                }
            };
            let scaled: Vec<f64> = points.iter().filter(|p| p.1 > 0.0).map(|p| p.1 / p.0).collect();
            let ratio = (!scaled.is_empty()).then(|| {
                scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min)
            });
            SeriesFit {
                label,
                points,
                trusted,
                status,
                ratio,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study<R> {
    pub rows: Vec<R>,
    pub fits: Vec<SeriesFit>,
}

fn eigen_rows(cfg: &StudyConfig, s: &Setup) -> Result<Vec<ConvergenceRow>> {
    let tasks: Vec<([f64; 3], f64)> = cfg
        .samples
        .iter()
        .flat_map(|&x| cfg.eps.iter().map(move |&e| (x, e)))
        .collect();
    let per_task: Vec<Vec<ConvergenceRow>> = tasks
        .par_iter()
        .map(|&(sample, eps)| {
            let (theta, xi) = cfg.couplings(sample, eps);
            let lim = limit_bands(xi, cfg.k, &s.hc, &s.space, &cfg.solver)?;
            let fib = epsilon_bands(BlochParams::new(eps, theta)?, cfg.k, s.meshes(), &s.profile, &cfg.solver)?;
            if fib.eigenvalues.len() > cfg.k || lim.eigenvalues.len() > cfg.k {
                log::info!(
                    "cluster at k={} extended to {} (fibre) / {} (limit) at eps={eps}, xi={:?}",
                    cfg.k,
                    fib.eigenvalues.len(),
                    lim.eigenvalues.len(),
                    xi.0
                );
            }
            Ok((0..cfg.k)
                .map(|j| {
                    let (lambda, lambda_limit) = (fib.eigenvalues[j], lim.eigenvalues[j]);
                    ConvergenceRow {
                        xi: xi.0,
                        eps,
                        k: j + 1,
                        lambda,
                        lambda_limit,
                        abs_err: (lambda - lambda_limit).abs(),
                        trusted: false,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_task.into_iter().flatten().collect())
}

/// Compares `λ_ε^{(k)}(θ)` with `Λ^{(k)}(ξ)` over the ε list for every
/// sample and `k = 1..K`, and fits the rate of each `(sample, k)` series.
pub fn eigenvalue_convergence_study(cfg: &StudyConfig) -> Result<Study<ConvergenceRow>> {
    cfg.warn_mode();
    let mut rows = eigen_rows(cfg, &cfg.setup()?)?;
    let coarse = eigen_rows(cfg, &cfg.companion()?)?;
    for (r, c) in rows.iter_mut().zip(&coarse) {
        r.trusted = trusted(r.abs_err, c.abs_err, r.floor(cfg.solver.tol));
    }
    rows.sort_by(|a, b| cmp_xi(&a.xi, &b.xi).then(a.k.cmp(&b.k)).then(b.eps.total_cmp(&a.eps)));
    let fits = fit_series(&rows, cfg.mode, cfg.solver.tol);
    Ok(Study { rows, fits })
}

/// `‖u_{ε,θ} − 𝔼_θ*(z₀ + z₁)‖ / ‖f‖` for a periodic load `f`, with both
/// fields compared through their values on raw vertices ⊗ axial nodes.
pub fn resolvent_error(params: BlochParams, xi: Xi, f: &crate::assembly::Field, s: &Setup) -> Result<f64> {
    let u = solve_epsilon_resolvent(params, f, s.meshes(), &s.profile)?;
    let theta_prime = params.theta_prime();
    let z = solve_limit_resolvent(
        xi,
        &modulate(theta_prime, f, Direction::Forward),
        &s.hc,
        &s.space,
        &s.cross,
        &s.axial,
        &s.disk,
    )?;
    let n1 = s.axial.n_nodes();
    let zv = z.vertex_values(&s.cross, &s.disk);
    let mut diff = u.vertex_values(&s.cross)?;
    for (v, p) in s.cross.vertices.iter().enumerate() {
        let w = zv[v] * C64::from_polar(1.0, -(theta_prime[0] * p[0] + theta_prime[1] * p[1]));
        diff[v * n1..(v + 1) * n1].iter_mut().for_each(|x| *x -= w);
    }
    let fnorm = vertex_l2_norm(&f.vertex_values(&s.cross)?, &s.cross, &s.axial)?;
    if fnorm == 0.0 {
        return Err(Error::Parameter("resolvent load vanishes".into()));
    }
    Ok(vertex_l2_norm(&diff, &s.cross, &s.axial)? / fnorm)
}

fn resolvent_rows(cfg: &StudyConfig, s: &Setup) -> Result<Vec<ResolventRow>> {
    let mut tasks = Vec::new();
    for &x in &cfg.samples {
        for &load in &cfg.loads {
            for &e in &cfg.eps {
                tasks.push((x, load, e));
            }
        }
    }
    tasks
        .par_iter()
        .map(|&(sample, load, eps)| {
            let (theta, xi) = cfg.couplings(sample, eps);
            let f = crate::assembly::Field::interpolate(&s.cross, &s.axial, |y| load.eval(y, cfg.r));
            let rel_err = resolvent_error(BlochParams::new(eps, theta)?, xi, &f, s)?;
            Ok(ResolventRow {
                xi: xi.0,
                eps,
                load,
                rel_err,
                trusted: false,
            })
        })
        .collect()
}

/// The resolvent comparison for every sample, load and `ε`.
pub fn resolvent_convergence_study(cfg: &StudyConfig) -> Result<Study<ResolventRow>> {
    cfg.warn_mode();
    let mut rows = resolvent_rows(cfg, &cfg.setup()?)?;
    let coarse = resolvent_rows(cfg, &cfg.companion()?)?;
    for (r, c) in rows.iter_mut().zip(&coarse) {
        r.trusted = trusted(r.rel_err, c.rel_err, RESOLVENT_FLOOR);
    }
    rows.sort_by(|a, b| cmp_xi(&a.xi, &b.xi).then(a.load.cmp(&b.load)).then(b.eps.total_cmp(&a.eps)));
    let fits = fit_series(&rows, cfg.mode, cfg.solver.tol);
    Ok(Study { rows, fits })
}

#[derive(Serialize, Deserialize)]
struct EigenRecord {
    xi1: f64,
    xi2: f64,
    xi3: f64,
    eps: f64,
    k: usize,
    lambda: f64,
    #[serde(rename = "Lambda")]
    lambda_limit: f64,
    abs_err: f64,
    trusted: bool,
}

#[derive(Serialize, Deserialize)]
struct ResolventRecord {
    xi1: f64,
    xi2: f64,
    xi3: f64,
    eps: f64,
    ftag: String,
    rel_err: f64,
    trusted: bool,
}

fn nonempty<T>(rows: &[T]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Parameter("refusing to emit an empty table".into()));
    }
    Ok(())
}

pub fn write_eigen_csv(w: impl Write, rows: &[ConvergenceRow]) -> Result<()> {
    nonempty(rows)?;
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(EigenRecord {
            xi1: r.xi[0],
            xi2: r.xi[1],
            xi3: r.xi[2],
            eps: r.eps,
            k: r.k,
            lambda: r.lambda,
            lambda_limit: r.lambda_limit,
            abs_err: r.abs_err,
            trusted: r.trusted,
        })?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}

/// Reads rows back; `abs_err` is recomputed and must match the stored value.
pub fn read_eigen_csv(r: impl Read) -> Result<Vec<ConvergenceRow>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize()
        .enumerate()
        .map(|(i, rec)| {
            let rec: EigenRecord = rec?;
            let abs_err = (rec.lambda - rec.lambda_limit).abs();
            if (abs_err - rec.abs_err).abs() > 1e-14 * abs_err.max(f64::MIN_POSITIVE) {
                return Err(Error::Parse(format!(
                    "row {}: abs_err {} disagrees with |lambda - Lambda| = {abs_err}",
                    i + 1,
                    rec.abs_err
                )));
            }
            Ok(ConvergenceRow {
                xi: [rec.xi1, rec.xi2, rec.xi3],
                eps: rec.eps,
                k: rec.k,
                lambda: rec.lambda,
                lambda_limit: rec.lambda_limit,
                abs_err,
                trusted: rec.trusted,
            })
        })
        .collect()
}

pub fn write_resolvent_csv(w: impl Write, rows: &[ResolventRow]) -> Result<()> {
    nonempty(rows)?;
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(ResolventRecord {
            xi1: r.xi[0],
            xi2: r.xi[1],
            xi3: r.xi[2],
            eps: r.eps,
            ftag: r.load.tag().to_string(),
            rel_err: r.rel_err,
            trusted: r.trusted,
        })?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn read_resolvent_csv(r: impl Read) -> Result<Vec<ResolventRow>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize()
        .map(|rec| {
            let rec: ResolventRecord = rec?;
            let load = Load::from_tag(&rec.ftag).ok_or_else(|| Error::Parse(format!("unknown load tag {}", rec.ftag)))?;
            Ok(ResolventRow {
                xi: [rec.xi1, rec.xi2, rec.xi3],
                eps: rec.eps,
                load,
                rel_err: rec.rel_err,
                trusted: rec.trusted,
            })
        })
        .collect()
}

/// `series,trusted,status,slope,intercept,residual,ratio` per series.
pub fn write_fits_csv(mut w: impl Write, fits: &[SeriesFit]) -> Result<()> {
    let mut s = String::from("series,trusted,status,slope,intercept,residual,ratio\n");
    for f in fits {
        let ratio = f.ratio.map_or(String::new(), |r| r.to_string());
        let (status, fit) = match &f.status {
            FitStatus::Fitted(r) => ("fitted", format!("{},{},{}", r.slope, r.intercept, r.residual)),
            FitStatus::Exact => ("exact", ",,".into()),
            FitStatus::Refused(_) => ("refused", ",,".into()),
        };
        let _ = writeln!(s, "\"{}\",{},{status},{fit},{ratio}", f.label, f.trusted);
    }
    w.write_all(s.as_bytes()).map_err(|e| Error::io("<fits>", e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const PALETTE: [&str; 9] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Log–log line plot of error against `ε`, one polyline per series.
/// Nonpositive errors are left out.
pub fn write_svg(mut w: impl Write, fits: &[SeriesFit], y_label: &str) -> Result<()> {
    let pts: Vec<(f64, f64)> = fits.iter().flat_map(|f| f.points.iter().copied()).filter(|p| p.1 > 0.0).collect();
    if fits.is_empty() {
        return Err(Error::Parameter("refusing to plot an empty table".into()));
    }
    let bounds = |sel: fn(&(f64, f64)) -> f64| {
        let lo = pts.iter().map(sel).fold(f64::INFINITY, f64::min).log10().floor();
        let hi = pts.iter().map(sel).fold(f64::NEG_INFINITY, f64::max).log10().ceil();
        if pts.is_empty() {
            (-1.0, 0.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo, lo + 1.0)
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let (left, top, width, height) = (70.0, 20.0, 480.0, 340.0);
    let px = |x: f64| left + (x.log10() - x0) / (x1 - x0) * width;
    let py = |y: f64| top + (y1 - y.log10()) / (y1 - y0) * height;

    let mut s = String::new();
    let legend_h = 18.0 * fits.len() as f64;
    let total_h = (top + height + 50.0).max(top + legend_h + 10.0);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="960" height="{total_h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{width}" height="{height}" fill="none" stroke="black"/>"#
    );
    for d in x0 as i32..=x1 as i32 {
        let x = px(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{}" stroke="#ddd"/><text x="{x:.2}" y="{}" text-anchor="middle">1e{d}</text>"##,
            top + height,
            top + height + 15.0
        );
    }
    for d in y0 as i32..=y1 as i32 {
        let y = py(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            left + width,
            left - 5.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">eps</text>"#,
        left + width / 2.0,
        top + height + 35.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        top + height / 2.0,
        top + height / 2.0,
        escape(y_label)
    );
    for (i, f) in fits.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = f
            .points
            .iter()
            .filter(|p| p.1 > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if !coords.is_empty() {
            let dash = if f.trusted { "" } else { r#" stroke-dasharray="4 3""# };
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                coords.join(" ")
            );
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let slope = f.slope().map_or(String::new(), |v| format!(" slope {v:.3}"));
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}{}</text>"#,
            left + width + 15.0,
            left + width + 35.0,
            left + width + 40.0,
            ly + 4.0,
            escape(&f.label),
            slope
        );
    }
    s.push_str("</svg>\n");
    w.write_all(s.as_bytes()).map_err(|e| Error::io("<svg>", e))
}
