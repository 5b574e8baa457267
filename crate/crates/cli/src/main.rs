use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fibrehom::bloch::{gap_scan, reduce_by_symmetry, theta_grid, write_gaps_csv};
use fibrehom::limit::{limit_bands, Xi};
use fibrehom::study::{
    eigenvalue_convergence_study, resolvent_convergence_study, write_eigen_csv, write_fits_csv,
    write_resolvent_csv, write_svg, FitStatus, Mode, SeriesFit, StudyConfig,
};
use fibrehom::BlochParams;

#[derive(Parser)]
#[command(name = "fibrehom", version, about = "Fibre-problem and two-scale limit solvers for high-contrast fibre composites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Study configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Homogenised coefficients A^h and a^h.
    Homogenize(Common),
    /// Fibre-problem bands at every (eps, theta) of the sweep.
    BandsEps(Common),
    /// Limit-operator bands at every xi of the sweep.
    BandsLimit(Common),
    /// Eigenvalue convergence study.
    ConvergeEigs(Common),
    /// Resolvent convergence study.
    ConvergeResolvent(Common),
    /// Coercivity and directional gap scans over a theta grid.
    Gaps(Common),
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    log::info!("writing {}", path.display());
    Ok(BufWriter::new(f))
}

fn report(fits: &[SeriesFit]) {
    for f in fits {
        let status = match &f.status {
            FitStatus::Fitted(r) => format!("slope {:.3} (residual {:.2e})", r.slope, r.residual),
            FitStatus::Exact => "exact".to_string(),
            FitStatus::Refused(why) => format!("not fitted: {why}"),
        };
        let ratio = f.ratio.map_or(String::new(), |r| format!(", error/eps ratio {r:.2}"));
        let trust = if f.trusted { "" } else { " [untrusted]" };
        println!("{}: {status}{ratio}{trust}", f.label);
    }
}

/// `(eps, theta)` pairs of the sweep.
fn sweep(cfg: &StudyConfig) -> Vec<(f64, [f64; 3])> {
    let mut out = Vec::new();
    for s in &cfg.samples {
        for &e in &cfg.eps {
            let theta = match cfg.mode {
                Mode::FixedXi => s.map(|x| e * x),
                Mode::FixedTheta => *s,
            };
            out.push((e, theta));
        }
    }
    out
}

fn run(cmd: Command) -> Result<()> {
    let common = match &cmd {
        Command::Homogenize(c)
        | Command::BandsEps(c)
        | Command::BandsLimit(c)
        | Command::ConvergeEigs(c)
        | Command::ConvergeResolvent(c)
        | Command::Gaps(c) => c,
    };
    let cfg = StudyConfig::from_path(&common.config)?;
    let out = &common.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    match cmd {
        Command::Homogenize(_) => {
            let s = cfg.setup()?;
            let text = s.hc.to_text();
            fs::write(out.join("coefficients.txt"), &text)?;
            print!("{text}");
        }
        Command::BandsEps(_) => {
            let s = cfg.setup()?;
            let mut rows = Vec::new();
            for (eps, theta) in sweep(&cfg) {
                let p = BlochParams::new(eps, theta)?;
                let res = fibrehom::bloch::epsilon_bands(p, cfg.k, s.meshes(), &s.profile, &cfg.solver)?;
                rows.push((p, res));
            }
            fibrehom::bloch::write_bands_csv(create(out, "bands_eps.csv")?, &rows)?;
        }
        Command::BandsLimit(_) => {
            let s = cfg.setup()?;
            let mut xis: Vec<Xi> = sweep(&cfg).into_iter().map(|(e, t)| Xi::from_theta(t, e)).collect();
            if cfg.mode == Mode::FixedXi {
                xis = cfg.samples.iter().map(|&x| Xi(x)).collect();
            }
            let mut rows = Vec::new();
            for xi in xis {
                rows.push((xi, limit_bands(xi, cfg.k, &s.hc, &s.space, &cfg.solver)?));
            }
            fibrehom::limit::write_bands_csv(create(out, "bands_limit.csv")?, &rows)?;
        }
        Command::ConvergeEigs(_) => {
            let study = eigenvalue_convergence_study(&cfg)?;
            write_eigen_csv(create(out, "converge_eigs.csv")?, &study.rows)?;
            write_fits_csv(create(out, "converge_eigs_fits.csv")?, &study.fits)?;
            write_svg(create(out, "converge_eigs.svg")?, &study.fits, "|lambda - Lambda|")?;
            report(&study.fits);
        }
        Command::ConvergeResolvent(_) => {
            let study = resolvent_convergence_study(&cfg)?;
            write_resolvent_csv(create(out, "converge_resolvent.csv")?, &study.rows)?;
            write_fits_csv(create(out, "converge_resolvent_fits.csv")?, &study.fits)?;
            write_svg(create(out, "converge_resolvent.svg")?, &study.fits, "relative resolvent error")?;
            report(&study.fits);
        }
        Command::Gaps(_) => {
            let s = cfg.setup()?;
            let mut thetas = theta_grid(cfg.gap_grid);
            if cfg.gap_symmetry {
                if s.cross.is_dihedrally_symmetric(1e-12) {
                    thetas = reduce_by_symmetry(&thetas);
                } else {
                    log::warn!("cross-section mesh is not dihedrally symmetric; scanning the full grid");
                }
            }
            let rows = gap_scan(&thetas, s.meshes(), &s.profile, &cfg.solver)?;
            write_gaps_csv(create(out, "gaps.csv")?, &rows)?;
            let gamma = rows.iter().map(|r| r.gamma).fold(f64::INFINITY, f64::min);
            let gamma_star = rows.iter().filter_map(|r| r.gamma_star).fold(f64::INFINITY, f64::min);
            println!("min gamma = {gamma:.6e}, min gamma* = {gamma_star:.6e} over {} points", rows.len());
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    run(Cli::parse().command)
}
