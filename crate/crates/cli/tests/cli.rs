use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir=std::env::temp_dir().join(format!("fibrehom-cli-{name}-{}", std::process::id()));
    let _=fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(sub: &str, dir: &PathBuf, config: &str) -> Output {
    let cfg=dir.join("study.cfg");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_fibrehom"))
        .args([sub, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

const SMALL: &str = "\
[geometry]
r=0.25
h=0.1

[axial]
n3=8

[sweep]
eps=0.4,0.2,0.1
xi=0,0,1
f=exp3

[solver]
k=1
";

#[test]
fn homogenize_writes_coefficients() {
    let dir=scratch("hom");
    let out=run("homogenize", &dir, SMALL);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text=fs::read_to_string(dir.join("out/coefficients.txt")).unwrap();
    assert_eq!(text, String::from_utf8(out.stdout).unwrap());
    assert!(text.starts_with("coefficients v1"));
    let ah: f64=text.lines().find_map(|l| l.strip_prefix("ah ")).unwrap().parse().unwrap();
    assert!((ah - 1.6).abs() < 1e-12);
}

#[test]
fn convergence_study_writes_all_outputs() {
    let dir=scratch("conv");
    let out=run("converge-eigs", &dir, SMALL);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv=fs::read_to_string(dir.join("out/converge_eigs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
    assert!(fs::read_to_string(dir.join("out/converge_eigs.svg")).unwrap().starts_with("<svg"));
    assert!(dir.join("out/converge_eigs_fits.csv").exists());
    assert!(String::from_utf8(out.stdout).unwrap().contains("xi="));
}

#[test]
fn unknown_key_is_reported_with_its_line() {
    let dir=scratch("bad");
    let out=run("homogenize", &dir, "[geometry]\nr=0.25\nradius=0.3\n");
    assert!(!out.status.success());
    let err=String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
    assert!(!dir.join("out/coefficients.txt").exists());
}
