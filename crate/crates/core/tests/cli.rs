use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
omega = 1
b = 2
h = 1.5
h1 = 1.5
nx = 16
ny = 8
alpha_count = 4
n_trunc_extra = 4
rho_r0 = 1
rho_r1 = 12
rho_i0 = 0
rho_i1 = 0
";

fn superlens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superlens"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn metric(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("metrics.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
        .unwrap_or_else(|| panic!("no {key} in metrics:\n{text}"))
}

#[test]
fn vacuum_solve_conserves_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.txt", &format!("{SMALL}init_kind = uniform\ninit_params = 1\n"));
    let out = dir.path().join("out");
    let o = superlens(&["solve", "--config", &cfg, "--outdir", out.to_str().unwrap(), "--jobs", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: f64 = metric(&out, "energy_residual").parse().unwrap();
    assert!(r <= 1e-8, "{r}");
    for f in ["design.txt", "energy.csv", "modes.csv", "cross_section.csv", "field.csv", "alpha/000_field.txt", "alpha/003_bottom.txt"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn missing_key_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.txt", SMALL);
    let o = superlens(&["solve", "--config", &cfg, "--outdir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`init_kind`"));
}

#[test]
fn parse_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.txt", &format!("{SMALL}init_kind = uniform\ninit_params = 6\nwavelength = 3\n"));
    let o = superlens(&["solve", "--config", &cfg, "--outdir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 15"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(superlens(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(superlens(&["solve"]).status.code(), Some(1));
    assert_eq!(superlens(&["--help"]).status.code(), Some(0));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.txt", &format!("{SMALL}init_kind = random\nseed = 4\nmax_iter = 2\n"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (d, jobs) in [(&a, "1"), (&b, "3")] {
        let o = superlens(&["optimize", "--config", &cfg, "--outdir", d.to_str().unwrap(), "--jobs", jobs]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["metrics.txt", "design.txt", "log.txt", "gradient.txt", "field.csv", "modes.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn zero_iterations_analyses_initial_design() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.txt", &format!("{SMALL}init_kind = uniform\ninit_params = 6\nmax_iter = 0\n"));
    let o = superlens(&["optimize", "--config", &cfg, "--outdir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(metric(dir.path(), "iterations"), "0");
    assert_eq!(metric(dir.path(), "status"), "max_iterations");
    let d = fs::read_to_string(dir.path().join("design.txt")).unwrap();
    assert!(d.lines().skip(1).all(|l| l.starts_with("6.0000000000000000e0 ")));
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}init_kind = random\nseed = 9\n");
    let full = write_config(dir.path(), "full.txt", &format!("{body}max_iter = 4\n"));
    let half = write_config(dir.path(), "half.txt", &format!("{body}max_iter = 2\n"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(superlens(&["optimize", "--config", &full, "--outdir", a.to_str().unwrap()]).status.success());
    assert!(superlens(&["optimize", "--config", &half, "--outdir", b.to_str().unwrap()]).status.success());
    let ck = b.join("checkpoint.txt");
    let o = superlens(&["optimize", "--config", &full, "--outdir", b.to_str().unwrap(), "--resume", ck.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["log.txt", "design.txt", "metrics.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn analyze_reports_gradient_and_kkt() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.txt", &format!("{SMALL}init_kind = crystal\ninit_params = 9 1 0.4 1.2\n"));
    let o = superlens(&["analyze", "--config", &cfg, "--outdir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let k: f64 = metric(dir.path(), "kkt_residual").parse().unwrap();
    assert!(k > 0.0);
    assert!(dir.path().join("gradient.txt").is_file());
}

#[test]
fn quick_verify_passes_and_fault_is_caught() {
    let o = superlens(&["verify", "--quick"]);
    let text = String::from_utf8_lossy(&o.stdout).to_string();
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(!text.contains("FAIL"));
    let o = superlens(&["verify", "--quick", "--inject-fault", "beta-sign"]);
    let text = String::from_utf8_lossy(&o.stdout).to_string();
    assert_eq!(o.status.code(), Some(2), "{text}");
    assert!(text.lines().any(|l| l.starts_with("FAIL") && l.contains("energy")), "{text}");
}
