use std::path::Path;
use std::process::{Command, Output};

fn lelab(cache: &Path, dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lelab"))
        .args(args)
        .current_dir(dir)
        .env("LELAB_CACHE_DIR", cache)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn hyperbola_row() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lelab(tmp.path(), tmp.path(), &["hyperbola", "--p", "3/2", "--N", "8"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..4], &["3/2", "13/7", "8", "I"]);
    assert_eq!(row[5], "-6.0000000000000000e0");

    let o = lelab(tmp.path(), tmp.path(), &["hyperbola", "--p", "0.5", "--N", "8"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn schema_is_json() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lelab(tmp.path(), tmp.path(), &["--print-schema"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["properties"]["reduction"].is_object());
}

#[test]
fn constants_use_the_cache_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("env-cache");
    let o = lelab(&cache, tmp.path(), &["constants", "--p", "5/3", "--N", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 15);
    let l1: f64 = lines.next().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((l1 / 615580.9254646928 - 1.0).abs() < 1e-8);
    let cached: Vec<_> = std::fs::read_dir(&cache).unwrap().collect();
    assert_eq!(cached.len(), 1);
    assert!(!tmp.path().join("lelab-cache").exists());
}

#[test]
fn ground_state_writes_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("profile.csv");
    let o = lelab(
        tmp.path(),
        tmp.path(),
        &["ground-state", "--p", "5/3", "--N", "8", "--out", out.to_str().unwrap()],
    );
    assert!(o.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.contains("r,U,V,dU,dV"));
}

#[test]
fn manifold_and_kernel_checks_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lelab(tmp.path(), tmp.path(), &["manifold-check", "--kind", "sphere", "--N", "8", "--scale", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = lelab(tmp.path(), tmp.path(), &["kernel-check", "--p", "3/2", "--N", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("PASS kernel.control"));
}

#[test]
fn verify_expansion_on_sphere() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sphere.toml");
    std::fs::write(
        &cfg,
        "[hyperbola]\np = \"5/3\"\n[manifold]\nkind = \"sphere\"\nscale = 1.0\n[reduction]\nstarts = 4\n",
    )
    .unwrap();
    let svg = tmp.path().join("fit.svg");
    let o = lelab(
        tmp.path(),
        tmp.path(),
        &["verify-expansion", "--config", cfg.to_str().unwrap(), "--svg", svg.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("eps,J,grad_term"));
    assert_eq!(out.lines().filter(|l| l.starts_with("a,") || l.starts_with("b,") || l.starts_with("c,")).count(), 3);
    assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));
}

#[test]
fn reduce_reports_failure_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("neg.toml");
    // phi = 1 - 12 < 0 everywhere on the unit sphere
    std::fs::write(
        &cfg,
        "[hyperbola]\np = \"5/3\"\n[manifold]\nkind = \"sphere\"\nscale = 1.0\n[potential]\nkind = \"constant\"\nvalue = 1.0\n",
    )
    .unwrap();
    let o = lelab(tmp.path(), tmp.path(), &["reduce", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_is_reproducible_and_rejects_bad_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "output_dir = \"out\"\n[reduction]\nstarts = 8\n").unwrap();
    let a = lelab(tmp.path(), tmp.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert!(a.status.success(), "{}", stdout(&a));
    let b = lelab(tmp.path(), tmp.path(), &["run", "--config", cfg.to_str().unwrap()]);
    let hash = |o: &Output| stdout(o).lines().find(|l| l.starts_with("report ")).unwrap().to_string();
    assert_eq!(hash(&a), hash(&b));
    for f in ["report.json", "summary.txt", "sweep.csv", "expansion.svg", "constants.csv"] {
        assert!(tmp.path().join("out").join(f).exists(), "{f}");
    }

    std::fs::write(&cfg, "[reduction]\nalpha = 0.0\n").unwrap();
    let c = lelab(tmp.path(), tmp.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(c.status.code(), Some(2));
    assert!(!tmp.path().join("lelab-out").exists());
}
