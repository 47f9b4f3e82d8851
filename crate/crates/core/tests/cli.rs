use std::path::Path;
use std::process::{Command, Output};

fn nhdirac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhdirac")).args(args).output().unwrap()
}

fn scenario(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn upright_top_exits_zero_with_zero_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "top.toml",
        "[model]\nname = \"heavy_top\"\n[model.params]\ninertia = [2.0, 2.0, 1.0]\ngamma0 = [0.0, 0.0, 1.0]\nomega0 = [0.0, 0.0, 5.0]\n[integrator]\nt_final = 0.5\n[output]\npath = \"out/top.csv\"\n",
    );
    std::fs::create_dir(dir.path().join("out")).unwrap();
    let out = nhdirac(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = std::fs::read_to_string(dir.path().join("out/top.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,xi_0,xi_1,xi_2,mu_0,mu_1,mu_2,a_0,a_1,a_2,energy,res_constraint,res_dirac,res_advection"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 501);
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f.len(), 14);
        assert!(f[11..].iter().all(|x| x.parse::<f64>().unwrap() == 0.0), "{r}");
        // 17 significant digits: one leading digit plus 16 after the point
        let mantissa = f[10].split('e').next().unwrap();
        assert_eq!(mantissa.split('.').nth(1).unwrap().len(), 16);
    }
    let report = String::from_utf8(out.stdout).unwrap();
    for key in ["energy drift", "constraint residual", "Dirac residual", "advection residual", "wall time"] {
        assert!(report.contains(key), "{report}");
    }
}

#[test]
fn flat_disk_is_an_integration_failure_with_header_only_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "disk.toml", "[model]\nname = \"euler_disk\"\n[model.params]\ngamma0 = [0.0, 0.0, 1.0]\n");
    let out = nhdirac(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    let csv = std::fs::read_to_string(dir.path().join("disk.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("contact point undefined"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("unknown.toml", "[model]\nname = \"pendulum\"\n"),
        ("dt.toml", "[model]\nname = \"heavy_top\"\n[integrator]\ndt = -1.0\n"),
        ("key.toml", "[model]\nname = \"heavy_top\"\n[model.params]\nradius = 1.0\n"),
        ("syntax.toml", "[model\nname = 1"),
        ("params.toml", "[model]\nname = \"heavy_top\"\n[model.params]\nmass = -1.0\n"),
    ] {
        let cfg = scenario(dir.path(), name, body);
        assert_eq!(nhdirac(&["run", &cfg]).status.code(), Some(2), "{name}");
    }
    assert_eq!(nhdirac(&["run", "/nonexistent/scenario.toml"]).status.code(), Some(2));
}

#[test]
fn tight_tolerance_is_a_verification_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "ball.toml",
        "[model]\nname = \"chaplygin_ball\"\n[integrator]\nmethod = \"rk4-oracle\"\ndt = 0.05\nt_final = 1.0\n[verify]\nenergy_tol = 1e-14\n",
    );
    assert_eq!(nhdirac(&["run", &cfg]).status.code(), Some(1));
}

#[test]
fn json_output_mirrors_columns_and_carries_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "s.toml", "[model]\nname = \"suslov_top\"\n[integrator]\nmethod = \"lps-midpoint\"\nt_final = 0.1\ndt = 0.01\n");
    let out_path = dir.path().join("s.json");
    let out = nhdirac(&["run", &cfg, "--format", "json", "--output", out_path.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert_eq!(doc["metadata"]["model"], "suslov_top");
    assert_eq!(doc["metadata"]["seed"], 9);
    assert!(doc["metadata"]["version"].is_string());
    assert!(doc["metadata"]["tolerances"]["dirac_tol"].is_number());
    assert_eq!(doc["columns"]["t"].as_array().unwrap().len(), 11);
    assert_eq!(doc["columns"]["res_dirac"].as_array().unwrap().len(), 11);
}

#[test]
fn batch_runs_keep_order_and_report_worst_code() {
    let dir = tempfile::tempdir().unwrap();
    let ok = scenario(dir.path(), "a.toml", "[model]\nname = \"suslov_top\"\n[integrator]\nt_final = 0.1\n");
    let bad = scenario(dir.path(), "b.toml", "[model]\nname = \"euler_disk\"\n[model.params]\ngamma0 = [0.0, 0.0, 1.0]\n");
    let out = nhdirac(&["run", &ok, &bad, "--jobs", "2"]);
    assert_eq!(out.status.code(), Some(3));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.find("a.toml").unwrap() < text.find("b.toml").unwrap());
}

#[test]
fn model_listing_and_description() {
    let out = nhdirac(&["list-models"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for m in ["heavy_top", "suslov_top", "chaplygin_ball", "chaplygin_sphere", "euler_disk"] {
        assert!(text.contains(m));
    }
    let out = nhdirac(&["describe", "heavy_top"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("Π̇ = Π×Ω − mgl χ×Γ"));
    assert_eq!(nhdirac(&["describe", "pendulum"]).status.code(), Some(2));
}
