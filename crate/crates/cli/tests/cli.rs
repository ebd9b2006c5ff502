use std::path::Path;
use std::process::{Command, Output};

use nctransport_cli::{Command as Cmd, RunConfig};
use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nctransport"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const QUARTIC_FAIL: &str = r#"
n = 2
beta = 1e-2
w = [[[1, 1, 1, 1], "1"], [[2, 2, 2, 2], "1"]]
"#;

#[test]
fn solve_zero_potential() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zero.toml", "n = 2\n");
    let out = dir.path().join("r.json");
    let o = bin(&["--config", &cfg, "--command", "solve", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out);
    assert_eq!(r["result"]["g"]["terms"], Value::Array(vec![]));
    assert_eq!(r["result"]["iterations"], 1);
    assert_eq!(r["certificate"]["certified"], true);
    assert_eq!(r["truncation_loss"], 0.0);
}

#[test]
fn check_names_the_violated_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "big.toml", QUARTIC_FAIL);
    let out = dir.path().join("r.json");
    let o = bin(&["--config", &cfg, "--command", "check", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("is not < ρ/12"), "{err}");
    assert!(err.contains("is not < 1/8"), "{err}");
    let r = read_json(&out);
    assert_eq!(r["result"]["norm_ok"], false);
    assert_eq!(r["certificate"]["certified"], false);
}

#[test]
fn solve_refuses_failed_conditions_unless_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let text = "n = 1\nbeta = 1e-3\nw = [[[1, 1, 1, 1], \"1\"]]\n";
    let cfg = write(dir.path(), "c.toml", text);
    let o = bin(&["--config", &cfg, "--command", "solve"]);
    assert_eq!(o.status.code(), Some(1));
    let out = dir.path().join("r.json");
    let o = bin(&["--config", &cfg, "--command", "solve", "--override-conditions", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out);
    assert_eq!(r["certificate"]["certified"], false);
    assert_eq!(r["certificate"]["override_conditions"], true);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("unknown.toml", "n = 2\nbogus = 1\n"),
        ("nested.toml", "[rmt]\nsteps = 10\nwhat = 1\n"),
        ("letter.toml", "n = 1\nw = [[[2, 2], \"1\"]]\n"),
        ("coeff.toml", "n = 1\nw = [[[1, 1], \"one\"]]\n"),
        ("radius.toml", "a = 4.0\na_prime = 4.5\n"),
        ("long.toml", "n = 1\ndmax = 2\nw = [[[1, 1, 1, 1], \"1\"]]\n"),
    ] {
        let cfg = write(dir.path(), name, text);
        let o = bin(&["--config", &cfg, "--command", "solve"]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = bin(&["--config", "/nonexistent/x.toml", "--command", "solve"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let o = bin(&["--command", "selftest"]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["result"]["passed"], true);
    assert_eq!(r["result"]["checks"].as_array().unwrap().len(), 10);
}

#[test]
fn onevar_writes_csv_side_file() {
    let dir = tempfile::tempdir().unwrap();
    let text = "n = 1\ndmax = 14\noverride_conditions = true\nw = [[[1, 1, 1, 1], \"1\"]]\n[onevar]\nbetas = [1e-4]\n";
    let cfg = write(dir.path(), "o.toml", text);
    let out = dir.path().join("o.json");
    let o = bin(&["--config", &cfg, "--command", "onevar", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "beta,k,moment_transport,moment_oracle,abs_diff");
    assert_eq!(lines.len(), 1 + 9);
    let r = read_json(&out);
    assert!(r["result"]["betas"][0]["max_abs_diff"].as_f64().unwrap() < 1e-8);
}

#[test]
fn onevar_needs_one_generator() {
    let o = bin(&["--command", "onevar"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_reports_every_section() {
    let dir = tempfile::tempdir().unwrap();
    let text = "n = 2\nbeta = 5e-5\nw = [[[1, 1, 1, 1], \"1\"], [[2, 2, 2, 2], \"1\"]]\n[verify]\nlemma_trials = 5\nlemma_degree = 3\n";
    let cfg = write(dir.path(), "v.toml", text);
    let out = dir.path().join("v.json");
    let o = bin(&["--config", &cfg, "--command", "verify", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out);
    for key in ["transport", "schwinger_dyson", "entropy_shift", "lemma_suite"] {
        assert!(r["result"].get(key).is_some(), "{key}");
    }
    assert!(r["truncation_loss"].as_f64().unwrap() >= 0.0);
    assert_eq!(r["result"]["schwinger_dyson"]["entries"].as_array().unwrap().len(), 2 * 15);
}

#[test]
fn rmt_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = "n = 1\nseed = 3\n[rmt]\nsize = 8\ndraws = 50\nchains = 2\nsteps = 200\nburn_in = 50\nthin = 2\n";
    let cfg = write(dir.path(), "r.toml", text);
    let o = bin(&["--config", &cfg, "--command", "rmt"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["result"]["words"].as_array().unwrap().len(), 3);
    assert_eq!(r["result"]["mala_acceptance"].as_array().unwrap().len(), 2);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.potential().unwrap();
        assert!(cfg.command.is_some());
        seen += 1;
    }
    assert!(seen >= 3);
}

#[test]
fn flag_overrides_config_command() {
    let cfg = RunConfig::parse("command = \"check\"\n").unwrap();
    assert_eq!(cfg.command, Some(Cmd::Check));
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "c.toml", "command = \"check\"\n");
    let o = bin(&["--config", &path, "--command", "selftest"]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["command"], "selftest");
}
