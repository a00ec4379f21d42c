use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dslab-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p
}

fn dslab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dslab"))
        .current_dir(dir)
        .env_remove("DSLAB_CONFIG")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn omega0_reports_small_two_scheme_gap() {
    let dir = workdir("omega0");
    let cfg = write_config(&dir, r#"{"n": 256, "output_dir": "out"}"#);
    let o = dslab(&dir, &["omega0", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("omega0 = 1.3608"), "{out}");
    let gap_line = out.lines().find(|l| l.contains("gap")).unwrap();
    let gap: f64 = gap_line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(gap < 1e-6);
    assert!(dir.join("out/omega0_eigenfield.csv").exists());
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("out/omega0.json")).unwrap()).unwrap();
    assert_eq!(doc["meta"]["config"]["n"], 256);
}

#[test]
fn growth_rejects_kappa_outside_the_band() {
    let dir = workdir("kappa0");
    let cfg = write_config(&dir, r#"{"n": 64}"#);
    let o = dslab(&dir, &["growth", "--kappa", "0", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("(0, omega0)"), "{}", stderr(&o));

    let o = dslab(&dir, &["--error-json", "growth", "--kappa", "-1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(err["error"]["exit_code"], 2);
    assert_eq!(err["error"]["kind"], "input");
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = workdir("badcfg");
    let cfg = write_config(&dir, r#"{"gamma1": 1.5}"#);
    let o = dslab(&dir, &["omega0", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("configuration error"));
    let cfg = write_config(&dir, r#"{"unknown_key": 1}"#);
    assert_eq!(dslab(&dir, &["omega0", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.join("nope.json");
    assert_eq!(dslab(&dir, &["omega0", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn environment_variable_selects_the_config() {
    let dir = workdir("env");
    let cfg = write_config(&dir, r#"{"n": 64, "output_dir": "from-env"}"#);
    let o = Command::new(env!("CARGO_BIN_EXE_dslab"))
        .current_dir(&dir)
        .env("DSLAB_CONFIG", &cfg)
        .args(["spectrum", "--c", "2"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.join("from-env/spectrum.csv").exists());
}

#[test]
fn csv_output_is_deterministic_and_hashed() {
    let dir = workdir("determinism");
    let cfg = write_config(&dir, r#"{"n": 96, "output_dir": "a"}"#);
    let c = cfg.to_str().unwrap();
    let args = ["growth", "--fractions", "0.2,0.5,0.8", "--config", c];
    assert_eq!(dslab(&dir, &[&args[..], &["--jobs", "1"]].concat()).status.code(), Some(0));
    let first = std::fs::read(dir.join("a/growth.csv")).unwrap();
    assert_eq!(dslab(&dir, &[&args[..], &["--jobs", "3"]].concat()).status.code(), Some(0));
    let second = std::fs::read(dir.join("a/growth.csv")).unwrap();
    assert_eq!(first, second);

    let text = String::from_utf8(first).unwrap();
    let (head, body) = text.split_once('\n').unwrap();
    let meta: serde_json::Value = serde_json::from_str(head.strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(meta["command"], "growth");
    assert_eq!(meta["config"]["n"], 96);
    let hash = meta["sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    // recompute with an independent tool only if available; otherwise trust length
    if let Ok(o) = Command::new("sha256sum").stdin(std::process::Stdio::piped()).stdout(std::process::Stdio::piped()).spawn() {
        use std::io::Write;
        let mut child = o;
        child.stdin.take().unwrap().write_all(body.as_bytes()).unwrap();
        let out = child.wait_with_output().unwrap();
        assert!(String::from_utf8_lossy(&out.stdout).starts_with(hash));
    }
    let svg = std::fs::read_to_string(dir.join("a/growth.svg")).unwrap();
    assert!(svg.starts_with("<!-- {"));
    assert!(svg.contains("<svg"));
}

#[test]
fn continue_writes_branch_document() {
    let dir = workdir("continue");
    let cfg = write_config(&dir, r#"{"n": 96, "modes": 8, "output_dir": "o"}"#);
    let o = dslab(&dir, &["continue", "--s-max", "0.02", "--ds", "0.01", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("o/branch.json")).unwrap()).unwrap();
    let samples = doc["data"]["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 3);
    assert_eq!(doc["data"]["grid"]["modes"], 8);
    assert_eq!(samples[1]["u_modes"].as_array().unwrap().len(), 9 * 96);
}

#[test]
fn evolve_writes_time_series() {
    let dir = workdir("evolve");
    let cfg = write_config(&dir, r#"{"n": 96, "output_dir": "o"}"#);
    let o = dslab(
        &dir,
        &["evolve", "--t", "6", "--dt", "5e-3", "--nx", "128", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("measured λ"));
    let csv = std::fs::read_to_string(dir.join("o/evolve.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("t,perturbation_norm,mass"));
}

#[test]
fn verify_prints_table_and_signals_failures() {
    let dir = workdir("verify");
    let cfg = write_config(&dir, r#"{"n": 128, "output_dir": "o"}"#);
    let c = cfg.to_str().unwrap();
    let o = dslab(&dir, &["verify", "--only", "9", "--config", c]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().any(|l| l.starts_with("PASS [9]")));
    // the band-edge ratio is a known failure
    let o = dslab(&dir, &["verify", "--only", "7", "--config", c]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL [7]")));
    assert_eq!(dslab(&dir, &["verify", "--only", "42", "--config", c]).status.code(), Some(2));
}
