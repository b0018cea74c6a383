use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_varmps"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const FILTER_CONFIG: &str = r#"
seed = 11

[model]
type = "ising"
n = 8
j = 1.0
g = 1.05
h = 0.5

[state]
kind = "plus"

[filter]
m = 64
y = "auto"
epsilon_total = 1e-8
e_center = "auto"

[truncation]
max_bond = 0
threshold = 1e-12
"#;

#[test]
fn filter_minimal_config_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(&cfg, FILTER_CONFIG);
    let out = dir.path().join("out");
    let status = bin()
        .args(["filter", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["report"]["delta2"].is_number());
    assert!(report["meta"]["config_hash"].is_string());
    assert!(out.join("state.mps").exists());
    assert!(out.join("summary.txt").exists());
}

#[test]
fn filter_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(&cfg, &FILTER_CONFIG.replace("n = 8", "n = 6").replace("m = 64", "m = 16"));
    let mut reports = Vec::new();
    let mut states = Vec::new();
    for tag in ["a", "b"] {
        let out = dir.path().join(tag);
        let status = bin()
            .args(["filter", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        let mut report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap())
                .unwrap();
        report["report"]
            .as_object_mut()
            .unwrap()
            .remove("wall_time_ms");
        reports.push(report);
        states.push(std::fs::read(out.join("state.mps")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(states[0], states[1], "state checkpoints must be byte-identical");
}

#[test]
fn odd_filter_power_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(&cfg, &FILTER_CONFIG.replace("m = 64", "m = 63"));
    let out = bin()
        .args(["filter", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("filter.m"), "stderr must name the field: {stderr}");
}

#[test]
fn gap_filter_exits_with_norm_collapse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(
        &cfg,
        r#"
seed = 1

[model]
type = "free_field"
n = 5

[state]
kind = "plus"

[filter]
m = 4096
y = 12.0
epsilon_total = 1e-6
e_center = 0.0

[truncation]
max_bond = 8
threshold = 1e-8
"#,
    );
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["filter", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("error.json")).unwrap())
            .unwrap();
    assert_eq!(err["exit_code"], 3);
}

#[test]
fn oracle_writes_spectrum_zeta_phi_and_moments() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(
        &cfg,
        r#"
seed = 1

[model]
type = "free_field"
n = 9

[state]
kind = "plus"

[filter]
m = 32
y = 3.0
"#,
    );
    let out = dir.path().join("out");
    let status = bin()
        .args(["oracle", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let zeta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("zeta.json")).unwrap()).unwrap();
    let zsn = zeta["zeta_sqrt_n"].as_f64().unwrap();
    assert!(
        (0.05..=1.0).contains(&zsn),
        "coin-toss zeta * sqrt(N) = {zsn}"
    );
    let spectrum = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert!(spectrum.starts_with("# config_hash:"));
    assert!(out.join("phi.csv").exists());
    assert!(out.join("moments.json").exists());
}

#[test]
fn oracle_eigenstate_input_gives_half_zeta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(
        &cfg,
        r#"
seed = 1

[model]
type = "free_field"
n = 4

[state]
kind = "zero"
"#,
    );
    let out = dir.path().join("out");
    let status = bin()
        .args(["oracle", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let zeta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("zeta.json")).unwrap()).unwrap();
    // point mass: the Berry-Esseen distance takes its limit value 1/2
    assert!((zeta["zeta"].as_f64().unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn oracle_size_guard() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(
        &cfg,
        r#"
[model]
type = "free_field"
n = 15
"#,
    );
    let out = bin()
        .args(["oracle", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn sweep_isolates_bad_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plan.toml");
    write(
        &cfg,
        r#"
mode = "dense"
m_grid = [16, 7, 32, 64, 128]
seeds = [1]
state = "plus"

[[models]]
type = "ising"
n = 6
j = 1.0
g = 1.05
h = 0.5

[[truncations]]
max_bond = 0
threshold = 1e-12
"#,
    );
    let out = dir.path().join("out");
    let status = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "partial failure keeps exit 0");
    let sweep_dir = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .find(|e| e.file_name().to_string_lossy().starts_with("sweep_"))
        .expect("hash-named sweep directory");
    let csv = std::fs::read_to_string(sweep_dir.path().join("results.csv")).unwrap();
    let ok_rows = csv.lines().filter(|l| l.contains(",true,")).count();
    let bad_rows = csv.lines().filter(|l| l.contains(",false,")).count();
    assert_eq!(ok_rows, 4);
    assert_eq!(bad_rows, 1);
    // four good variance points feed a delta^2 vs M fit
    let fits: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sweep_dir.path().join("fits.json")).unwrap())
            .unwrap();
    let exponent = fits["fits"][0]["fit"]["exponent"].as_f64().unwrap();
    assert!(exponent < -0.5, "variance fit exponent {exponent}");
}

#[test]
fn env_var_supplies_default_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(
        &cfg,
        &FILTER_CONFIG.replace("n = 8", "n = 5").replace("m = 64", "m = 16"),
    );
    let out = dir.path().join("env_out");
    let status = bin()
        .args(["filter", "--config"])
        .arg(&cfg)
        .env("VARMPS_OUT", &out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("report.json").exists());
}

#[test]
fn validate_both_config_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let run_cfg = dir.path().join("run.toml");
    write(&run_cfg, FILTER_CONFIG);
    let out = bin().args(["validate", "--config"]).arg(&run_cfg).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("OK config"));

    let bad_cfg = dir.path().join("bad.toml");
    write(&bad_cfg, &FILTER_CONFIG.replace("\"ising\"", "\"bogus\""));
    let out = bin().args(["validate", "--config"]).arg(&bad_cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
