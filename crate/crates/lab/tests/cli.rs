//! End-to-end behaviour of the `snls` binary: exit codes, manifests and
//! reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn snls(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snls"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SNLS_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_twice_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["solve", "--case", "ia", "--d", "2", "--p", "4", "--s0", "1", "--phi", "cutoff:K=8", "--T", "0.1", "--seed", "7"];
    let a = snls(&args, &tmp.path().join("a"));
    let b = snls(&[&args[..], &["--threads", "2"]].concat(), &tmp.path().join("b"));
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    for name in ["u_final.bin", "v_final.bin", "norms.csv", "contraction.csv", "solution.json", "manifest.json"] {
        let x = fs::read(tmp.path().join("a").join(name)).unwrap();
        let y = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["config"]["solver"]["case"], "ia");
    assert_eq!(manifest["config"]["phi"]["k_max"], 8.0);
}

#[test]
fn manifest_config_replays_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = snls(&["sample-noise", "--seed", "3", "--phi", "power-law:alpha=1.2", "--steps", "6"], &tmp.path().join("a"));
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    // rebuild a config file from the resolved configuration and run again
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("a/manifest.json")).unwrap()).unwrap();
    let config: toml::Value = serde_json::from_value(manifest["config"].clone()).unwrap();
    let file = tmp.path().join("replay.toml");
    fs::write(&file, toml::to_string(&config).unwrap()).unwrap();
    let again = snls(&["sample-noise", "--config", file.to_str().unwrap()], &tmp.path().join("b"));
    assert_eq!(again.status.code(), Some(0), "{}", stderr(&again));
    for j in 0..=6 {
        let rel = format!("fields/psi_{j:05}.bin");
        assert_eq!(fs::read(tmp.path().join("a").join(&rel)).unwrap(), fs::read(tmp.path().join("b").join(&rel)).unwrap());
    }
    assert_eq!(fs::read(tmp.path().join("a/norms.csv")).unwrap(), fs::read(tmp.path().join("b/norms.csv")).unwrap());
}

#[test]
fn schema_violations_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let o = snls(&["solve", "--seed", "1", "--set", "grid.bogus=3"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.bogus"), "{}", stderr(&o));

    let o = snls(&["solve", "--seed", "1", "--set", "time.steps=\"many\""], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("time.steps"), "{}", stderr(&o));

    let o = snls(&["randomize"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run.seed"), "{}", stderr(&o));

    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[nonsense]\nx = 1\n").unwrap();
    let o = snls(&["solve", "--seed", "1", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nonsense"), "{}", stderr(&o));
}

#[test]
fn degenerate_noise_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let o = snls(&["verify-lemma21", "--seed", "1", "--phi", "zero"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("φ = 0"), "{}", stderr(&o));
}

#[test]
fn hypothesis_violations_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    // p = 2 is below the mass-critical power in two dimensions
    let o = snls(&["solve", "--seed", "1", "--case", "ia", "--p", "2"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("hypothesis"), "{}", stderr(&o));
}

#[test]
fn non_contraction_exits_four_and_keeps_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = snls(
        &["solve", "--seed", "1", "--case", "ia", "--T", "1.0", "--set", "u0.amplitude=40"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("existence horizon"), "{}", stderr(&o));
    assert!(tmp.path().join("manifest.json").exists());
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("solution.json")).unwrap()).unwrap();
    assert_eq!(summary["converged"], false);
}

#[test]
fn report_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run1");
    let o = snls(&["randomize", "--seed", "5", "--d", "1"], &run);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = snls(&["report"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let md = fs::read_to_string(tmp.path().join("report.md")).unwrap();
    assert!(md.contains("| run1 | randomize | 5 |") && md.contains("verified"), "{md}");

    fs::write(run.join("u0.bin"), b"tampered").unwrap();
    let o = snls(&["report"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let md = fs::read_to_string(tmp.path().join("report.md")).unwrap();
    assert!(md.contains("changed: u0.bin"), "{md}");
}

#[test]
fn dispersive_run_writes_table_and_figure() {
    let tmp = tempfile::tempdir().unwrap();
    let o = snls(&["verify-dispersive", "--d", "1", "--r", "inf", "--preset", "gaussian"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("decay.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    let svg = fs::read_to_string(tmp.path().join("decay.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let fit: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("fit.json")).unwrap()).unwrap();
    let hat = fit["fit"]["exponent_hat"].as_f64().unwrap();
    assert!((hat + 0.5).abs() < 0.05, "{hat}");
}
