use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use alphamod_cli::report::read_coeff_csv;
use alphamod_cli::EXPERIMENTS;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alphamod"))
        .args(args)
        .output()
        .unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

#[test]
fn list_prints_every_id() {
    let out = bin(&["--list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().collect::<Vec<_>>(), EXPERIMENTS.to_vec());
}

#[test]
fn shipped_configs_validate_clean() {
    for id in EXPERIMENTS {
        let p = configs().join(format!("{id}.toml"));
        let out = bin(&["--config", p.to_str().unwrap(), "--validate"]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{id}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
    }
}

#[test]
fn shipped_configs_pass() {
    let dir = tempfile::tempdir().unwrap();
    for id in EXPERIMENTS {
        let p = configs().join(format!("{id}.toml"));
        let o = dir.path().join(id);
        let out = bin(&[
            "--config",
            p.to_str().unwrap(),
            "--out",
            o.to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{id}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(o.join("report.json")).unwrap()).unwrap();
        assert_eq!(report["experiment"], *id);
        assert_eq!(report["pass"], true);
        for t in report["tables"].as_array().unwrap() {
            assert!(o.join(t.as_str().unwrap()).is_file(), "{id}: {t}");
        }
    }
}

#[test]
fn coefficient_table_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let p = configs().join("frame-tightness.toml");
    let o = dir.path().join("ft");
    assert!(bin(&[
        "--config",
        p.to_str().unwrap(),
        "--out",
        o.to_str().unwrap()
    ])
    .status
    .success());
    let c =
        read_coeff_csv(fs::File::open(o.join("tables/coefficients_signal0.csv")).unwrap()).unwrap();
    assert!(!c.entries.is_empty());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        "experiment = \"bapu-check\"\n[covering]\nalpah = 0.5\n",
    )
    .unwrap();
    let out = bin(&["--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("alpah"), "{err}");

    fs::write(&bad, "experiment = \"nope\"\n").unwrap();
    assert_eq!(
        bin(&["--config", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(
        bin(&[
            "--config",
            dir.path().join("missing.toml").to_str().unwrap()
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn validate_reports_guard_band() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.toml");
    fs::write(
        &p,
        "experiment = \"frame-tightness\"\n[covering]\nkmax = 12\n[grid]\npoints = 256\n",
    )
    .unwrap();
    let out = bin(&["--config", p.to_str().unwrap(), "--validate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("band exceeds guard band"));
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.toml");
    // Lebesgue measure has beta = 1, not 3.
    fs::write(&p, "experiment = \"doubling\"\n[run]\nexpect_beta = 3.0\n").unwrap();
    let o = dir.path().join("o");
    let out = bin(&[
        "--config",
        p.to_str().unwrap(),
        "--out",
        o.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("FAIL beta_error"));
    assert!(o.join("report.json").is_file());
}

#[test]
fn seed_override_changes_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = configs().join("bapu-check.toml");
    let o = dir.path().join("s");
    assert!(bin(&[
        "--config",
        p.to_str().unwrap(),
        "--out",
        o.to_str().unwrap(),
        "--seed",
        "99"
    ])
    .status
    .success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(o.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 99);
}
