use std::path::Path;
use std::process::Command;

use lvmarket_cli::{cli_main, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

fn run(args: &[&str]) -> i32 {
    let argv = std::iter::once("lvmarket").chain(args.iter().copied());
    cli_main(argv)
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn zero_days_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--days", "0", "--out", &out_arg(dir.path())]), EXIT_USAGE);
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn bad_flags_and_files_are_usage_errors() {
    assert_eq!(run(&["--variant", "sideways"]), EXIT_USAGE);
    assert_eq!(run(&["--battery=-3"]), EXIT_USAGE);
    assert_eq!(run(&["--config", "/nonexistent/scenario.toml"]), EXIT_USAGE);
    assert_eq!(run(&["--network", "/nonexistent/network.toml"]), EXIT_USAGE);
    assert_eq!(run(&["--help"]), EXIT_OK);
}

#[test]
fn unwritable_output_is_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    std::fs::write(&file, "x").unwrap();
    assert_eq!(run(&["--days", "1", "--variant", "baseline", "--out", &out_arg(&file)]), EXIT_FAILURE);
}

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let exe = env!("CARGO_BIN_EXE_lvmarket");
    let network = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/network.toml");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = Command::new(exe)
            .args(["--days", "1", "--battery", "6", "--seed", "42", "--network", network])
            .arg("--out")
            .arg(d.path())
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["transformer.csv", "houses.csv", "market.csv", "bills.csv", "summary.json", "ledger.jsonl"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert!(!a.is_empty(), "{name} is empty");
        assert_eq!(a, b, "{name} differs");
    }
    let header = std::fs::read_to_string(dirs[0].path().join("transformer.csv")).unwrap();
    assert!(header.starts_with("variant,day,slot,"));
}

#[test]
fn scenario_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    std::fs::write(&cfg, "days = 3\nseed = 5\n").unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--days",
        "1",
        "--variant",
        "market",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["days_simulated"], 1);
    assert_eq!(summary["seed"], 5);
    assert!(summary["baseline_totals"].is_null());
}
