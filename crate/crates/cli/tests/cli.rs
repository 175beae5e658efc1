use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_netmimo"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Every file of `dir`, sorted by name, with its bytes.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

const TWO_CELL: &str = r#"{
  "scenario": "test",
  "problem": {
    "kind": "explicit",
    "gamma": 4.0,
    "beta2": [
      [1.5, 1.3, 1.0, 1.0, 0.2, 0.3, 0.3, 0.5],
      [0.2, 0.3, 0.3, 0.5, 1.5, 1.3, 1.0, 1.0]
    ],
    "power_db": 15.0
  },
  "analysis": { "mu": MU }
}"#;

const MU: &str = "[0.5, 0.5, 0.75, 1.0, 0.5, 0.5, 0.75, 1.0]";

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = bundled("two_cell_asymptotic.json");
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for sub in ["asymptotic", "montecarlo"] {
        assert!(run(sub, &cfg, &a, &["--seed", "5"]).status.success());
        assert!(run(sub, &cfg, &b, &["--seed", "5"]).status.success());
        assert!(run(sub, &cfg, &c, &["--seed", "5", "--threads", "1"]).status.success());
    }
    let snap = snapshot(&a);
    assert_eq!(snap.len(), 10);
    assert_eq!(snap, snapshot(&b));
    assert_eq!(snap, snapshot(&c));
}

#[test]
fn seed_changes_montecarlo_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = bundled("two_cell_asymptotic.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run("montecarlo", &cfg, &a, &["--seed", "1"]).status.success());
    assert!(run("montecarlo", &cfg, &b, &["--seed", "2"]).status.success());
    let f = "montecarlo_theta.csv";
    assert_ne!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
}

#[test]
fn theta_matches_published_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert!(run("asymptotic", &bundled("two_cell_asymptotic.json"), &out, &[]).status.success());
    let published = [
        [0.325, 0.311, 0.454, 0.565, 0.175, 0.189, 0.296, 0.435],
        [0.175, 0.189, 0.296, 0.435, 0.325, 0.311, 0.454, 0.565],
    ];
    let rows = read_csv(&out.join("asymptotic_groups.csv"));
    assert_eq!(rows[0][6..], ["theta_bs0", "theta_bs1"]);
    for (k, row) in rows[1..].iter().enumerate() {
        for m in 0..2 {
            let theta: f64 = row[6 + m].parse().unwrap();
            assert!((theta - published[m][k]).abs() <= 5e-4, "theta[{m}][{k}] = {theta}");
        }
    }
}

#[test]
fn csv_format_and_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert!(run("asymptotic", &bundled("two_cell_asymptotic.json"), &out, &["--seed", "9"]).status.success());
    let text = fs::read_to_string(out.join("asymptotic_bs.csv")).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    assert!(text.starts_with("bs,eta,power,power_used\n"));
    // 15 dB = 31.6227766016837..., twelve significant digits
    assert!(text.contains(",31.6227766017,"), "{text}");

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("asymptotic_bs.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 9);
    assert_eq!(meta["rows"], 2);
    assert_eq!(meta["code_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn hash_ignores_formatting_but_not_values() {
    let tmp = tempfile::tempdir().unwrap();
    let hash = |text: &str, name: &str| {
        let dir = tmp.path().join(name);
        fs::create_dir_all(&dir).unwrap();
        let cfg = write_config(&dir, text);
        assert!(run("asymptotic", &cfg, &dir.join("out"), &[]).status.success());
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("out/asymptotic_bs.meta.json")).unwrap()).unwrap();
        meta["config_sha256"].as_str().unwrap().to_string()
    };
    let base = TWO_CELL.replace("MU", MU);
    let compact: String = base.split_whitespace().collect::<Vec<_>>().join(" ");
    let other = TWO_CELL.replace("MU", "[0.5, 0.5, 0.75, 1.0, 0.5, 0.5, 0.75, 0.5]");
    // spelling out a default is not a change
    let explicit = base.replace("\"scenario\"", "\"constraint\": \"per_bs\", \"scenario\"");
    assert_eq!(hash(&base, "a"), hash(&compact, "b"));
    assert_eq!(hash(&base, "a"), hash(&explicit, "d"));
    assert_ne!(hash(&base, "a"), hash(&other, "c"));
}

#[test]
fn empty_sweep_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
      "scenario": "empty",
      "problem": { "kind": "layout", "gamma": 4.0, "num_cells": 4, "groups_per_cell": 2, "power_db": 154.0 },
      "analysis": { "optimizer": { "delta_mu": 0.1 } },
      "sweep": { "parameter": "gamma", "values": [], "series": [{ "parameter": "power_db", "values": [100.0] }] }
    }"#;
    let cfg = write_config(tmp.path(), text);
    let out = tmp.path().join("out");
    let res = run("sweep", &cfg, &out, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(
        fs::read_to_string(out.join("sweep.csv")).unwrap(),
        "power_db,gamma,overhead,cluster_sum_rate_bits,cell_sum_rate_bits\n"
    );
}

#[test]
fn sweep_rows_follow_series_order() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
      "scenario": "grid",
      "problem": { "kind": "layout", "gamma": 4.0, "num_cells": 4, "groups_per_cell": 2, "power_db": 154.0 },
      "analysis": { "optimizer": { "delta_mu": 0.1 } },
      "sweep": { "parameter": "gamma", "values": [2.0, 4.0], "series": [{ "parameter": "cluster_size", "values": [1, 2] }] }
    }"#;
    let cfg = write_config(tmp.path(), text);
    let out = tmp.path().join("out");
    assert!(run("sweep", &cfg, &out, &[]).status.success());
    let rows = read_csv(&out.join("sweep.csv"));
    let keys: Vec<(&str, &str)> = rows[1..].iter().map(|r| (r[0].as_str(), r[1].as_str())).collect();
    assert_eq!(keys, [("1", "2"), ("1", "4"), ("2", "2"), ("2", "4")]);
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cases = [
        ("not json", "asymptotic"),
        (&*TWO_CELL.replace("MU", MU).replace("\"scenario\"", "\"bogus\": 1, \"scenario\""), "asymptotic"),
        // load above gamma B
        (&*TWO_CELL.replace("MU", "[1, 1, 1, 1, 1, 1, 1, 1.5]"), "asymptotic"),
        (&*TWO_CELL.replace("MU", MU), "optimize"),
        (&*TWO_CELL.replace("MU", MU), "sweep"),
    ];
    for (i, (text, sub)) in cases.iter().enumerate() {
        let dir = tmp.path().join(i.to_string());
        fs::create_dir_all(&dir).unwrap();
        let cfg = write_config(&dir, text);
        let res = run(sub, &cfg, &out, &[]);
        assert_eq!(res.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&res.stderr));
    }
    let res = run("asymptotic", &tmp.path().join("missing.json"), &out, &[]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn unknown_field_error_names_its_path() {
    let tmp = tempfile::tempdir().unwrap();
    let text = TWO_CELL.replace("MU", MU).replace("\"power_db\"", "\"powr_db\": 1, \"power_db\"");
    let cfg = write_config(tmp.path(), &text);
    let res = run("asymptotic", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("problem") && err.contains("powr_db"), "{err}");
}

#[test]
fn validate_subset_passes_and_writes_table() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
      "scenario": "subset",
      "problem": { "kind": "explicit", "gamma": 1.0, "beta2": [[1.0]], "power_db": 0.0 },
      "validate": { "checks": [3, 7] }
    }"#;
    let cfg = write_config(tmp.path(), text);
    let out = tmp.path().join("out");
    let res = run("validate", &cfg, &out, &[]);
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 2, "{stdout}");
    let rows = read_csv(&out.join("validate.csv"));
    assert_eq!(rows[0], ["id", "name", "passed"]);
    assert_eq!(rows[1][2], "true");
    assert_eq!(rows[2][2], "true");
}

#[test]
fn optimize_reports_greedy_optimum() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert!(run("optimize", &bundled("two_cell_optimize.json"), &out, &[]).status.success());
    let rows = read_csv(&out.join("optimize_summary.csv"));
    assert_eq!(rows[1][0], "mu_total");
    let total: f64 = rows[1][1].parse().unwrap();
    assert!((total - 2.76).abs() <= 0.01 + 1e-9, "{total}");
}
