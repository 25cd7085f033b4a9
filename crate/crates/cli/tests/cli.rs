use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bdlp(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdlp"))
        .args(args)
        .arg("--quiet")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn check_reports_coupling_window() {
    let dir = tempfile::tempdir().unwrap();
    let o = bdlp(&["check"], &configs().join("mixed_regime_check.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("admissibility.json"));
    assert_eq!(r["coupling_ok"], true);
    let w = r["coupling_window"].as_array().unwrap();
    assert!(w[0].as_f64().unwrap().abs() < 2e-3);
    assert!((w[1].as_f64().unwrap() - 1.5f64.ln()).abs() < 1e-9);
}

#[test]
fn oracle_pure_death_survival() {
    let dir = tempfile::tempdir().unwrap();
    let o = bdlp(&["oracle"], &configs().join("pure_death_oracle.json"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(dir.path().join("oracle.csv")).unwrap();
    let h = rdr.headers().unwrap().clone();
    let col = h.iter().position(|c| c == "survival").unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let t: f64 = rec[0].parse().unwrap();
        let s: f64 = rec[col].parse().unwrap();
        assert!((s - (-t).exp()).abs() < 1e-8, "t={t}");
    }
    let m = json(&dir.path().join("manifest.json"));
    let names: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["oracle.csv", "law.csv"]);
}

#[test]
fn average_scan_is_monotone_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("ring3_average_scan.json");
    assert_eq!(bdlp(&["average-scan"], &cfg, &dir.path().join("a")).status.code(), Some(0));
    assert_eq!(bdlp(&["average-scan"], &cfg, &dir.path().join("b")).status.code(), Some(0));
    let a = std::fs::read(dir.path().join("a/averaging.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b/averaging.csv")).unwrap());
    let ma = json(&dir.path().join("a/manifest.json"));
    let mb = json(&dir.path().join("b/manifest.json"));
    assert_eq!(ma["files"], mb["files"]);
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    let mut rdr = csv::Reader::from_reader(&a[..]);
    let total: Vec<f64> = rdr
        .records()
        .map(|r| r.unwrap())
        .filter(|r| &r[1] == "total_plus")
        .map(|r| r[2].parse().unwrap())
        .collect();
    assert_eq!(total.len(), 4);
    assert!(total.windows(2).all(|w| w[1] < w[0]), "{total:?}");
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(configs().join("mixed_regime_check.json")).unwrap();
    std::fs::write(&bad, text.replace("\"seed\": 1", "\"seed\": 1, \"typo\": 3")).unwrap();
    assert_eq!(bdlp(&["check"], &bad, dir.path()).status.code(), Some(2));
    std::fs::write(&bad, text.replace("\"m\": 0.75", "\"m\": -0.75")).unwrap();
    assert_eq!(bdlp(&["check"], &bad, dir.path()).status.code(), Some(2));
    let o = bdlp(&["simulate"], &configs().join("mixed_regime_check.json"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn io_failures_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = bdlp(&["check"], &dir.path().join("missing.json"), dir.path());
    assert_eq!(o.status.code(), Some(4));
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = bdlp(&["check"], &configs().join("mixed_regime_check.json"), &blocker.join("sub"));
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn report_passes_then_fails_with_tight_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("mixed_regime_report.json");
    let o = bdlp(&["report"], &cfg, &dir.path().join("ok"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let tight = dir.path().join("tight.json");
    let text = std::fs::read_to_string(&cfg).unwrap();
    std::fs::write(&tight, text.replace("\"norm_k0\": 1.0", "\"norm_k0\": 0.2")).unwrap();
    let o = bdlp(&["report"], &tight, &dir.path().join("bad"));
    assert_eq!(o.status.code(), Some(3));
    let m = json(&dir.path().join("bad/manifest.json"));
    assert_eq!(m["failures"].as_array().unwrap().len(), 1);
}

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("mixed_regime_report.json");
    let a = bdlp(&["report", "--seed", "1"], &cfg, &dir.path().join("a"));
    let b = bdlp(&["report", "--seed", "2"], &cfg, &dir.path().join("b"));
    assert!(a.status.success() && b.status.success());
    assert_ne!(
        std::fs::read(dir.path().join("a/extinction.csv")).unwrap(),
        std::fs::read(dir.path().join("b/extinction.csv")).unwrap()
    );
    assert_eq!(json(&dir.path().join("b/manifest.json"))["seed"], 2);
}
