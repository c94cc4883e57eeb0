use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn relsec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relsec")).args(args).output().unwrap()
}

fn fixture(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(rel)
        .display()
        .to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn bounds_writes_record_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bounds.json");
    let o = relsec(&["bounds", "--config", &fixture("configs/regression.json"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let record: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let lower = record["lower"].as_f64().unwrap();
    let upper = record["upper"].as_f64().unwrap();
    assert!(lower <= upper + 1e-6);
    assert!(upper >= 0.7811);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bounds.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "bounds");
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn deaf_relay_config_reports_capacity() {
    let o = relsec(&["bounds", "--config", &fixture("configs/deaf_relay.json")]);
    assert!(o.status.success());
    let record: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let deaf = &record["deaf_relay"];
    assert!(deaf["capacity"].as_f64().unwrap() >= deaf["all_nf_lower"].as_f64().unwrap() - 1e-9);
}

#[test]
fn sweep_csv_has_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"budgets": {"p1": 4, "p2": 4}, "fading": {"states": 4}, "sweep": {"d": [0.3, 0.6]}, "seed": 5}"#,
    );
    let o = relsec(&["sweep-relay", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "d,lower,upper,n_df,n_nf");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.3000000000,"));
}

#[test]
fn subchannel_map_lists_every_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "map.json", r#"{"budgets": {"p1": 8, "p2": 8}, "fading": {"states": 6}, "seed": 9}"#);
    let o = relsec(&["subchannel-map", "--config", cfg.to_str().unwrap(), "--mode-rule", "best"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "subchannel,mode,p1,p2,rate,g_rd,g_re");
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_field = write(dir.path(), "a.json", r#"{"budgets": {"p1": 1, "p2": 1}, "colour": 3}"#);
    let negative = write(dir.path(), "b.json", r#"{"budgets": {"p1": -1, "p2": 1}, "fading": {}}"#);
    let broken = write(dir.path(), "c.json", "{ not json");
    for cfg in [&bad_field, &negative, &broken] {
        let o = relsec(&["bounds", "--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{}", cfg.display());
        assert!(!o.stderr.is_empty());
    }
    let o = relsec(&["bounds", "--config", &fixture("configs/regression.json"), "--mode-rule", "sometimes"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_through_destination_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"budgets": {"p1": 4, "p2": 4}, "fading": {"states": 2}, "sweep": {"d": [1.0]}}"#,
    );
    let o = relsec(&["sweep-relay", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dm_check_on_fixtures() {
    let o = relsec(&["dm-check", "--fixture", &fixture("dm/degraded_noiseless.txt")]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")));
    assert!(text.contains("capacity sandwich"));

    let o = relsec(&["dm-check", "--fixture", &fixture("dm/malformed.txt")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let o = relsec(&["dm-check", "--random", "10", "--seed", "4"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 2);
}
