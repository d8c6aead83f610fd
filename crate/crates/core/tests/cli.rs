use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"))
}

fn pluralism(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pluralism"))
        .args(args)
        .env("PLURALISM_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn run_report(name: &str, out: &Path) -> (i32, String) {
    let o = pluralism(&["run", preset(name).to_str().unwrap()], out);
    let text = std::fs::read_to_string(out.join(format!("{name}.json"))).expect("report written");
    (o.status.code().unwrap(), text)
}

/// Dotted key paths of every object in `v`; array elements share a `[]` segment.
fn key_paths(v: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                out.insert(p.clone());
                key_paths(child, &p, out);
            }
        }
        Value::Array(items) => {
            for item in items {
                key_paths(item, &format!("{prefix}[]"), out);
            }
        }
        _ => {}
    }
}

#[test]
fn figure2_preset_levels() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = run_report("figure2", dir.path());
    assert_eq!(code, 0);
    let r: Value = serde_json::from_str(&text).unwrap();
    let level = |id: &str| {
        r["policies"].as_array().unwrap().iter().find(|p| p["policy"] == id).unwrap()["level"].as_f64().unwrap()
    };
    approx::assert_abs_diff_eq!(level("one_school_a/resource_eq"), 1.0, epsilon = 1e-6);
    approx::assert_abs_diff_eq!(level("one_school_b/resource_eq"), 1.0, epsilon = 1e-6);
    approx::assert_abs_diff_eq!(level("two_school/resource_eq"), 1.25, epsilon = 1e-6);
}

#[test]
fn figure2_report_key_set_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let (_, text) = run_report("figure2", dir.path());
    let mut keys = BTreeSet::new();
    key_paths(&serde_json::from_str(&text).unwrap(), "", &mut keys);
    let golden = include_str!("golden/figure2_keys.txt");
    let expected: BTreeSet<String> = golden.lines().filter(|l| !l.is_empty()).map(String::from).collect();
    assert_eq!(keys, expected);
}

#[test]
fn reports_share_top_level_keys() {
    let dir = tempfile::tempdir().unwrap();
    let top = |text: &str| -> Vec<String> {
        serde_json::from_str::<Value>(text).unwrap().as_object().unwrap().keys().cloned().collect()
    };
    let (_, a) = run_report("figure2", dir.path());
    let (_, b) = run_report("figure3", dir.path());
    let o = pluralism(&["verify", "--trials", "20", "--seed", "4"], dir.path());
    assert!(o.status.code().is_some());
    let c = std::fs::read_to_string(dir.path().join("verify.json")).unwrap();
    assert_eq!(top(&a), top(&b));
    assert_eq!(top(&a), top(&c));
}

#[test]
fn reruns_are_identical_except_metadata() {
    let strip = |text: &str| {
        let mut v: Value = serde_json::from_str(text).unwrap();
        v.as_object_mut().unwrap().remove("metadata");
        serde_json::to_string(&v).unwrap()
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let (_, a) = run_report("figure3", d1.path());
    let (_, b) = run_report("figure3", d2.path());
    assert_eq!(strip(&a), strip(&b));
    let o1 = pluralism(&["verify", "--trials", "50", "--seed", "9"], d1.path());
    let o2 = pluralism(&["verify", "--trials", "50", "--seed", "9"], d2.path());
    assert_eq!(o1.status.code(), o2.status.code());
    let read = |d: &Path| std::fs::read_to_string(d.join("verify.json")).unwrap();
    assert_eq!(strip(&read(d1.path())), strip(&read(d2.path())));
}

#[test]
fn zero_budget_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "name = \"bad\"\n[policy]\nobjective = \"resource_eq\"\nbudget = 0.0\n").unwrap();
    let o = pluralism(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("policy.budget"), "{err}");
    assert!(!dir.path().join("bad.json").exists());
}

#[test]
fn unknown_key_is_reported_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    std::fs::write(&cfg, "[policy]\nobjective = \"resource_eq\"\nbudgit = 1.0\n").unwrap();
    let o = pluralism(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("budgit"));
}

#[test]
fn infeasible_budget_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.toml");
    std::fs::write(&cfg, "name = \"tight\"\n[population]\nsimplex = 11\n[policy]\nobjective = \"utility_eq\"\nbudget = 0.01\n")
        .unwrap();
    let o = pluralism(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("tight.json")).unwrap()).unwrap();
    assert_eq!(r["status"], "infeasible");
    assert_eq!(r["exit_code"], 2);
}

#[test]
fn population_file_preset() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = run_report("two_agents", dir.path());
    assert_eq!(code, 0);
    let r: Value = serde_json::from_str(&text).unwrap();
    let two = r["policies"].as_array().unwrap().iter().find(|p| p["structure"] == "two_school").unwrap();
    approx::assert_abs_diff_eq!(two["level"].as_f64().unwrap(), 0.75, epsilon = 1e-6);
    approx::assert_abs_diff_eq!(two["max_expenditure"].as_f64().unwrap(), 0.5, epsilon = 1e-6);
}

fn read_rows(path: &Path) -> Vec<(String, f64, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.deserialize().map(|row| row.unwrap()).collect()
}

#[test]
fn figure_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let o = pluralism(&["figures", preset("figure3").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let f1 = read_rows(&dir.path().join("figure3_figure1.csv"));
    assert!(f1.iter().any(|r| r.1 == 4.0 && r.2 == 0.0));
    assert!(f1.iter().any(|r| r.1 == 0.0 && r.2 == 4.0));
    for (_, la, lb) in &f1 {
        approx::assert_abs_diff_eq!(la / 4.0 + lb / 4.0, 1.0, epsilon = 1e-12);
    }

    let f2 = read_rows(&dir.path().join("figure3_figure2.csv"));
    let two: Vec<_> = f2.iter().filter(|r| r.0 == "two_school").collect();
    assert_eq!(two.len(), 1001);
    for r in two {
        approx::assert_abs_diff_eq!(r.1.max(r.2), 1.25, epsilon = 1e-6);
    }

    let f3 = read_rows(&dir.path().join("figure3_figure3.csv"));
    let through: Vec<_> = f3.iter().filter(|r| r.0 == "level_through").collect();
    assert!(through.len() > 50);
    for r in through {
        let v = (r.1 * r.1 + r.1 * r.2 + r.2 * r.2) / (2.0 * (r.1 + r.2));
        approx::assert_abs_diff_eq!(v, 0.75, epsilon = 1e-8);
    }
    for s in ["level_one_school_a", "target_one_school_a", "level_two_school", "target_two_school"] {
        assert!(f3.iter().any(|r| r.0 == s), "missing series {s}");
    }
}
