use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ksgns_core::harness::{inject_fault, load, Report, SuiteFile};
use ksgns_core::random::rng_from_seed;

fn verify(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_verify"));
    cmd.args(args).env_remove("VERIFY_SEED");
    if let Some(s) = seed_env {
        cmd.env("VERIFY_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("verify-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn gns_demo_reports_a_nontrivial_unitary() {
    let out = verify(&["demo", "gns"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("dilation space dimension: 4"), "{text}");
    assert!(text.contains("nontrivial"));
    assert!(text.trim_end().ends_with("PASS"));
}

#[test]
fn generated_sets_are_reproducible_and_pass() {
    let (a, b) = (scratch("gen-a"), scratch("gen-b"));
    let args = |d: &Path| {
        vec![
            "gen".to_string(),
            "--seed".into(),
            "11".into(),
            "--out".into(),
            d.display().to_string(),
            "--suites".into(),
            "ksgns,lift,dilation".into(),
            "--caps".into(),
            "instances=2".into(),
        ]
    };
    for d in [&a, &b] {
        let owned = args(d);
        let out = verify(&owned.iter().map(String::as_str).collect::<Vec<_>>(), None);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(read_all(&a), read_all(&b));
    assert_eq!(read_all(&a).len(), 4);

    let out = verify(&["run", "--in", a.to_str().unwrap(), "--format", "json", "--jobs", "2"], None);
    assert_eq!(out.status.code(), Some(0));
    let report: Report = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report.passes() && report.is_consistent());
    assert_eq!(report.summary.total, report.records.len());
    assert!(report.summary.max_residual <= 1e-8);

    let only = verify(&["run", "--in", a.to_str().unwrap(), "--suites", "lift", "--format", "json"], None);
    let report: Report = serde_json::from_str(&stdout(&only)).unwrap();
    assert!(!report.records.is_empty());
    assert!(report.records.iter().all(|r| r.suite.name() == "lift"));
    let _ = fs::remove_dir_all(&a);
    let _ = fs::remove_dir_all(&b);
}

#[test]
fn environment_seed_overrides_flag() {
    let (a, b) = (scratch("env-a"), scratch("env-b"));
    let base = ["--suites", "ksgns", "--caps", "instances=1"];
    let mut first = vec!["gen", "--seed", "1", "--out", a.to_str().unwrap()];
    first.extend(base);
    let mut second = vec!["gen", "--seed", "5", "--out", b.to_str().unwrap()];
    second.extend(base);
    assert_eq!(verify(&first, Some("5")).status.code(), Some(0));
    assert_eq!(verify(&second, None).status.code(), Some(0));
    assert_eq!(read_all(&a), read_all(&b));
    let _ = fs::remove_dir_all(&a);
    let _ = fs::remove_dir_all(&b);
}

#[test]
fn corrupted_instance_file_fails_with_theorem_name() {
    let dir = scratch("fault");
    let out = verify(&["gen", "--seed", "3", "--out", dir.to_str().unwrap(), "--suites", "ksgns", "--caps", "instances=2"], None);
    assert_eq!(out.status.code(), Some(0));
    let (config, instances) = load(&dir).unwrap();
    let mut rng = rng_from_seed(1);
    let bad = inject_fault(&instances[0], &mut rng, &config.tolerance).unwrap();
    let file = SuiteFile { suite: config.suites[0], instances: vec![bad, instances[1].clone()] };
    fs::write(dir.join("ksgns.json"), serde_json::to_string(&file).unwrap()).unwrap();

    let out = verify(&["run", "--in", dir.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    let fail = text.lines().find(|l| l.starts_with("FAIL")).expect("a FAIL line");
    assert!(fail.contains("completely positive map"), "{fail}");
    assert!(text.lines().any(|l| l.starts_with("PASS")), "healthy instance still checked");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn empty_suite_list_passes() {
    let out = verify(&["run", "--seed", "0", "--suites=", "--format", "json"], None);
    assert_eq!(out.status.code(), Some(0));
    let report: Report = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report.records.is_empty());
}

#[test]
fn usage_and_io_errors_exit_with_two() {
    assert_eq!(verify(&["run"], None).status.code(), Some(2));
    assert_eq!(verify(&["run", "--seed", "0", "--suites", "bogus"], None).status.code(), Some(2));
    assert_eq!(verify(&["run", "--seed", "0", "--tol", "-1"], None).status.code(), Some(2));
    assert_eq!(verify(&["run", "--in", "/nonexistent/verify-dir"], None).status.code(), Some(2));
    assert_eq!(verify(&["run", "--seed", "0"], Some("abc")).status.code(), Some(2));
    assert_eq!(verify(&["frobnicate"], None).status.code(), Some(2));
}
