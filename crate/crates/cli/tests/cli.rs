use std::path::Path;
use std::process::{Command, Output};

fn toyaudit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toyaudit"))
        .args(args)
        .env("TOYAUDIT_LOG", "quiet")
        .output()
        .expect("spawn toyaudit")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn emulate(scenario: &str, dir: &Path, extra: &[&str]) {
    let mut args = vec!["emulate", "--scenario", scenario, "--out", s(dir)];
    args.extend_from_slice(extra);
    let o = toyaudit(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn estimate_prints_seconds() {
    let o = toyaudit(&["estimate", "--probes", "46656", "--rtt", "200", "--workers", "1"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("9331.2 s"), "{}", stdout(&o));

    let o = toyaudit(&[
        "estimate",
        "--probes",
        "46656",
        "--rtt",
        "200",
        "--workers",
        "1",
        "--fraction",
        "0.5",
    ]);
    assert!(stdout(&o).starts_with("4665.6 s"), "{}", stdout(&o));
}

#[test]
fn analyze_hardened_capture_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    emulate("hydration", dir.path(), &["--hardened"]);
    let out = dir.path().join("report.json");
    let o = toyaudit(&[
        "analyze",
        "--capture",
        s(&dir.path().join("hydration.pcap")),
        "--profile",
        s(&dir.path().join("hydration.profile.json")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["findings"].as_array().unwrap().len(), 0);
    assert_eq!(r["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn analyze_hydration_reports_findings() {
    let dir = tempfile::tempdir().unwrap();
    emulate("hydration", dir.path(), &[]);
    let out = dir.path().join("report.json");
    let o = toyaudit(&[
        "analyze",
        "--capture",
        s(&dir.path().join("hydration.jsonl")),
        "--profile",
        s(&dir.path().join("hydration.profile.json")),
        "--out",
        s(&out),
        "--generated-at",
        "2017-11-06T20:26:40Z",
    ]);
    assert_eq!(code(&o), 1);
    let r = report(&out);
    assert!(!r["findings"].as_array().unwrap().is_empty());
    assert_eq!(r["generated_at"], "2017-11-06T20:26:40Z");
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(
        names.iter().all(|n| !n.starts_with('.')),
        "leftover temp file in {names:?}"
    );

    let md = dir.path().join("report.md");
    let o = toyaudit(&[
        "analyze",
        "--capture",
        s(&dir.path().join("hydration.pcap")),
        "--profile",
        s(&dir.path().join("hydration.profile.json")),
        "--out",
        s(&md),
        "--format",
        "markdown",
    ]);
    assert_eq!(code(&o), 1);
    let text = std::fs::read_to_string(&md).unwrap();
    assert!(text.contains("COPPA-312.8"));
}

#[test]
fn usage_errors_exit_two() {
    let cases: &[&[&str]] = &[
        &[],
        &["estimate", "--probes", "10", "--rtt", "200", "--bogus"],
        &["estimate", "--probes", "ten", "--rtt", "200"],
        &["mine", "--workers", "2"],
        &["mine", "--target", "http://192.0.2.10:8080", "--delay", "0"],
        &["overlap", "--captures", "a.jsonl,b.jsonl", "--profiles", "a.json"],
        &["emulate", "--scenario", "robot", "--out", "x"],
        &[
            "analyze",
            "--capture",
            "c",
            "--profile",
            "p",
            "--out",
            "o",
            "--format",
            "pdf",
        ],
    ];
    for args in cases {
        let o = toyaudit(args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"), "{args:?}");
    }
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&toyaudit(&["--help"])), 0);
    assert_eq!(code(&toyaudit(&["mine", "--help"])), 0);
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = toyaudit(&[
        "analyze",
        "--capture",
        s(&dir.path().join("absent.pcap")),
        "--profile",
        s(&dir.path().join("absent.json")),
        "--out",
        s(&dir.path().join("r.json")),
    ]);
    assert_eq!(code(&o), 3);
    assert!(!dir.path().join("r.json").exists());
}

#[test]
fn dry_run_plan() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plan.json");
    let o = toyaudit(&["mine", "--dry-run", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("prefix probes: 46656"));
    assert_eq!(report(&out)["prefix_probes"], 46656);
}

#[test]
fn scan_and_overlap() {
    let dir = tempfile::tempdir().unwrap();
    for sc in ["hydration", "smartpet", "fitness"] {
        emulate(sc, dir.path(), &[]);
    }
    let src = dir.path().join("smartpet_src");
    assert!(src.is_dir());
    let findings = dir.path().join("secrets.json");
    let o = toyaudit(&["scan", "--source", s(&src), "--out", s(&findings)]);
    assert_eq!(code(&o), 1);
    let v = report(&findings);
    assert_eq!(v.as_array().unwrap().len(), 2);

    // scan findings flow into analyze
    let out = dir.path().join("smartpet.report.json");
    let o = toyaudit(&[
        "analyze",
        "--capture",
        s(&dir.path().join("smartpet.jsonl")),
        "--profile",
        s(&dir.path().join("smartpet.profile.json")),
        "--out",
        s(&out),
        "--findings",
        s(&findings),
    ]);
    assert_eq!(code(&o), 1);
    let ids: Vec<String> = report(&out)["findings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["detector_id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(ids.iter().filter(|i| *i == "D_SECRET_CONSTANT").count(), 2);

    let caps: Vec<String> = ["hydration", "smartpet", "fitness"]
        .iter()
        .map(|n| s(&dir.path().join(format!("{n}.pcap"))).to_string())
        .collect();
    let profs: Vec<String> = ["hydration", "smartpet", "fitness"]
        .iter()
        .map(|n| s(&dir.path().join(format!("{n}.profile.json"))).to_string())
        .collect();
    let out = dir.path().join("overlap.json");
    let o = toyaudit(&[
        "overlap",
        "--captures",
        &caps.join(","),
        "--profiles",
        &profs.join(","),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let services = report(&out)["services"].as_array().unwrap().clone();
    assert!(services.iter().any(|sv| sv["device_count"] == 3));
}
