use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mi-racah"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn mi-racah")
}

const DESK: &[&str] = &["--family", "racah", "--N", "3", "--b", "12", "--c", "1/2", "--d", "1"];

fn with_desk(extra: &[&str]) -> Vec<String> {
    DESK.iter().chain(extra).map(|s| s.to_string()).collect()
}

#[test]
fn verify_passes_on_desk_config() {
    let args = [&["verify"][..], DESK, &["--checks", "original-eigen,orthogonality,zeros", "--D", "1"]].concat();
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["schema"], "mi-racah/1");
    assert_eq!(report["summary"]["fail"], 0);
}

#[test]
fn range_failure_exits_one() {
    let out = run(&["verify", "--family", "racah", "--N", "3", "--b", "5", "--c", "1/2", "--d", "1", "--checks", "range,zeros"]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let recs = report["records"].as_array().unwrap();
    assert!(recs.iter().any(|r| r["name"] == "range" && r["status"] == "fail"));
    assert!(recs.iter().filter(|r| r["name"] == "zeros").all(|r| r["status"] == "skip"));
}

#[test]
fn zeros_selection_counts_records() {
    let mut args = vec!["verify".to_string()];
    args.extend(with_desk(&["--checks", "zeros", "--D", "1,2", "--format", "csv"]));
    let out = bin().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "name,case,status,exact_residuals,float_residuals,runtime_ms,detail");
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 3);
    for (n, r) in rows.iter().enumerate() {
        assert_eq!(*r, format!("zeros,\"D={{1,2}} n={}\",pass,0,,,zeros: {}", n + 1, n + 1));
    }
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn table_csv_is_reproducible() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let mut args = vec!["table".to_string()];
        args.extend(with_desk(&["--D", "1", "--format", "csv", "--out"]));
        args.push(d.path().to_string_lossy().into_owned());
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (a, b) = (read_all(dirs[0].path()), read_all(dirs[1].path()));
    let names: Vec<_> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["coefficients.csv", "grids.csv", "spectrum.csv"]);
    assert_eq!(a, b);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"family":"qracah","N":3,"q":"1/2","b":"1/1024","c":"1/2","d":"1/2","checks":"original-eigen"}"#).unwrap();
    let report = dir.path().join("report.json");
    let out = run(&["verify", "--config", cfg.to_str().unwrap(), "--checks", "zeros", "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let recs = v["records"].as_array().unwrap();
    assert!(!recs.is_empty());
    assert!(recs.iter().all(|r| r["name"] == "zeros"));
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"family":"racah","N":3,"b":12,"c":"1/2","d":1,"bogus":true}"#).unwrap();
    assert_eq!(run(&["verify", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--family", "racah", "--N", "3", "--b", "12", "--c", "0.5", "--d", "1"]).status.code(), Some(2));
}
