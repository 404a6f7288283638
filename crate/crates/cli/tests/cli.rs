use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

struct Run {
    _tmp: tempfile::TempDir,
    corpus: PathBuf,
    out: PathBuf,
}

impl Run {
    fn new(novels: usize, treated: usize) -> Run {
        let tmp = tempfile::tempdir().unwrap();
        let corpus = tmp.path().join("corpus");
        let out = tmp.path().join("out");
        let o = qattr(&["synth", corpus.to_str().unwrap(), "--novels", &novels.to_string(), "--treated", &treated.to_string()]);
        assert!(o.status.success(), "{}", stderr(&o));
        Run { _tmp: tmp, corpus, out }
    }

    fn run(&self, backend: &str, args: &[&str]) -> Output {
        let mut all = vec!["--corpus", self.corpus.to_str().unwrap(), "--out", self.out.to_str().unwrap(), "--backend", backend];
        all.extend_from_slice(args);
        qattr(&all)
    }

    fn ok(&self, backend: &str, args: &[&str]) {
        let o = self.run(backend, args);
        assert!(o.status.success(), "qattr {args:?} failed: {}", stderr(&o));
    }
}

fn qattr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qattr")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn ingest_writes_manifest() {
    let r = Run::new(2, 0);
    r.ok("mock:oracle", &["ingest"]);
    let m = read_json(&r.out.join("manifest.json"));
    let novels = m["novels"].as_array().unwrap();
    assert_eq!(novels.len(), 2);
    assert_eq!(novels[0]["id"], "novel_00");
    let total: u64 = novels.iter().map(|n| n["quotes"].as_u64().unwrap()).sum();
    assert_eq!(m["total_quotes"].as_u64().unwrap(), total);
}

#[test]
fn broken_byte_span_exits_2() {
    let r = Run::new(2, 0);
    let path = r.corpus.join("novel_01").join("quotation_info.csv");
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let headers = reader.headers().unwrap().clone();
    let mut rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let target = rows.iter().position(|row| row[3].matches('[').count() == 2).expect("a single-span quote");
    let broken: Vec<String> =
        rows[target].iter().enumerate().map(|(i, f)| if i == 3 { "[[5, 999999999]]".into() } else { f.to_string() }).collect();
    rows[target] = csv::StringRecord::from(broken);
    let mut w = csv::Writer::from_path(&path).unwrap();
    w.write_record(&headers).unwrap();
    for row in &rows {
        w.write_record(row).unwrap();
    }
    w.flush().unwrap();

    let o = r.run("mock:oracle", &["ingest"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("novel_01") && err.contains("outside the text"), "{err}");
    assert!(!r.out.join("manifest.json").exists());
}

#[test]
fn attribute_writes_predictions_and_evaluate_scores_them() {
    let r = Run::new(2, 0);
    r.ok("mock:oracle", &["ingest"]);
    r.ok("mock:oracle", &["attribute", "--strategy", "incremental"]);
    for id in ["novel_00", "novel_01"] {
        let dir = r.out.join("novels").join(id).join("incremental");
        let csv = std::fs::read_to_string(dir.join("predictions.csv")).unwrap();
        assert!(csv.lines().next().unwrap().contains("quote_id"), "{csv}");
        assert!(dir.join("predictions.json").exists());
    }
    r.ok("mock:oracle", &["evaluate", "--strategy", "incremental"]);
    let summary = read_json(&r.out.join("summary_incremental.json"));
    assert_eq!(summary["overall"]["accuracy_all"]["mean"].as_f64(), Some(1.0));
}

#[test]
fn missing_prerequisites_exit_4() {
    let r = Run::new(1, 0);
    let o = r.run("mock:oracle", &["attribute"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("qattr ingest"), "{}", stderr(&o));

    r.ok("mock:oracle", &["ingest"]);
    let o = r.run("mock:oracle", &["evaluate", "--strategy", "first"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let o = r.run("mock:oracle", &["report"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn bad_config_exits_4() {
    let r = Run::new(1, 0);
    let cfg = r._tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[chunking]\nwindow = 100\noverlap = 100\n").unwrap();
    let o = r.run("mock:oracle", &["--config", cfg.to_str().unwrap(), "ingest"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    let o = r.run("mock:oracle", &["--config", cfg.to_str().unwrap(), "ingest"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn mink_without_scoring_exits_3() {
    let r = Run::new(1, 0);
    r.ok("mock:oracle", &["ingest"]);
    let o = r.run("mock:oracle", &["mink"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn unreachable_endpoint_exits_1() {
    let r = Run::new(1, 0);
    r.ok("mock:oracle", &["ingest"]);
    let cfg = r._tmp.path().join("http.toml");
    std::fs::write(
        &cfg,
        "[backend]\nkind = \"http\"\nendpoint = \"http://127.0.0.1:9\"\nmodel = \"m\"\nmax_attempts = 1\ntimeout_secs = 5\n",
    )
    .unwrap();
    let o = qattr(&[
        "--config",
        cfg.to_str().unwrap(),
        "--corpus",
        r.corpus.to_str().unwrap(),
        "--out",
        r.out.to_str().unwrap(),
        "attribute",
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn report_marks_missing_audits_absent() {
    let r = Run::new(2, 0);
    r.ok("mock:oracle", &["ingest"]);
    r.ok("mock:oracle", &["attribute", "--strategy", "first"]);
    r.ok("mock:oracle", &["report"]);
    let table = std::fs::read_to_string(r.out.join("table5.csv")).unwrap();
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("accuracy_all"), "1.000000");
    assert_eq!(col("name_cloze"), "absent");
    assert_eq!(col("csg_mem"), "absent");
    assert_eq!(col("mink_k20"), "absent");
}

#[test]
fn contamination_matches_every_treated_novel() {
    let r = Run::new(28, 6);
    r.ok("mock:hash", &["ingest"]);
    r.ok("mock:hash", &["attribute"]);
    r.ok("mock:hash", &["csg", "--n-per-type", "10"]);
    r.ok("mock:hash", &["namecloze", "--n-samples", "10"]);
    r.ok("mock:hash", &["mink"]);
    r.ok("mock:hash", &["contamination"]);
    let c = read_json(&r.out.join("contamination.json"));
    let pairs = c["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 6);
    let mut controls: Vec<&str> = pairs.iter().map(|p| p["control"].as_str().unwrap()).collect();
    controls.sort_unstable();
    controls.dedup();
    assert_eq!(controls.len(), 6);
    assert!(pairs.iter().all(|p| p["treated"].as_str().unwrap() < "novel_06"));
}

#[test]
fn synth_rejects_more_treated_than_novels() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qattr(&["synth", tmp.path().to_str().unwrap(), "--novels", "2", "--treated", "3"]);
    assert_eq!(o.status.code(), Some(4));
}
