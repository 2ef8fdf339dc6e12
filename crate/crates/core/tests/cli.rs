//! End-to-end tests of the `adaftrl` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adaftrl"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn exec(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn adaftrl")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn error_json(o: &Output) -> serde_json::Value {
    let line = stderr(o).lines().rev().find(|l| l.starts_with("{\"error\"")).map(str::to_owned);
    serde_json::from_str(&line.unwrap_or_else(|| panic!("no error JSON in {:?}", stderr(o)))).unwrap()
}

fn write_config(dir: &Path, value: serde_json::Value) -> PathBuf {
    let p = dir.join("cfg.json");
    std::fs::write(&p, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    p
}

fn base_config() -> serde_json::Value {
    serde_json::json!({
        "name": "cli-test",
        "learner": {"preset": "ogd", "eta": 0.1},
        "sequence": {"kind": "random-signs", "dim": 3, "magnitude": 0.5},
        "set": {"kind": "ball", "center": [0, 0, 0], "radius": 1},
        "T": 60,
        "seeds": [3, 4],
        "bounds": ["oo-ftrl", "forward"]
    })
}

#[test]
fn run_is_byte_identical_across_invocations_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("ogd-linear.json");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = exec(bin().args(["run"]).arg(&cfg).arg("--out").arg(&a).args(["--jobs", "1"]));
    assert!(o.status.success(), "{}", stderr(&o));
    let o = exec(bin().args(["run"]).arg(&cfg).arg("--out").arg(&b).args(["--jobs", "3"]));
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["seed-1.csv", "report.json"] {
        let x = std::fs::read(a.join("ogd-linear").join(f)).unwrap();
        let y = std::fs::read(b.join("ogd-linear").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let csv = std::fs::read_to_string(a.join("ogd-linear/seed-1.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,x0,x1,x2,g0,g1,g2,"), "{header}");
    assert!(header.ends_with("cum_regret,cum_bound,slack"), "{header}");
    assert_eq!(csv.lines().count(), 101);
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["name"], "ogd-linear");
}

#[test]
fn invalid_step_size_is_rejected_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    for eta in [0.0, -1.0] {
        let mut v = base_config();
        v["learner"]["eta"] = serde_json::json!(eta);
        let cfg = write_config(dir.path(), v);
        let o = exec(bin().arg("run").arg(&cfg).arg("--out").arg(dir.path()));
        assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
        let e = error_json(&o);
        assert!(matches!(e["error"]["kind"].as_str(), Some("invalid_parameter" | "invalid_config")), "{e}");
        assert!(e["error"]["message"].as_str().unwrap().contains("eta"), "{e}");
    }
    // Unknown fields and malformed JSON are configuration errors too.
    let mut v = base_config();
    v["horizon"] = serde_json::json!(5);
    let cfg = write_config(dir.path(), v);
    let o = exec(bin().arg("run").arg(&cfg));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "invalid_config");
}

#[test]
fn replay_accepts_own_ledger_and_rejects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), base_config());
    let out = dir.path().join("out");
    let o = exec(bin().arg("run").arg(&cfg).arg("--out").arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = out.join("cli-test/seed-4.csv");
    let o = exec(bin().arg("replay").arg(&cfg).arg(&csv));
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 4);
    assert_eq!(v["rows"], 60);

    // Another seed's ledger does not replay under this one.
    let o = exec(bin().arg("replay").arg(&cfg).arg(&csv).args(["--seed", "3"]));
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"]["kind"], "replay_mismatch");

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let mut cells: Vec<String> = lines[10].split(',').map(str::to_owned).collect();
    let last = cells.len() - 1;
    cells[last] = "123.0".into();
    lines[10] = cells.join(",");
    let tampered = dir.path().join("seed-4.csv");
    std::fs::write(&tampered, lines.join("\n") + "\n").unwrap();
    let o = exec(bin().arg("replay").arg(&cfg).arg(&tampered));
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn sweep_writes_rows_for_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base_config();
    v["grid"] = serde_json::json!({"T": [50, 200], "eta_over_sqrt_t": true});
    let cfg = write_config(dir.path(), v);
    let o = exec(bin().arg("sweep").arg(&cfg).arg("--out").arg(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("cli-test/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("cli-test/sweep.json").exists());
}

#[test]
fn verify_reports_every_property() {
    let o = exec(bin().args(["verify", "lemmas", "--instances", "200", "--seed", "5"]));
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.lines().all(|l| l.starts_with("PASS")), "{err}");
    let reports: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(reports[0]["suite"], "lemmas");
    assert_eq!(reports[0]["passed"], true);

    let o = exec(bin().args(["verify", "no-such-suite"]));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_tolerance_is_rejected() {
    let o = exec(bin().arg("run").arg(example("ogd-linear.json")).arg("--tol=-1"));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "invalid_parameter");
}
