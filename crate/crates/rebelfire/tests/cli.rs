use std::path::Path;
use std::process::{Command, Output};

use rebelfire::report::ReportFile;
use rebelfire::trace::TraceFile;
use rebelfire_core::checker::{PropertyId, Verdict};

fn rebelfire(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rebelfire")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const TINY: &str = r#"
protocol = "naive-relay"

[adversary]
n = 2
f = 0
horizon = 3
"#;

#[test]
fn enumerate_then_check_equals_fused() {
    let dir = tempfile::tempdir().unwrap();
    for preset in ["remark12", "naive-byz", "silent"] {
        let o = rebelfire(dir.path(), &["enumerate", "--preset", preset, "--out", "t.json"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let split = rebelfire(dir.path(), &["check", "t.json", "--format", "json"]);
        let fused = rebelfire(dir.path(), &["check", "--preset", preset, "--format", "json"]);
        assert_eq!(split.stdout, fused.stdout, "{preset}");
        assert_eq!(split.status.code(), fused.status.code());
    }
}

#[test]
fn exit_status_follows_violations() {
    let dir = tempfile::tempdir().unwrap();
    let o = rebelfire(dir.path(), &["check", "--preset", "naive-byz"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("U                    VIOLATED"));

    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let o = rebelfire(dir.path(), &["check", "--config", "tiny.toml", "--properties", "U,R,C"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    // Not-applicable verdicts alone do not fail the check.
    let o = rebelfire(dir.path(), &["check", "--preset", "naive-byz", "--properties", "Thm10"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("not-applicable"));
}

#[test]
fn property_filter_reports_only_what_was_asked() {
    let dir = tempfile::tempdir().unwrap();
    let o = rebelfire(dir.path(), &["check", "--preset", "silent", "--properties", "Lemma18", "--format", "json"]);
    let report = ReportFile::from_json(&stdout(&o)).unwrap();
    assert_eq!(report.entries.len(), 1);
    assert_eq!(report.entries[0].property, PropertyId::Lemma18);
    assert_eq!(report.entries[0].verdict, Verdict::Holds);

    let o = rebelfire(dir.path(), &["check", "--preset", "silent", "--properties", "Lemma99"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown property"));
}

#[test]
fn remark12_eval_examples() {
    let dir = tempfile::tempdir().unwrap();
    rebelfire(dir.path(), &["enumerate", "--preset", "remark12", "--out", "r12.json"]);
    let at = |f: &str| stdout(&rebelfire(dir.path(), &["eval", "r12.json", f, "--point", "0,4"])).trim().to_string();
    assert_eq!(at("fire(2)"), "true");
    assert_eq!(at("fire(2) & !Y fire(2)"), "true");
    assert_eq!(at("B[2](start & EdH(start))"), "true");
    assert_eq!(at("B[2](start & CdH(start))"), "false");
    assert_eq!(at("B[2] EdB start"), "false");

    let table = stdout(&rebelfire(dir.path(), &["eval", "r12.json", "start(0)"]));
    assert!(table.lines().any(|l| l.starts_with("r0 ") && l.ends_with("FTTTTT")), "{table}");
}

#[test]
fn remark12_trace_pins_the_scripted_run() {
    let dir = tempfile::tempdir().unwrap();
    rebelfire(dir.path(), &["enumerate", "--preset", "remark12", "--out", "r12.json"]);
    let text = std::fs::read_to_string(dir.path().join("r12.json")).unwrap();
    let trace = TraceFile::from_json(&text).unwrap();
    // The adversary can produce the script itself, so it may keep its choice log.
    let set = trace.run_set().unwrap();
    assert_eq!(set.runs[0], rebelfire_core::protocol::remark12_scenario(5));
    assert_eq!(trace.runs[0].initially_faulty, vec![1]);
    let o = rebelfire(dir.path(), &["replay", "r12.json", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("matches the stored run"));
    let o = rebelfire(dir.path(), &["replay", "r12.json", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn single_agent_without_start_has_one_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "protocol = \"silent\"\n[adversary]\nn = 1\nf = 0\nhorizon = 2\n[adversary.start]\nrounds = []\n";
    std::fs::write(dir.path().join("one.toml"), cfg).unwrap();
    let o = rebelfire(dir.path(), &["enumerate", "--config", "one.toml"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = TraceFile::from_json(&stdout(&o)).unwrap();
    assert_eq!(trace.runs.len(), 1);
}

#[test]
fn run_cap_gives_a_partial_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let o = rebelfire(dir.path(), &["enumerate", "--preset", "naive-byz", "--max-runs", "5", "--out", "p.json"]);
    assert_eq!(o.status.code(), Some(3));
    let trace = TraceFile::from_json(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert!(trace.truncated);
    assert_eq!(trace.runs.len(), 5);
}

#[test]
fn bad_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    rebelfire(dir.path(), &["enumerate", "--preset", "silent", "--out", "s.json"]);
    let o = rebelfire(dir.path(), &["eval", "s.json", "K[0] (start &"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("K[0] (start &\n"), "{err}");
    assert!(err.contains("^"), "{err}");

    let o = rebelfire(dir.path(), &["eval", "s.json", "fire(7)"]);
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(dir.path().join("bad.toml"), format!("{TINY}colour = 3\n")).unwrap();
    let o = rebelfire(dir.path(), &["check", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));

    let o = rebelfire(dir.path(), &["check", "s.json", "--preset", "silent"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn presets_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&rebelfire(dir.path(), &["presets"]));
    for name in ["echo-n4f1", "remark12", "naive-byz", "silent"] {
        assert!(out.contains(name));
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_rebelfire"))
            .args(["enumerate", "--preset", "naive-byz"])
            .env("REBELFIRE_THREADS", threads)
            .current_dir(dir.path())
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("4"));
}
