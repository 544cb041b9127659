use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_homelearn"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn text(out: &Output) -> (String, String) {
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn run_then_inspect_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run"])
        .arg(fixture("vacation_phone.json"))
        .args(["--episodes", "30", "--seed", "3", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    let (stdout, stderr) = text(&out);
    assert_eq!(out.status.code(), Some(0), "{stderr}");
    assert!(stdout.contains("30 episodes, seed 3"), "{stdout}");
    for f in ["qtable.json", "trace.json", "report.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["episodes"].as_array().unwrap().len(), 30);
    assert_eq!(report["seed"], 3);

    let out = bin()
        .arg("inspect")
        .arg(dir.path().join("qtable.json"))
        .args(["--state", "phone=ringing,user=on_vacation"])
        .output()
        .unwrap();
    let (stdout, _) = text(&out);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout.starts_with("phone=ringing,user=on_vacation\n"), "{stdout}");
    assert!(stdout.lines().any(|l| l.trim_start().starts_with("* phone:accepted")), "{stdout}");

    let out = bin().arg("replay").arg(dir.path().join("trace.json")).output().unwrap();
    let (stdout, stderr) = text(&out);
    assert_eq!(out.status.code(), Some(0), "{stderr}");
    assert!(stdout.contains("replayed 30 episodes"));
    assert!(stdout.contains("matches"));
}

#[test]
fn replay_against_foreign_table_fails_at_runtime() {
    let dir = tempfile::tempdir().unwrap();
    for (seed, sub) in [("1", "a"), ("2", "b")] {
        let status = bin()
            .arg("run")
            .arg(fixture("vacation_phone.json"))
            .args(["--seed", seed, "--out"])
            .arg(dir.path().join(sub))
            .output()
            .unwrap()
            .status;
        assert!(status.success());
    }
    let out = bin()
        .arg("replay")
        .arg(dir.path().join("a/trace.json"))
        .arg("--qtable")
        .arg(dir.path().join("b/qtable.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", text(&out).1);
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut file: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("vacation_phone.json")).unwrap()).unwrap();
    file["rules"][1]["priority"] = serde_json::json!(2);
    std::fs::write(&bad, file.to_string()).unwrap();
    let out = bin().arg("run").arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    let (_, stderr) = text(&out);
    assert_eq!(out.status.code(), Some(1), "{stderr}");
    assert!(stderr.contains("priority"), "{stderr}");

    let out = bin().args(["run", "--episodes", "many", "x.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let status = bin()
        .arg("run")
        .arg(fixture("vacation_phone.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let out = bin()
        .arg("inspect")
        .arg(dir.path().join("qtable.json"))
        .args(["--state", "phone=melting,user=home"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_file_is_a_runtime_error() {
    let out = bin().args(["replay", "/definitely/not/here/trace.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn collaborative_run_reads_answers_from_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = bin()
        .arg("run")
        .arg(fixture("vacation_phone_collaborative.json"))
        .args(["--episodes", "1", "--out"])
        .arg(dir.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // an unoffered action is refused, then the valid answer is taken; the
    // remaining prompts see end of input and follow the plan
    child.stdin.take().unwrap().write_all(b"fan:on\nphone:accepted\n").unwrap();
    let out = child.wait_with_output().unwrap();
    let (_, stderr) = text(&out);
    assert_eq!(out.status.code(), Some(0), "{stderr}");
    assert!(stderr.contains("`fan:on` is not an option"));

    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("trace.json")).unwrap()).unwrap();
    let steps = trace["episodes"][0]["steps"].as_array().unwrap();
    assert_eq!(steps[0]["chosen_action"], "phone:accepted");
    let rewards: Vec<f64> = steps[0]["updates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|u| u["reward"].as_f64().unwrap())
        .collect();
    assert_eq!(rewards, [-5.0, 5.0]);
    for step in &steps[1..] {
        assert_eq!(step["fallback"], true);
        assert_eq!(step["updates"][0]["reward"], 1.0);
    }
}

#[test]
fn serve_reports_its_address() {
    let mut child = bin()
        .arg("serve")
        .arg(fixture("vacation_phone.json"))
        .args(["--port", "0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(line.starts_with("listening on http://127.0.0.1:"), "{line}");
}
