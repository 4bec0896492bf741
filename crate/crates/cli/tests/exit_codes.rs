use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rnn-ntk-lab")).args(args).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn passing_run_exits_zero_and_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = write(dir.path(), "bc.json", r#"{"experiment":"bound-check","n":[8],"seeds":[1,2]}"#);
    let (code, text) = run(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    for f in ["metrics.csv", "checks.csv", "report.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let (code, text) = run(&["report", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
}

#[test]
fn unknown_key_and_missing_file_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"experiment":"degeneracy","bogus":1}"#);
    let (code, text) = run(&["run", &cfg]);
    assert_eq!(code, 2);
    assert!(text.contains("bogus"), "{text}");
    let (code, _) = run(&["run", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn failed_threshold_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = write(
        dir.path(),
        "deg.json",
        r#"{"experiment":"degeneracy","L_max":200,"L_list":[50,100,200],"thresholds":{"max_gap_ratio":1e-9}}"#,
    );
    let (code, text) = run(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1, "{text}");
}

#[test]
fn gen_data_writes_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let target = write(dir.path(), "t.json", r#"{"target":{"kind":"additive","terms":[{"positions":[2],"beta":[0.6,0.8,0,0],"psi":{"name":"arctan_half"}}]},"d":4,"L":3,"seed":7}"#);
    let data = dir.path().join("data.json");
    let (code, text) = run(&["gen-data", &target, "--n", "5", "--out", data.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert!(data.exists());
}
