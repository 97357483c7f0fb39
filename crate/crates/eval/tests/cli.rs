use std::path::Path;
use std::process::Command;

fn dqcurate(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dqcurate")).args(args).output().expect("binary runs")
}

fn core_fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn overhead_writes_one_row_per_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("overhead.csv");
    let run = dqcurate(&["overhead", "--fixture", &core_fixture("assessment.json"), "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = std::fs::read_to_string(out).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("dimension,enriched_bytes,raw_bytes,percent"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let out = out.to_str().unwrap();

    let missing = dqcurate(&["overhead", "--fixture", "/nonexistent/fixture.json", "--out", out]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"id\": 3}").unwrap();
    let invalid = dqcurate(&["overhead", "--fixture", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(invalid.status.code(), Some(1));

    let zero = dqcurate(&["simulate", "--sensors", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(zero.status.code(), Some(1));

    let unknown = dqcurate(&["simulate", "--no-such-flag"]);
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn small_simulation_writes_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let run = dqcurate(&[
        "simulate", "--sensors", "3", "--count", "10", "--rounds", "2", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let summary = dqcurate_eval::report::read_summary(&dir.path().join("summary.json")).unwrap();
    assert_eq!(summary.run.sensors, 3);
    assert_eq!(summary.records_fetched_max, 9);
}
