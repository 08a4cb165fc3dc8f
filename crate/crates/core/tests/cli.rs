use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use barrier_compose::report::trajectory_header;
use barrier_compose::scenario::Scenario;

const BIN: &str = env!("CARGO_BIN_EXE_barrier-compose");

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const PAIR: &str = r#"
[team]
n = 2
max_accel = 2.0
max_speed = 0.5
d_s = 0.15
d_c = 0.6

[initial]
positions = [[-0.3, 0.0], [0.3, 0.0]]

[waypoints]
paths = [[[-0.4, 0.0]], [[0.4, 0.0]]]

[certificate]
kind = "safety"

[sim]
dt = 0.01
duration = 1.0
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_trajectory_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("exp1");
    let o = cli(&["run", scenario_path("exp1_safety").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("result: pass\n"));

    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, trajectory_header(4));
    assert_eq!(header.len(), 1 + 16 + 8 + 8 + 1 + 6 + 2);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6001);
    assert!(rows.iter().all(|r| r.split(',').count() == header.len()));

    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.starts_with("schema = barrier-compose-summary/1\n"));
    assert!(summary.contains("certificate = safety\n"));
    assert!(summary.ends_with("result = pass\n"));
}

#[test]
fn baseline_reports_uncertified_failure_without_failing() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["run", scenario_path("exp1_baseline").to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("FAIL (not certified)"));
}

#[test]
fn quiet_prints_only_the_result_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write(tmp.path(), "pair.toml", PAIR);
    let o = cli(&["--quiet", "run", path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "result: pass\n");
}

#[test]
fn check_exit_codes_follow_validity() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = cli(&["check", scenario_path("pair_safety").to_str().unwrap(), "--samples", "200", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    let report = fs::read_to_string(tmp.path().join("validity.txt")).unwrap();
    assert!(report.starts_with("schema = barrier-compose-validity/1\n"));
    assert!(report.contains("evaluated = 200\n"));

    let bad = cli(&["check", scenario_path("contradictory").to_str().unwrap(), "--samples", "300"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("counterexample"));
}

#[test]
fn check_is_reproducible_for_a_seed() {
    let args = ["check", "--samples", "100", "--seed", "3"];
    let path = scenario_path("contradictory");
    let a = cli(&[&args[..], &[path.to_str().unwrap()]].concat());
    let b = cli(&[&args[..], &[path.to_str().unwrap()]].concat());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("empty_set.toml", PAIR.replace("d_s = 0.15", "d_s = 0.7")),
        ("unknown_key.toml", PAIR.replace("[sim]", "[sim]\nstep = 3")),
        ("bad_edge.toml", PAIR.replace("kind = \"safety\"", "kind = \"static\"\nedges = [[1, 3]]")),
        ("zero_dt.toml", PAIR.replace("dt = 0.01", "dt = 0.0")),
        ("not_toml.toml", "team = [".to_string()),
    ];
    for (name, text) in cases {
        let path = write(tmp.path(), name, &text);
        let o = cli(&["run", path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stdout(&o));
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"), "{name}");
    }
    let missing = cli(&["run", tmp.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
    let no_certificate = write(tmp.path(), "none.toml", &PAIR.replace("\"safety\"", "\"none\""));
    assert_eq!(cli(&["check", no_certificate.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn sweep_runs_every_scenario_and_reports_the_worst_code() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("scenarios");
    fs::create_dir(&dir).unwrap();
    write(&dir, "a.toml", PAIR);
    write(&dir, "b.toml", &PAIR.replace("[-0.4, 0.0]", "[0.5, 0.1]"));
    write(&dir, "notes.txt", "ignored");
    let out = tmp.path().join("out");
    let o = cli(&["--quiet", "sweep", dir.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 2);
    assert!(out.join("a/trajectory.csv").exists() && out.join("b/summary.txt").exists());

    write(&dir, "c.toml", "oops");
    let o = cli(&["sweep", dir.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("c.toml"));
}

#[test]
fn selftest_passes() {
    let o = cli(&["--quiet", "selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o), "result: pass\n");
}

#[test]
fn bundled_scenarios_round_trip_through_toml() {
    for entry in fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        let s = Scenario::load(&path).unwrap();
        let text = s.to_toml_string().unwrap();
        let back = Scenario::from_toml_str(&text, "fallback").unwrap();
        assert_eq!(s, back, "{}", path.display());
    }
}
