use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn crowdroute(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crowdroute"))
        .args(args)
        .env_remove("CRAWL_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenarios().join("s2.json");
    let o = crowdroute(&["run", "--scenario", path(&scenario), "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("time,vehicle,event,link,detail\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["vehicle_count"], 2);
    assert_eq!(summary["all_parked_runs"], 1);
    assert!(stdout(&o).contains("parked 2/2"));
}

#[test]
fn same_seed_gives_identical_traces() {
    let scenario = scenarios().join("s1_desk.json");
    let traces: Vec<String> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let o = crowdroute(&[
                "run",
                "--scenario",
                path(&scenario),
                "--seed",
                "4",
                "--controlled",
                "12",
                "--out",
                path(dir.path()),
            ]);
            assert!(o.status.success(), "{}", stderr(&o));
            fs::read_to_string(dir.path().join("trace.csv")).unwrap()
        })
        .collect();
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn repeated_runs_write_bands_and_a_test() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenarios().join("s1_desk.json");
    let o = crowdroute(&["run", "--scenario", path(&scenario), "--repeat", "4", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    for seed in 1..=4 {
        assert!(dir.path().join(format!("trace_seed{seed}.csv")).exists());
    }
    let bands = fs::read_to_string(dir.path().join("bands.csv")).unwrap();
    assert!(bands.starts_with("time,mean,std\n"));
    let summary = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("first_vs_second_half"));
}

#[test]
fn missing_scenario_names_the_path() {
    let o = crowdroute(&["run", "--scenario", "/nonexistent/scenario.json"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/scenario.json"), "{}", stderr(&o));
}

#[test]
fn zero_repeats_are_rejected() {
    let scenario = scenarios().join("s2.json");
    let o = crowdroute(&["run", "--scenario", path(&scenario), "--repeat", "0"]);
    assert!(!o.status.success());
}

#[test]
fn bench_writes_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let network = scenarios().join("campus.json");
    let o = crowdroute(&[
        "bench",
        "--network",
        path(&network),
        "--sources",
        "1..2",
        "--horizons",
        "1..2",
        "--reps",
        "5",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(csv, stdout(&o));
}

#[test]
fn bench_rejects_too_few_reps_and_bad_ranges() {
    let network = scenarios().join("campus.json");
    let few = crowdroute(&["bench", "--network", path(&network), "--reps", "0"]);
    assert!(!few.status.success());
    let backwards = crowdroute(&["bench", "--network", path(&network), "--sources", "3..1"]);
    assert!(!backwards.status.success());
    assert!(stderr(&backwards).contains("3..1"));
}

#[test]
fn ttest_reports_p_one_for_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    fs::write(&a, "1.5 2.5\n3.5, 4.5\n").unwrap();
    let o = crowdroute(&["ttest", path(&a), path(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("p = 1.000000"));
}

#[test]
fn ttest_matches_frozen_reference() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    fs::write(&a, "1 2 3 4 5").unwrap();
    fs::write(&b, "2 3 4 5 6").unwrap();
    let o = crowdroute(&["ttest", path(&a), path(&b)]);
    assert_eq!(stdout(&o), "t = -1.000000\ndf = 8.000000\np = 0.346594\n");
}

#[test]
fn ttest_rejects_short_or_malformed_samples() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.txt");
    let bad = dir.path().join("bad.txt");
    fs::write(&one, "42\n").unwrap();
    fs::write(&bad, "1 two 3\n").unwrap();
    let short = crowdroute(&["ttest", path(&one), path(&one)]);
    assert!(!short.status.success());
    let malformed = crowdroute(&["ttest", path(&bad), path(&one)]);
    assert!(!malformed.status.success());
    assert!(stderr(&malformed).contains("`two`"));
}
