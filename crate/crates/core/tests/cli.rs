use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "dims=[8, 4, 20]",
    "tau=12",
    "phase1=12",
    "delta=1.0",
    "hotspot_fraction=0.25",
    "count_scale=1.0",
    "calibration_reps=200",
];

fn hotspot(args: &[&str], out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hotspot"));
    cmd.args(args).arg("--out").arg(out);
    for s in SMALL {
        cmd.args(["--set", s]);
    }
    cmd.output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_detect_localize() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = hotspot(&["simulate", "--set", "seed=3"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["counts.csv", "population.csv", "truth.csv", "manifest.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let counts = d.join("counts.csv");
    let pop = d.join("population.csv");
    let det_dir = d.join("det");
    let o = hotspot(&["detect", "--counts", path(&counts), "--population", path(&pop)], &det_dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(det_dir.join("history.csv").exists());
    assert!(det_dir.join("report.csv").exists());
    let loc_dir = d.join("loc");
    let o = hotspot(
        &[
            "localize",
            "--detection",
            path(&det_dir.join("detection.json")),
            "--slice",
            path(&det_dir.join("alarm_slice.csv")),
            "--set",
            "threshold=hard:0.1",
        ],
        &loc_dir,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(loc_dir.join("report.csv")).unwrap().lines().count() >= 1);

    let o = hotspot(&["detect", "--counts", path(&counts), "--population", path(&pop), "--set", "limit=1e300"], &d.join("quiet"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_and_calibrate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(hotspot(&["simulate"], d).status.success());
    let counts = d.join("counts.csv");
    let pop = d.join("population.csv");
    let o = hotspot(&["fit", "--counts", path(&counts), "--population", path(&pop), "--set", "lambda=5.0"], &d.join("fit"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("fit/fit_summary.json").exists());
    assert!(d.join("fit/trace.csv").exists());
    let o = hotspot(&["fit", "--counts", path(&counts), "--population", path(&pop), "--auto-path", "--set", "n_lambda=3"], &d.join("path"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("path/path_summary.json").exists());
    let o = hotspot(&["calibrate", "--set", "target_arl0=20"], &d.join("cal"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cal: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("cal/calibration.json")).unwrap()).unwrap();
    assert!(cal["limit"].as_f64().unwrap() > 0.0);
}

#[test]
fn evaluate_single_replication() {
    let dir = tempfile::tempdir().unwrap();
    let o = hotspot(&["evaluate", "--set", "replications=1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2);
    let reps = std::fs::read_to_string(dir.path().join("replications.csv")).unwrap();
    assert_eq!(reps.lines().count(), 2);
}

#[test]
fn bad_inputs_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(hotspot(&["simulate", "--set", "bogus=1"], d).status.code(), Some(3));
    assert_eq!(hotspot(&["simulate", "--set", "noise_sd=-1"], d).status.code(), Some(3));
    let missing = d.join("nope.csv");
    assert_eq!(hotspot(&["detect", "--counts", path(&missing), "--population", path(&missing)], d).status.code(), Some(1));
    std::fs::write(d.join("bad.csv"), "location,year,a\nX,2001,-3\n").unwrap();
    let bad = d.join("bad.csv");
    assert_eq!(hotspot(&["fit", "--counts", path(&bad), "--population", path(&bad)], d).status.code(), Some(3));
}
