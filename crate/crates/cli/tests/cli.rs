use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mvbridge::{fixtures, mean_closed, variance_closed};
use serde_json::Value;

const MODEL_2023_2025: [&str; 10] = [
    "--a", "3.673e-2", "--r", "0.71", "--mu", "1.634", "--omega", "-143.9", "--alpha", "0.5482",
];

fn mvbridge(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvbridge"))
        .args(args)
        .current_dir(dir)
        .env_remove("MVBRIDGE_THREADS")
        .output()
        .expect("binary runs")
}

fn with_model<'a>(cmd: &'a str, rest: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend(MODEL_2023_2025);
    v.extend(rest);
    v
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn digests(manifest: &Path) -> Vec<String> {
    let m = json(&fs::read(manifest).unwrap());
    m["outputs"].as_array().unwrap().iter().map(|o| o["sha256"].as_str().unwrap().to_string()).collect()
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvbridge(&with_model("check", &[]), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out.stdout);
    assert_eq!(report["assumption"]["overall"], true);
    assert_eq!(report["feller"]["violated_everywhere"], true);
    assert!(dir.path().join("out/manifest.json").exists());

    let mut args = with_model("check", &[]);
    let n = args.len();
    args[n - 1] = "2";
    let out = mvbridge(&args, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stdout)["assumption"]["alpha_ok"], false);

    let out = mvbridge(&["check", "--a", "0.1", "--r", "0.7"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--mu") && err.contains("Usage"), "{err}");

    let out = mvbridge(&["check", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(mvbridge(&[], dir.path()).status.code(), Some(1));
}

#[test]
fn moments_row_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvbridge(&with_model("moments", &["--grid-points", "1001"]), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/moments.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 1002);
    let half = &rows[501];
    assert_eq!(half[0].parse::<f64>().unwrap(), 0.5);
    let model = fixtures::mean_field_2023_2025();
    assert_eq!(half[1].parse::<f64>().unwrap(), mean_closed(0.5, &model));
    assert_eq!(half[2].parse::<f64>().unwrap(), variance_closed(0.5, &model));
    let ode: f64 = half[4].parse().unwrap();
    assert!((ode / mean_closed(0.5, &model) - 1.0).abs() < 1e-6);
    // the ODE columns stop short of the terminal time
    assert_eq!(rows[1001][4], "");
}

#[test]
fn normalize_two_day_fixture() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("counts.csv"),
        "day_id,t_seconds,count\nbusy,0,30\nbusy,60,50\nbusy,120,20\nquiet,0,0\nquiet,60,0\n",
    )
    .unwrap();
    fs::write(dir.path().join("days.csv"), "day_id,day_length_seconds\nbusy,180\nquiet,120\n").unwrap();
    let out = mvbridge(&["normalize", "--counts", "counts.csv", "--days", "days.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&out.stdout);
    assert_eq!(summary["retained_days"], 1);
    assert_eq!(summary["excluded_days"], serde_json::json!(["quiet"]));
    let text = fs::read_to_string(dir.path().join("out/normalized.csv")).unwrap();
    let z: f64 = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((z - 1.0).abs() < 1e-12);
    assert!(!dir.path().join("out/curves.csv").exists());
    let manifest = json(&fs::read(dir.path().join("out/manifest.json")).unwrap());
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn fit_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let conf = "a = 6.003e-2\nr = 1.647\nmu = 1.5\nomega = -122.9\nalpha = 0.4922\n";
    fs::write(dir.path().join("model.conf"), conf).unwrap();
    let run = |args: &[&str]| {
        let out = mvbridge(args, dir.path());
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    };
    run(&[
        "simulate", "--config", "model.conf", "--steps", "6000", "--paths", "200", "--stride", "50",
        "--seed", "0", "--write-paths", "csv", "--out-dir", "sim",
    ]);
    run(&["normalize", "--ensemble", "sim/paths.csv", "--bins", "60", "--grid-bins", "60", "--out-dir", "norm"]);
    let out = run(&["fit", "--curves", "norm/curves.csv", "--out-dir", "fit"]);
    let fit = json(&out.stdout);
    let rel = |key: &str, truth: f64| (fit[key].as_f64().unwrap() / truth - 1.0).abs();
    assert!(rel("a", 6.003e-2) <= 0.10, "{fit}");
    assert!(rel("r", 1.647) <= 0.10, "{fit}");
    assert!(rel("mu", 1.5) <= 0.25, "{fit}");
    assert!(rel("omega", -122.9) <= 0.40, "{fit}");
    assert!((fit["alpha"].as_f64().unwrap() - 0.4922).abs() <= 0.2, "{fit}");
    assert_eq!(fs::read(dir.path().join("fit/fit.json")).unwrap(), out.stdout);
}

#[test]
fn simulate_reproduces_from_manifest_on_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let first = mvbridge(
        &with_model(
            "simulate",
            &["--steps", "400", "--paths", "300", "--stride", "4", "--seed", "9", "--write-paths", "binary", "--threads", "1"],
        ),
        dir.path(),
    );
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let again = mvbridge(
        &["simulate", "--config", "out/manifest.json", "--out-dir", "again", "--threads", "3"],
        dir.path(),
    );
    assert_eq!(again.status.code(), Some(0), "{}", String::from_utf8_lossy(&again.stderr));
    let a = digests(&dir.path().join("out/manifest.json"));
    assert_eq!(a.len(), 2);
    assert_eq!(a, digests(&dir.path().join("again/manifest.json")));
    let manifest = json(&fs::read(dir.path().join("again/manifest.json")).unwrap());
    assert_eq!(manifest["master_seed"], 9);
    assert_eq!(manifest["config"]["seed"], "9");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = "a = 0.5\nr = 0.71\nmu = 1.634\nomega = -143.9\nalpha = 0.5482\ngrid_points = 11\n";
    fs::write(dir.path().join("m.conf"), conf).unwrap();
    let out = mvbridge(&["moments", "--config", "m.conf", "--a", "3.673e-2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let manifest = json(&fs::read(dir.path().join("out/manifest.json")).unwrap());
    assert_eq!(manifest["config"]["a"], "0.03673");
    assert_eq!(manifest["config"]["grid-points"], "11");
    let text = fs::read_to_string(dir.path().join("out/moments.csv")).unwrap();
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvbridge(&["fit", "--curves", "missing.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));

    let mut zeros = String::from("s,mean,std,n_obs\n");
    for k in 0..20 {
        zeros += &format!("{},0,0,5\n", (k as f64 + 0.5) / 20.0);
    }
    fs::write(dir.path().join("zeros.csv"), zeros).unwrap();
    let out = mvbridge(&["fit", "--curves", "zeros.csv"], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));

    let out = mvbridge(&with_model("simulate", &["--steps", "100", "--stride", "7"]), dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = mvbridge(&["fit", "--counts", "c.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn blowup_pdf_and_superpose_emit_tables() {
    let dir = tempfile::tempdir().unwrap();
    let sim = ["--steps", "500", "--paths", "400", "--stride", "5"];
    let out = mvbridge(&with_model("blowup", &[&sim[..], &["--alphas", "0.5482,2", "--out-dir", "b"]].concat()), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("b/blowup.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    // 0.9..=1 with 100 recorded intervals: 11 rows per alpha
    assert_eq!(rows.len(), 22);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() >= 0.9 - 1e-12));
    let last_violated = rows.last().unwrap();
    assert_eq!(last_violated[1], "false");
    assert_eq!(last_violated[3].parse::<f64>().unwrap(), f64::INFINITY);
    assert_eq!(last_violated[4].parse::<f64>().unwrap(), 0.0);

    let out = mvbridge(&with_model("pdf", &[&sim[..], &["--times", "0.5", "--pdf-bins", "20", "--out-dir", "p"]].concat()), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("p/pdf.csv")).unwrap();
    assert_eq!(text.lines().count(), 21);

    let out = mvbridge(
        &with_model("superpose", &[&sim[..], &["--components", "2", "--weights", "0.3,0.7", "--out-dir", "s"]].concat()),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = mvbridge(
        &with_model("superpose", &[&sim[..], &["--components", "2", "--weights", "0.3,0.6"]].concat()),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}
