use std::path::Path;
use std::process::{Command, Output};

use ghz_core::ExperimentRecords;

fn ghz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghz"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(out)).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn sample_then_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    stdout(&ghz(&["--shots", "5000", "--out", out, "sample"]));
    stdout(&ghz(&[
        "--shots",
        "5000",
        "--out",
        out,
        "sample",
        "--settings",
        "mermin",
    ]));
    let records = dir.path().join("records.json");
    let doc = ExperimentRecords::from_json(&std::fs::read_to_string(&records).unwrap()).unwrap();
    assert_eq!(doc.records.len(), 81);
    assert!(doc.records.iter().all(|r| r.shots == 5000));

    let tomo = json(&ghz(&[
        "--resamples",
        "100",
        "tomo",
        "--records",
        p(&records),
    ]));
    let f = tomo["fidelity"]["value"].as_f64().unwrap();
    assert!((f - 0.729).abs() < 0.03, "{f}");
    assert!(tomo["linear_fidelity"]["sigma"].as_f64().unwrap() > 0.0);

    let avn = json(&ghz(&[
        "--resamples",
        "100",
        "--require-violation",
        "avn",
        "--records",
        p(&records),
    ]));
    assert_eq!(avn["per_setting"].as_array().unwrap().len(), 8);
    let csv = stdout(&ghz(&[
        "--resamples",
        "100",
        "--format",
        "csv",
        "avn",
        "--records",
        p(&records),
    ]));
    assert_eq!(csv.lines().count(), 9);

    let mermin = dir.path().join("mermin_records.json");
    let m = json(&ghz(&[
        "--resamples",
        "100",
        "--require-violation",
        "mermin",
        "--records",
        p(&mermin),
    ]));
    assert!(m["value"]["value"].as_f64().unwrap() > 4.0);
    let w = json(&ghz(&[
        "--resamples",
        "100",
        "--require-violation",
        "witness",
        "--records",
        p(&records),
    ]));
    assert!(w["value"].as_f64().unwrap() < 0.0);

    let heralded = json(&ghz(&[
        "--resamples",
        "100",
        "tomo",
        "--records",
        p(&records),
        "--herald",
        "C",
    ]));
    assert_eq!(heralded["n"], 3);
    let m3 = json(&ghz(&[
        "--resamples",
        "100",
        "mermin",
        "--records",
        p(&records),
        "--herald",
        "a",
    ]));
    assert_eq!(m3["n"], 3);
    assert!(!ghz(&["tomo", "--records", p(&records), "--herald", "E"])
        .status
        .success());
}

#[test]
fn bound_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("noisy.json");
    std::fs::write(&config, r#"{"noise": {"p_white": 0.2, "coherence": 0.2}, "analyses": ["avn", "witness"], "resamples": 100}"#).unwrap();
    let out = dir.path().join("out");
    let run = ghz(&[
        "--config",
        p(&config),
        "--out",
        p(&out),
        "--require-violation",
        "run",
    ]);
    assert_eq!(run.status.code(), Some(2));
    // Artifacts are still written; only the verdict fails.
    assert!(out.join("report.json").exists());
    let plain = ghz(&["--config", p(&config), "--out", p(&out), "run"]);
    assert_eq!(plain.status.code(), Some(0));
}

#[test]
fn config_errors_exit_with_one_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (k, doc) in [
        r#"{"noise": {"p_white": "x"}}"#,
        r#"{"analyses": []}"#,
        r#"{"colour": 1}"#,
        "not json",
    ]
    .iter()
    .enumerate()
    {
        let config = dir.path().join(format!("bad{k}.json"));
        std::fs::write(&config, doc).unwrap();
        let run = ghz(&["--config", p(&config), "--out", p(&out), "run"]);
        assert_eq!(run.status.code(), Some(1), "{doc}");
        assert!(
            String::from_utf8_lossy(&run.stderr).contains("invalid config"),
            "{doc}"
        );
    }
    assert!(!out.exists());
    let err = ghz(&["--config", p(&dir.path().join("bad0.json")), "run"]);
    assert!(String::from_utf8_lossy(&err.stderr).contains("noise.p_white"));
    assert_eq!(
        ghz(&["--resamples", "5", "calibrate"]).status.code(),
        Some(1)
    );
    assert_eq!(ghz(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ghz(&["--format", "csv", "state"]).status.code(), Some(1));
}

#[test]
fn three_photon_run_has_a_row_per_photon() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("n3.json");
    std::fs::write(
        &config,
        r#"{"n": 3, "analyses": ["tomo", "avn", "mermin"], "resamples": 100}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let csv = stdout(&ghz(&[
        "--config",
        p(&config),
        "--out",
        p(&out),
        "--format",
        "csv",
        "run",
    ]));
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let rows = report["results"]["three_photon"].as_array().unwrap();
    let photons: Vec<&str> = rows
        .iter()
        .map(|r| r["projected_photon"].as_str().unwrap())
        .collect();
    assert_eq!(photons, ["A", "B", "C", "D"]);
}

#[test]
fn single_commands() {
    let cal = json(&ghz(&[
        "calibrate",
        "--fidelity",
        "0.729",
        "--epsilon",
        "0.191",
    ]));
    assert!((cal["p_white"].as_f64().unwrap() - 0.8171).abs() < 5e-4);
    assert!((cal["predictions"]["mermin4"].as_f64().unwrap() - 6.99).abs() < 0.01);
    assert_eq!(
        ghz(&["calibrate", "--fidelity", "0.1", "--epsilon", "0.0"])
            .status
            .code(),
        Some(1)
    );

    let fringe = stdout(&ghz(&[
        "--format",
        "csv",
        "fringe",
        "--kind",
        "hhom",
        "--overlap",
        "1",
        "--purity",
        "1",
        "--steps",
        "3",
    ]));
    assert_eq!(
        fringe.lines().nth(2).unwrap().split(',').nth(1).unwrap(),
        "0"
    );
    let scan = json(&ghz(&["fringe", "--visibility", "0.938", "--steps", "50"]));
    assert!((scan["fitted_visibility"].as_f64().unwrap() - 0.938).abs() < 1e-6);
    assert_eq!(
        ghz(&["fringe", "--kind", "sideways"]).status.code(),
        Some(1)
    );
    assert_eq!(ghz(&["fringe", "--steps", "1"]).status.code(), Some(1));

    let state = json(&ghz(&["state"]));
    assert_eq!(state["n"], 4);
    assert!((state["fidelity"]["value"].as_f64().unwrap() - 0.729).abs() < 1e-3);
}

#[test]
fn seeds_control_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"resamples": 100}"#).unwrap();
    let out = dir.path().join("out");
    let names = [
        "report.json",
        "records.json",
        "mermin_records.json",
        "hhom.csv",
    ];
    let snapshot = |seed: &str| {
        stdout(&ghz(&[
            "--config",
            p(&config),
            "--seed",
            seed,
            "--out",
            p(&out),
            "run",
        ]));
        names.map(|name| std::fs::read(out.join(name)).unwrap())
    };
    let first = snapshot("1");
    let again = snapshot("1");
    let other = snapshot("2");
    for (k, name) in names.iter().enumerate() {
        assert_eq!(first[k], again[k], "{name}");
        assert_ne!(first[k], other[k], "{name}");
    }
    // The sidecar carries the timestamp; the report itself has none.
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("report.meta.json")).unwrap()).unwrap();
    assert!(meta["generated_unix_ms"].as_u64().unwrap() > 0);
}
