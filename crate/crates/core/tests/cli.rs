use std::fs;
use std::path::Path;

use rectiflow::cli::run;
use serde_json::Value;

fn rect(args: &[&str], out: &Path) -> i32 {
    let mut all = vec!["rectiflow".to_string()];
    all.extend(args.iter().map(|s| s.to_string()));
    all.extend(["--out".to_string(), out.display().to_string()]);
    run(all)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn spike_report_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rect(&["spike", "--m", "2", "--probes", "500"], dir.path()), 0);
    let report = read_json(&dir.path().join("spike_report.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["holds"], true);
    assert_eq!(report["metrics"]["weight_set"].as_array().unwrap().len(), 3);
    assert_eq!(rect(&["spike", "--m", "0"], dir.path()), 2);
    assert_eq!(rect(&["spike"], dir.path()), 2);
    assert_eq!(rect(&["no-such-command"], dir.path()), 2);
}

#[test]
fn approx_fn_constant_and_precondition() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("f.csv");
    let meta = dir.path().join("f.json");
    fs::write(&csv, "x1,value\n0,0.25\n0.5,0.25\n1,0.25\n").unwrap();
    fs::write(&meta, r#"{"lip":0,"sup_norm":0.25}"#).unwrap();
    let (c, m) = (csv.to_str().unwrap(), meta.to_str().unwrap());
    assert_eq!(
        rect(&["approx-fn", "--sample", c, "--meta", m, "--n", "4"], dir.path()),
        0
    );
    let report = read_json(&dir.path().join("approx_report.json"));
    assert!(report["sup_errors"][0].as_f64().unwrap() <= 1.0 / 8.0);
    fs::write(&meta, r#"{"lip":3,"sup_norm":0.25}"#).unwrap();
    assert_eq!(
        rect(&["approx-fn", "--sample", c, "--meta", m, "--n", "2"], dir.path()),
        2
    );
}

#[test]
fn transport_reports_depth_and_refuses_zero_weights() {
    let dir = tempfile::tempdir().unwrap();
    let mix = dir.path().join("mix.json");
    fs::write(
        &mix,
        r#"{"d":2,"K":2,"weights":{"1,1":"1/4","1,2":"1/4","2,1":"1/4","2,2":"1/4"},"N":4}"#,
    )
    .unwrap();
    let m = mix.to_str().unwrap();
    assert_eq!(
        rect(
            &["transport", "--mixture", m, "--s", "2", "--atoms", "1500"],
            dir.path()
        ),
        0
    );
    let report = read_json(&dir.path().join("transport_report.json"));
    assert_eq!(report["bounds"]["depth"], 3 + 5 + 2);
    assert_eq!(report["cell_masses"]["max_abs_err"], 0.0);
    let cells = fs::read_to_string(dir.path().join("transport_cells.csv")).unwrap();
    assert!(cells.starts_with("# generated_at_unix="));
    assert_eq!(cells.lines().count(), 2 + 16);
    fs::write(&mix, r#"{"d":1,"K":2,"weights":{"1":"0","2":"1"},"N":2}"#).unwrap();
    assert_eq!(rect(&["transport", "--mixture", m], dir.path()), 2);
}

#[test]
fn reproducible_outputs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "bits",
        "--m",
        "1",
        "--n",
        "2",
        "--c",
        "4",
        "--kappa",
        "poly:1",
        "--reproducible",
        "--seed",
        "9",
    ];
    assert_eq!(rect(&args, a.path()), 0);
    assert_eq!(rect(&args, b.path()), 0);
    for f in ["bits.csv", "bits_report.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
    let report = read_json(&a.path().join("bits_report.json"));
    assert_eq!(report["nominal_exponent"], 2.0);
}

#[test]
fn bits_rejects_bad_grids() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        rect(&["bits", "--m", "1", "--n", "1", "--c", "1", "--eps", "0"], dir.path()),
        2
    );
    assert_eq!(
        rect(
            &["bits", "--m", "1", "--n", "1", "--c", "1", "--count", "0"],
            dir.path()
        ),
        2
    );
    assert_eq!(
        rect(
            &["bits", "--m", "1", "--n", "1", "--c", "1", "--kappa", "poly:0"],
            dir.path()
        ),
        2
    );
}

#[test]
fn config_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"command":"entropy","d":1,"eps":[0.5],"k":[2,3],"reproducible":true}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(rect(&["entropy", "--d", "3", "--config", c], dir.path()), 0);
    let report = read_json(&dir.path().join("entropy_report.json"));
    assert_eq!(report["d"], 1);
    let csv = fs::read_to_string(dir.path().join("entropy.csv")).unwrap();
    assert!(csv.starts_with("d,eps,"));
    fs::write(&cfg, r#"{"command":"spike"}"#).unwrap();
    assert_eq!(rect(&["entropy", "--d", "1", "--config", c], dir.path()), 2);
    fs::write(&cfg, r#"{"typo":1}"#).unwrap();
    assert_eq!(rect(&["entropy", "--d", "1", "--config", c], dir.path()), 2);
}

#[test]
fn pipeline_sweep_on_the_arc() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "pipeline",
        "--n-grid",
        "4,8",
        "--atoms",
        "600",
        "--mu-atoms",
        "480",
        "--arc-samples",
        "640",
        "--reproducible",
    ];
    assert_eq!(rect(&args, dir.path()), 0);
    let report = read_json(&dir.path().join("pipeline_report.json"));
    assert_eq!(report["measured_non_increasing"], true);
    let certs = report["certificates"].as_array().unwrap();
    assert_eq!(certs.len(), 2);
    for c in certs {
        let measured = c["measured_w1"].as_f64().unwrap();
        assert!(measured <= c["claimed_w1"].as_f64().unwrap() + c["slack"].as_f64().unwrap());
    }
    let sweep = fs::read_to_string(dir.path().join("pipeline_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
}
