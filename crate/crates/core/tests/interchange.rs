use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use hetero_doa::array::{synthesize, ArrayConfig, BeamformerSetting};
use hetero_doa::interchange::{
    invoke_estimator, read_estimate, read_features, write_features, EstimateFile, EstimatorClient,
};
use hetero_doa::subspace::{fd_angle, noise_subspace, root_music, sample_covariance};
use hetero_doa::{Error, C64};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn script(dir: &Path, body: &str) -> String {
    let path = dir.join("estimator.sh");
    fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    format!("sh {}", path.display())
}

#[test]
fn golden_features_parse() {
    let f = read_features(&data("features.json")).unwrap();
    assert_eq!(f.m, 3);
    let r = f.to_covariance();
    assert_eq!(r[(0, 1)], C64::new(0.0, -1.0));
    assert_eq!(r[(2, 0)], C64::new(-1.0, 0.0));
    assert_eq!(f.angle[0][2], std::f64::consts::PI);
    let rm = root_music(&noise_subspace(&r, 1).unwrap()).unwrap();
    assert!((fd_angle(rm.phase, 0.5, 1.0).theta_deg - 30.0).abs() < 1e-9);
}

#[test]
fn golden_estimate_parses() {
    let e = read_estimate(&data("estimate.json")).unwrap();
    assert_eq!(e.theta_deg, 30.0);
    assert_eq!(e.grid_deg.len(), e.probs.len());
}

#[test]
fn table_one_covariance_survives_the_file() {
    let cfg = ArrayConfig::table_one();
    let b = synthesize(&cfg, &BeamformerSetting::broadside(&cfg), 41.0, 10.0, 100, 9).unwrap();
    let r = sample_covariance(&b.fd).unwrap().matrix;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("features.json");
    write_features(&r, &path).unwrap();
    let back = read_features(&path).unwrap();
    assert_eq!(back.m, 128);
    assert!(back.validate().is_ok());
    assert_eq!(back.to_covariance(), r);
}

#[test]
fn echo_stub_returns_its_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(dir.path(), r#"printf '{"theta_deg": 41.0, "grid_deg": [41.0], "probs": [1.0]}' > "$2""#);
    let features = data("features.json");
    let out = dir.path().join("estimate.json");
    let e = invoke_estimator(&cmd, &features, &out, Duration::from_secs(10)).unwrap();
    assert_eq!(e, EstimateFile::point(41.0));
}

#[test]
fn malformed_probabilities_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(dir.path(), r#"printf '{"theta_deg": 0.0, "grid_deg": [0.0, 1.0], "probs": [0.25, 0.25]}' > "$2""#);
    let err = invoke_estimator(&cmd, &data("features.json"), &dir.path().join("e.json"), Duration::from_secs(10)).unwrap_err();
    assert!(matches!(err, Error::Estimator(ref m) if m.contains("sum")), "{err}");
}

#[test]
fn failing_and_hanging_estimators_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let fail = script(dir.path(), "echo broken >&2; exit 3");
    let err = invoke_estimator(&fail, &data("features.json"), &dir.path().join("e.json"), Duration::from_secs(10)).unwrap_err();
    assert!(err.to_string().contains("broken"), "{err}");

    let hang = script(dir.path(), "sleep 20");
    let start = std::time::Instant::now();
    let err = invoke_estimator(&hang, &data("features.json"), &dir.path().join("e.json"), Duration::from_millis(300)).unwrap_err();
    assert!(err.to_string().contains("timed out"), "{err}");
    assert!(start.elapsed() < Duration::from_secs(10));
}

#[test]
fn client_cleans_up_per_call_files() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(dir.path(), r#"test -s "$1" && printf '{"theta_deg": 3.0, "grid_deg": [3.0], "probs": [1.0]}' > "$2""#);
    let client = EstimatorClient::new(cmd, Duration::from_secs(10)).unwrap();
    let r = read_features(&data("features.json")).unwrap().to_covariance();
    for i in 0..3 {
        assert_eq!(client.estimate(&r, &format!("c{i}")).unwrap().theta_deg, 3.0);
    }
}
