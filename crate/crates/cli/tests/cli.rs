use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SHORT: &str = r#"
schema_version = 1
name = "short"

[geometry]
carrier_hz = 40e9
baseline_wavelengths = 20.0

[waveform]
sample_rate_hz = 1920.0
duration_s = 3.0
snr_db = 20.0
seed = 4

[[target]]
id = 1
path = { kind = "spiral", range_m = 8.0, bearing_deg = 0.0, range_rate_mps = -0.5, omega_radps = 0.072 }

[[target]]
id = 2
path = { kind = "spiral", range_m = 3.0, bearing_deg = 0.0, range_rate_mps = 0.5, omega_radps = -0.053 }
"#;

fn angvel(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_angvel"));
    cmd.args(args).env_remove("ANGVEL_OUT_DIR");
    if let Some(d) = out_env {
        cmd.env("ANGVEL_OUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_then_process_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), "short.toml", SHORT);
    let out = dir.path().join("out");
    let o = angvel(&["simulate", "--scenario", s(&scn)], Some(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["capture.bin", "capture.json", "truth.csv", "scenario.resolved.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::metadata(out.join("capture.bin")).unwrap().len(), 3 * 1920 * 16);

    let o = angvel(&["process", "--scenario", s(&scn), "--out", s(&out)], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stats: Value = serde_json::from_str(&std::fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    let tracks = stats["tracks"].as_array().unwrap();
    assert_eq!(tracks.len(), 2);
    let mu1 = tracks[0]["smoothed"]["mu_est_radps"].as_f64().unwrap();
    let mu2 = tracks[1]["smoothed"]["mu_est_radps"].as_f64().unwrap();
    assert!((mu1 - 0.072).abs() < 0.02, "{mu1}");
    assert!((mu2 + 0.053).abs() < 0.02, "{mu2}");
    for f in ["track0_estimates.csv", "track1_estimates_smoothed.csv", "association.jsonl", "interferometric_tf.bin"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let est = std::fs::read_to_string(out.join("track0_estimates.csv")).unwrap();
    assert_eq!(est.lines().next().unwrap(), "frame_time_s,f_hz,omega_radps,valid");
}

#[test]
fn known_and_detected_agree_on_separated_targets() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), "short.toml", SHORT);
    let mut mus = Vec::new();
    for mode in ["known", "detected"] {
        let out = dir.path().join(mode);
        let o = angvel(&["eval", "--scenario", s(&scn), "--out", s(&out), "--mode", mode], None);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let stats: Value = serde_json::from_str(&std::fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
        let mut v: Vec<(u64, f64)> = stats["tracks"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| (t["target_id"].as_u64().unwrap(), t["smoothed"]["mu_est_radps"].as_f64().unwrap()))
            .collect();
        v.sort_by_key(|x| x.0);
        mus.push(v);
    }
    for (k, d) in mus[0].iter().zip(&mus[1]) {
        assert_eq!(k.0, d.0);
        assert!((k.1 - d.1).abs() < 0.005, "{k:?} vs {d:?}");
    }
}

#[test]
fn missing_waypoint_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = SHORT.replace(
        r#"path = { kind = "spiral", range_m = 3.0, bearing_deg = 0.0, range_rate_mps = 0.5, omega_radps = -0.053 }"#,
        r#"path = { kind = "waypoints", file = "nowhere.csv" }"#,
    );
    let scn = write_scenario(dir.path(), "bad.toml", &body);
    let o = angvel(&["simulate", "--scenario", s(&scn), "--out", s(&dir.path().join("o"))], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere.csv"));
}

#[test]
fn zero_duration_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), "bad.toml", &SHORT.replace("duration_s = 3.0", "duration_s = 0.0"));
    let o = angvel(&["simulate", "--scenario", s(&scn), "--out", s(&dir.path().join("o"))], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_two() {
    let o = angvel(&["simulate"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = angvel(&["--help"], None);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn oracle_line_counts() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), "short.toml", SHORT);
    let o = angvel(&["oracle", "--scenario", s(&scn), "--t", "1.5"], None);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["full"].as_array().unwrap().len(), 4);
    assert_eq!(v["decomposed"].as_array().unwrap().len(), 2);

    let single = SHORT.split("[[target]]").take(2).collect::<Vec<_>>().join("[[target]]");
    let scn1 = write_scenario(dir.path(), "one.toml", &single);
    let o = angvel(&["oracle", "--scenario", s(&scn1), "--t", "1.5"], None);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["full"], v["decomposed"]);
    let f = v["full"][0]["freq_hz"].as_f64().unwrap();
    assert!((f - 1.44).abs() < 0.01, "{f}");

    let o = angvel(&["oracle", "--scenario", s(&scn), "--t", "99"], None);
    assert!(!o.status.success());
}

#[test]
fn target_free_scene_processes_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let body = SHORT.split("[[target]]").next().unwrap().to_string();
    let scn = write_scenario(dir.path(), "empty.toml", &body);
    let out = dir.path().join("out");
    let o = angvel(&["eval", "--scenario", s(&scn), "--out", s(&out)], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stats: Value = serde_json::from_str(&std::fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    assert!(stats["tracks"].as_array().unwrap().is_empty());
}

#[test]
fn fit_on_a_captured_frame() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), "short.toml", &SHORT.replace("snr_db = 20.0", "snr_db = 40.0"));
    let out = dir.path().join("out");
    assert!(angvel(&["simulate", "--scenario", s(&scn), "--out", s(&out)], None).status.success());
    let cap = out.join("capture.bin");
    let o = angvel(
        &["fit", "--scenario", s(&scn), "--capture", s(&cap), "--t", "1.5", "--out", s(&out)],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    let params = v["fit"]["params"].as_array().unwrap();
    let get = |i: usize, k: &str| params[i][k].as_f64().unwrap();
    // Params are sorted by v: the approaching target comes first.
    assert!((get(0, "v_radial_mps") + 0.5).abs() < 0.02, "{params:?}");
    assert!((get(1, "v_radial_mps") - 0.5).abs() < 0.02, "{params:?}");
    // The self-terms sit 2.5 Hz apart, inside one Hann main lobe, and carry
    // phases the unit-amplitude model does not know; only signs are robust.
    assert!(get(0, "omega_radps") > 0.0 && get(1, "omega_radps") < 0.0, "{params:?}");
    assert_eq!(v["truth"].as_array().unwrap().len(), 2);
}
