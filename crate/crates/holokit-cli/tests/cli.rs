use std::path::Path;
use std::process::Command;

fn holokit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_holokit")).args(args).env("HOLOKIT_THREADS", "1").output().expect("binary runs")
}

fn tmp(name: &str) -> String {
    let d = std::env::temp_dir().join(format!("holokit-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d.to_string_lossy().into_owned()
}

#[test]
fn metric_on_ball_matches_closed_form() {
    let o = holokit(&["metric", "--domain", "ball:2", "--point", "0,0", "--dir", "1,0", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    let k: f64 = col("kobayashi").parse().unwrap();
    assert!((1.0..=1.05).contains(&k), "{k}");
    assert_eq!(col("kobayashi_bound"), "UpperBound");
    assert_eq!(col("closed_form"), "1.0000000000000000e0");
}

#[test]
fn outside_point_exits_2() {
    let o = holokit(&["metric", "--domain", "ball:2", "--point", "2,0", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not inside"));
}

#[test]
fn missing_seed_is_rejected() {
    let o = holokit(&["metric", "--domain", "ball:2", "--point", "0,0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_exhaustion_exits_3() {
    let o = holokit(&["scale", "--domain", "egg:2", "--seq", "normal:dyadic:6:0.1", "--seed", "1", "--budget", "1e-9"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn scale_reports_six_rows_and_the_limit() {
    let dir = tmp("scale");
    let o = holokit(&["scale", "--domain", "preset:egg:2", "--seq", "normal:dyadic:6:0.1", "--seed", "1", "--out", &dir]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(Path::new(&dir).join("scale.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    let js: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(Path::new(&dir).join("scale.json")).unwrap()).unwrap();
    let terms = js["summary"]["limit_polynomial"].as_array().unwrap();
    assert_eq!(terms.len(), 1);
    assert_eq!(terms[0]["z"], serde_json::json!([2, 0]));
    assert!((terms[0]["re"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(js["version"].as_str().unwrap().starts_with('v'));
    assert_eq!(js["config"]["seed"], 1);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tmp("det-a"), tmp("det-b"));
    for dir in [&a, &b] {
        let o = holokit(&["distance", "--domain", "polydisc:2", "--point", "0,0", "--point", "0.5,0.2i", "--seed", "9", "--out", dir]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["distance.csv", "distance.json"] {
        let x = std::fs::read(Path::new(&a).join(f)).unwrap();
        let y = std::fs::read(Path::new(&b).join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn validate_reports_bad_domains() {
    let dir = tmp("validate");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = Path::new(&dir).join("bad.json");
    std::fs::write(&bad, r#"{"n": 1, "class": "Generic", "terms": [{"re": 1, "z": [1], "zbar": [0]}], "base_point": [[0, 0]]}"#).unwrap();
    let o = holokit(&["validate", "--domain", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[1]"));
    let good = holokit(&["validate", "--domain", "thullen_model:2"]);
    assert!(good.status.success());
}
