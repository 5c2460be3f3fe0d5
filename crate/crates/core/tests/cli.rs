use ccdist::cli::run;
use serde_json::Value;
use std::f64::consts::PI;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv: Vec<String> = std::iter::once("ccdist").chain(args.iter().copied()).map(String::from).collect();
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn distance_reports_manifest_and_result() {
    let (code, out, _) = call(&["distance", "--group", "heisenberg", "--point", "1,0;0.39269908169872414"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["manifest"]["command"], "distance");
    assert!(v["manifest"]["group_digest"].as_str().unwrap().len() == 16);
    let d2 = v["result"]["d2"].as_f64().unwrap();
    assert!((d2 - PI * PI / 4.0).abs() < 1e-9);
}

#[test]
fn output_is_deterministic_apart_from_timing() {
    let strip = |s: &str| {
        let mut v = json(s);
        v["manifest"]["wall_time_s"] = Value::Null;
        v
    };
    let args = ["distance", "--group", "n32", "--point", "0.2,-0.5,0.7;0.4,0.1,-0.6", "--seed", "3"];
    let (_, a, _) = call(&args);
    let (_, b, _) = call(&args);
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn level_cap_exits_with_a_bracket() {
    let (code, out, _) = call(&["distance", "--group", "heisenberg", "--point", "0,0;1", "--max-k", "0"]);
    assert_eq!(code, 3);
    let v = json(&out);
    assert!(v["result"]["lower"].as_f64().unwrap() <= 4.0 * PI * (1.0 + 1e-9));
    assert!(v["result"]["upper"].as_f64().unwrap() >= 4.0 * PI * (1.0 - 1e-9));
}

#[test]
fn input_errors_exit_with_one() {
    let (code, _, err) = call(&["distance", "--group", "nonexistent", "--point", "0,0;1"]);
    assert_eq!(code, 1);
    assert!(!err.is_empty());
    let (code, _, _) = call(&["distance", "--group", "heisenberg", "--point", "0,0"]);
    assert_eq!(code, 1);
    let (code, _, _) = call(&["distance", "--group", "heisenberg", "--point", "0,0,0;1"]);
    assert_eq!(code, 1);
    let (code, _, _) = call(&["frobnicate"]);
    assert_eq!(code, 1);
    let (code, _, err) = call(&["verify", "nonsense"]);
    assert_eq!(code, 1);
    assert!(err.contains("bessel"), "{err}");
}

#[test]
fn malformed_group_file_reports_location() {
    let path = std::env::temp_dir().join(format!("ccdist-bad-{}.json", std::process::id()));
    std::fs::write(&path, "{\"q\": 2,\n \"m\": }").unwrap();
    let (code, _, err) = call(&["distance", "--group", path.to_str().unwrap(), "--point", "0,0;1"]);
    std::fs::remove_file(&path).ok();
    assert_eq!(code, 1);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn csv_outputs_carry_a_manifest_line() {
    let (code, out, _) = call(&["bessel", "zeros", "--k-max", "1", "--count", "2"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("# "));
    assert_eq!(json(&lines[0][2..])["schema"], 1);
    assert_eq!(lines[1], "k,l,zero");
    assert_eq!(lines.len(), 2 + 4);
    let z: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
    assert!((z - PI).abs() < 1e-12);
}

#[test]
fn empty_sweep_grid_prints_only_the_header() {
    let (code, out, _) = call(&["sweep", "--group", "heisenberg", "--grid", "0:1:0;0;0"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1], "x1,x2,t1,d2,k_used,lower,upper,error");
}

#[test]
fn sweep_over_a_grid() {
    let (code, out, _) = call(&["sweep", "--group", "heisenberg", "--grid", "0:1:3;0;0.1"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 2 + 3);
}

#[test]
fn heat_kernel_at_the_origin() {
    let (code, out, _) = call(&["heat", "--group", "heisenberg", "--point", "0,0;0", "--h", "1"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!((v["result"]["value"].as_f64().unwrap() - 1.0 / 16.0).abs() < 1e-10);
    let (code, _, _) = call(&["heat", "--group", "heisenberg", "--point", "0,0;0", "--h", "-1"]);
    assert_eq!(code, 1);
}

#[test]
fn bessel_eval_and_cutlocus() {
    let (code, out, _) = call(&["bessel", "eval", "--k", "0", "--w", "-1"]);
    assert_eq!(code, 0);
    assert!(json(&out)["result"].is_object());
    let (code, out, _) = call(&["cutlocus", "--group", "heisenberg", "--point", "0,0;-1"]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["result"]["verdict"], "Cut");
}
