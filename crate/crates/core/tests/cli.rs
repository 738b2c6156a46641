use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use ciregions::optimize::{coordinates, RateTriple};
use ciregions::pmf::JointPmf;
use ciregions::regions::{parse_region_csv, RegionApprox};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ciregions"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn stdout_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json")
}

fn write_matrix(dir: &TempDir, name: &str, rows: &[Vec<f64>]) -> String {
    let pmf = JointPmf::from_matrix(rows).unwrap();
    let path = dir.path().join(name);
    std::fs::write(&path, pmf.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

fn dsbs_file(dir: &TempDir) -> String {
    write_matrix(dir, "dsbs.json", &[vec![0.4, 0.1], vec![0.1, 0.4]])
}

fn text_value(text: &str, key: &str) -> f64 {
    let line = text
        .lines()
        .find(|l| l.starts_with(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no line for {key}"));
    line.split_whitespace().nth(2).unwrap().parse().unwrap()
}

#[test]
fn info_bitot_text() {
    let out = run(&["info", "bitot"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text_value(&text, "I(X;Y)"), 1.0);
    assert_eq!(text_value(&text, "C_GK"), 0.0);
    assert_eq!(text_value(&text, "R_RD-0"), 1.0);
    assert!(text.contains("C_GK = 0.000000000 [exact]"));
    assert!(text.contains("[heuristic-upper]"));
}

#[test]
fn info_json_equal_bits() {
    let dir = TempDir::new().unwrap();
    let path = write_matrix(&dir, "eq.json", &[vec![0.5, 0.0], vec![0.0, 0.5]]);
    let v = stdout_json(&["info", &path, "--format", "json", "--restarts", "4"]);
    assert_eq!(v["C_GK"]["value"].as_f64(), Some(1.0));
    assert_eq!(v["C_GK"]["certified"], "exact");
    assert!(v["R_RD-0"]["value"].as_f64().unwrap().abs() < 1e-12);
    assert!((v["C_Wyner"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v["C_Wyner"]["seed"].as_u64(), Some(0));
    assert!(v["C_Wyner"]["config_hash"].is_string());
}

#[test]
fn bitot_pair_wyner_gap_matches_min_sum() {
    // C_Wyner - I(X;Y) for two bit OTs equals the min-sum value 2
    let info = stdout_json(&[
        "info", "bitot-pair", "--format", "json", "--u-size", "16", "--restarts", "8",
    ]);
    let gap = info["C_Wyner"]["value"].as_f64().unwrap() - info["I(X;Y)"].as_f64().unwrap();
    let bound = stdout_json(&["bound", "bitot-pair", "bitot-pair"]);
    let min_sum = bound["min_sum"]["report"]["value"].as_f64().unwrap();
    assert_eq!(min_sum, 2.0);
    assert!((gap - min_sum).abs() <= 5e-3, "gap {gap}");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let dsbs = dsbs_file(&dir);
    let independent = write_matrix(&dir, "ind.json", &[vec![0.12, 0.28], vec![0.18, 0.42]]);
    let bad_mass = dir.path().join("bad.json");
    std::fs::write(
        &bad_mass,
        r#"{"variables":[{"name":"X","symbols":["0","1"]},{"name":"Y","symbols":["0"]}],
            "entries":[{"idx":[0,0],"p":0.5},{"idx":[1,0],"p":0.499}]}"#,
    )
    .unwrap();

    assert_eq!(code(&["info", "/nonexistent/pmf.json"]), 2);
    assert_eq!(code(&["info", bad_mass.to_str().unwrap()]), 2);
    assert_eq!(code(&["info", "ot:6"]), 2);
    assert_eq!(code(&["info", "nonsense:3"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["info", "bitot", "--no-such-flag"]), 2);
    assert_eq!(code(&["region", &dsbs, "--grid", "0.3"]), 2);
    assert_eq!(code(&["bound", &dsbs, &independent, "--restarts", "4"]), 4);
    assert_eq!(code(&["verify", "theorem1", "--trials", "20"]), 0);
    assert_eq!(code(&["verify", "identities", "--trials", "20"]), 0);
    assert_eq!(code(&["verify", "monotone-steps", "--trials", "100"]), 1);
}

#[test]
fn verify_prints_lines() {
    let out = run(&["verify", "bitot-lemma"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS") || l.starts_with("    ")), "{text}");
    assert!(text.trim_end().ends_with("PASS suite bitot-lemma"));
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let dsbs = dsbs_file(&dir);
    let args = ["region", dsbs.as_str(), "--format", "csv", "--restarts", "6", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let out_path = dir.path().join("region.csv");
    let mut with_out = args.to_vec();
    with_out.extend(["--out", out_path.to_str().unwrap()]);
    let c = run(&with_out);
    assert!(c.status.success());
    assert!(c.stdout.is_empty());
    assert_eq!(std::fs::read(&out_path).unwrap(), a.stdout);
}

fn region_json(path: &str, extra: &[&str]) -> (RegionApprox, f64) {
    let mut args = vec!["region", path, "--format", "json"];
    args.extend(extra);
    let v = stdout_json(&args);
    let region: RegionApprox = serde_json::from_value(v["region"].clone()).unwrap();
    (region, v["max_affine_deviation"].as_f64().unwrap())
}

#[test]
fn region_witnesses_reproduce_points() {
    let dir = TempDir::new().unwrap();
    let path = write_matrix(&dir, "skew.json", &[vec![0.3, 0.0, 0.2], vec![0.1, 0.25, 0.15]]);
    let pmf = JointPmf::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for tag in ["aci", "gw"] {
        let (region, dev) = region_json(&path, &["--tag", tag, "--restarts", "4", "--grid", "0.25"]);
        assert!(dev <= 1e-9);
        assert_eq!(region.scalarizations.len(), 15);
        for p in &region.points {
            let witness = p.witness.as_ref().expect("single-letter point");
            let again = coordinates(&pmf, witness, region.tag).unwrap();
            for i in 0..3 {
                assert!((again.r[i] - p.point.r[i]).abs() <= 1e-9, "{}", p.label);
            }
        }
    }
}

#[test]
fn region_csv_matches_json() {
    let dir = TempDir::new().unwrap();
    let dsbs = dsbs_file(&dir);
    let flags = ["--restarts", "4", "--grid", "0.25"];
    let (region, _) = region_json(&dsbs, &flags);
    let mut args = vec!["region", dsbs.as_str(), "--format", "csv"];
    args.extend(flags);
    let out = run(&args);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("tag,w1,w2,w3,c1,c2,c3,value"));
    let rows = parse_region_csv(&text).unwrap();
    assert_eq!(rows.len(), region.scalarizations.len());
    for (row, s) in rows.iter().zip(&region.scalarizations) {
        let point = &region.points[s.point].point;
        assert_eq!(row.weights, s.weights.get());
        assert_eq!(row.point, point.r);
        assert_eq!(row.value, s.value);
    }
}

#[test]
fn region_with_ot_channel_contains_corner() {
    let (region, dev) = region_json(
        "ot:2",
        &["--inject-paper-channel", "--restarts", "1", "--grid", "1", "--u-size", "2"],
    );
    assert!(dev <= 1e-9);
    let target = RateTriple::new(region.tag, [1.0, 1.0, 0.0]);
    assert!(region.contains_certified(&target).unwrap());
    assert!(region.points.iter().any(|p| p.point.r == [1.0, 1.0, 0.0]));
}

#[test]
fn bound_json_shape() {
    let v = stdout_json(&["bound", "ot:1", "bitot"]);
    for key in ["source", "target", "ww_bound", "aci_bound", "source_intercepts", "target_intercepts"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["aci_bound"]["method"], "region-inclusion");
    assert_eq!(v["ww_bound"]["method"], "intercept");
    // one bit OT from one string-OT pair at L=1: min-sum 1 against the point (1,1,0)
    assert_eq!(v["aci_bound"]["bound"].as_f64(), Some(2.0));
}

#[test]
fn bound_file_source_with_constraint_file() {
    let dir = TempDir::new().unwrap();
    let dsbs = dsbs_file(&dir);
    let constraints = dir.path().join("c.json");
    std::fs::write(&constraints, r#"[{"weights":[1,1,1],"rhs":0.5}]"#).unwrap();
    let v = stdout_json(&[
        "bound",
        &dsbs,
        &dsbs,
        "--constraints",
        constraints.to_str().unwrap(),
        "--restarts",
        "4",
    ]);
    let aci = v["aci_bound"]["bound"].as_f64().unwrap();
    assert!(aci > 0.0 && aci.is_finite());
    let certs = v["aci_bound"]["certificates"].as_array().unwrap();
    assert!(certs.iter().any(|c| c["constraint"]["origin"] != "target RD-0"));
}

#[test]
fn missing_input_file_reports_path() {
    let out = run(&["info", Path::new("/nonexistent/x.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
