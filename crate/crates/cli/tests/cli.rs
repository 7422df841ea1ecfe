use std::process::{Command, Output};

fn superpsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superpsc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn check_report_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep.json");
    let o = superpsc(&["check", "--domain", "ball", "--n", "2", "--samples", "200", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(rep["schema"], "superpsc.check/1");
    assert_eq!(rep["verdict"]["classification"], "strictly_super_psc");
    assert!((rep["verdict"]["margin"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(rep.get("timing").is_none());
    let rows = rep["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 200);
    assert!(rows.iter().all(|r| r["residual"].as_f64().unwrap().abs() <= 1e-10));
}

#[test]
fn expression_matches_builtin_ball() {
    let a = superpsc(&["check", "--domain", "ball", "--n", "2", "--samples", "50"]);
    let b = superpsc(&["check", "--expr", "abs2(z1)+abs2(z2)-1", "--n", "2", "--samples", "50"]);
    let va: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let vb: serde_json::Value = serde_json::from_slice(&b.stdout).unwrap();
    assert_eq!(va["verdict"]["classification"], vb["verdict"]["classification"]);
    let (ma, mb) = (va["verdict"]["margin"].as_f64().unwrap(), vb["verdict"]["margin"].as_f64().unwrap());
    assert!((ma - mb).abs() < 1e-12);
}

#[test]
fn example51_worst_point_is_near_origin() {
    let o = superpsc(&["check", "--domain", "example51", "--samples", "400"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"]["classification"], "not_super_psc");
    let p: Vec<f64> = v["verdict"]["worst_point"]["point"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!(p.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-3);
}

#[test]
fn timing_only_on_request() {
    let o = superpsc(&["check", "--domain", "ball", "--samples", "10", "--timing"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["timing"]["elapsed_ms"].is_u64());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(superpsc(&["check"]).status.code(), Some(1));
    assert_eq!(superpsc(&["check", "--expr", "abs2(z1)-1"]).status.code(), Some(1));
    assert_eq!(superpsc(&["check", "--domain", "nope"]).status.code(), Some(1));
    assert_eq!(superpsc(&["check", "--domain", "ball", "--l2-variant", "other"]).status.code(), Some(1));
    assert_eq!(superpsc(&["check", "--domain", "example52", "--param", "alpha=1.2"]).status.code(), Some(1));
    assert_eq!(superpsc(&["spectrum", "--s", "0.5:1.0:0.1"]).status.code(), Some(1));
    assert_eq!(superpsc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(superpsc(&["--help"]).status.code(), Some(0));
}

#[test]
fn examples_groups() {
    let o = superpsc(&["examples", "--only", "example52"]);
    let text = stdout(&o);
    for name in ["non_convex_witness", "positivity_scan", "parameter_guard"] {
        assert!(text.lines().any(|l| l.starts_with("PASS") && l.contains(name)), "{text}");
    }
    // the region bound of the worked example fails on sampled boundary points
    assert!(text.lines().any(|l| l.starts_with("FAIL") && l.contains("boundary_region")));
    assert_eq!(o.status.code(), Some(3));

    let o = superpsc(&["examples", "--only", "example51"]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    assert_eq!(lines.len(), 6);
    let failed: Vec<&&str> = lines.iter().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0].contains("det_h_rho"));

    let o = superpsc(&["examples", "--only", "fefferman"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn csv_headers() {
    let o = superpsc(&["solve-radial", "--n", "2", "--nodes", "400"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next(), Some("t,f,fp,rho,residual"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("max_error="));

    let o = superpsc(&["spectrum", "--n", "2", "--s", "1.2:1.5:0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,quotient,stderr"));
    assert_eq!(lines.count(), 4);

    let o = superpsc(&["approx", "--domain", "ball", "--rays", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exact"));
}

#[test]
fn approx_slope_table() {
    let o = superpsc(&["approx", "--domain", "ellipsoid", "--a", "2,1", "--rays", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    let uniform: f64 = err
        .split_whitespace()
        .find_map(|w| w.strip_prefix("uniform_slope="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(uniform >= 1.9, "{err}");
    assert_eq!(stdout(&o).lines().count(), 11);
}

#[test]
fn monte_carlo_spectrum_is_seeded() {
    let args = ["spectrum", "--method", "mc", "--domain", "ball", "--s", "2:2:1", "--eps-c", "1e-4", "--samples", "20000", "--seed", "3"];
    let a = superpsc(&args);
    let b = superpsc(&[&["--threads", "2"][..], &args[..]].concat());
    assert_eq!(a.stdout, b.stdout);
}
