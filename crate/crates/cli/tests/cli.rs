use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_projprolong"))
}

fn spec(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(format!("{name}.json"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("projprolong-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn report(args: &[&str], name: &str) -> (i32, serde_json::Value) {
    let path = tmp(name);
    let mut all = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    all.extend(["--json", &p]);
    let (code, _, err) = run(&all);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("no report: {err}"));
    (code, serde_json::from_str(&text).unwrap())
}

#[test]
fn flat_check_all_passes() {
    for name in ["flat2", "flat3"] {
        let s = spec(name);
        let (code, r) = report(&["check", "--suite", "all", "--spec", s.to_str().unwrap()], &format!("{name}.json"));
        assert_eq!(code, 0, "{r}");
        assert_eq!(r["status"], "pass");
        assert!(r["checks"].as_array().unwrap().iter().all(|c| c["residual"] == 0.0), "rational flat residuals must be exact zeros");
    }
}

#[test]
fn sphere_duality_passes() {
    let s = spec("sphere2");
    let (code, r) = report(&["check", "--suite", "duality", "--spec", s.to_str().unwrap()], "duality.json");
    assert_eq!(code, 0);
    for c in r["checks"].as_array().unwrap() {
        assert!(c["residual"].as_f64().unwrap() < 1e-10);
    }
}

#[test]
fn non_einstein_connections_differ() {
    let s = spec("nonEinstein3");
    let (code, r) = report(&["check", "--suite", "einstein", "--spec", s.to_str().unwrap()], "einstein.json");
    assert_eq!(code, 0);
    assert_eq!(r["data"]["connections_differ"], true);
    assert!(r["data"]["obstruction_max"].as_f64().unwrap() > 1e-3);
}

#[test]
fn exit_code_matches_status() {
    // the Cotton tensor is not invariant where the Weyl tensor is nonzero
    let s = spec("nonEinstein3");
    let (code, r) = report(&["check", "--suite", "invariance", "--spec", s.to_str().unwrap()], "invariance.json");
    assert_eq!(code, 1);
    assert_eq!(r["status"], "fail");
    let (code, r) = report(&["check", "--suite", "invariance", "--spec", s.to_str().unwrap(), "--tol", "cotton_invariance=1"], "loose.json");
    assert_eq!(code, 0);
    assert_eq!(r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "cotton_invariance").unwrap()["threshold"], 1.0);
}

#[test]
fn reports_are_byte_identical() {
    let s = spec("sphere2");
    let args = ["transport", "--spec", s.to_str().unwrap(), "--bundle", "cotractor", "--seed", "3"];
    let (a, b) = (tmp("a.json"), tmp("b.json"));
    for p in [&a, &b] {
        let mut all = args.to_vec();
        all.extend(["--json", p.to_str().unwrap()]);
        assert_eq!(run(&all).0, 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn curvature_on_sphere3() {
    let s = spec("sphere3");
    let (code, r) = report(&["curvature", "--spec", s.to_str().unwrap(), "--point", "0.1,-0.2,0.3"], "curv.json");
    assert_eq!(code, 0);
    let scalar = r["data"]["points"][0]["scalar"]["components"][0].as_f64().unwrap();
    assert!((scalar - 6.0).abs() < 1e-8);
}

#[test]
fn flat_curvature_is_zero() {
    let s = spec("flat3");
    let (code, r) = report(&["curvature", "--spec", s.to_str().unwrap()], "flat.json");
    assert_eq!(code, 0);
    let riemann = &r["data"]["points"][0]["riemann"]["components"];
    assert!(riemann.as_array().unwrap().iter().all(|v| v.as_str() == Some("0") || v.as_f64() == Some(0.0)), "{riemann}");
}

#[test]
fn sphere_tractor_loop_is_identity() {
    let s = spec("sphere2");
    let (code, r) = report(&["transport", "--spec", s.to_str().unwrap(), "--curve", "rect:0.1,0.1:0,1:0.5,0.4", "--loop"], "loop.json");
    assert_eq!(code, 0);
    assert!(r["checks"][1]["residual"].as_f64().unwrap() < 1e-6);
    let orders = r["data"]["observed_orders"].as_array().unwrap();
    assert!((orders.last().unwrap().as_f64().unwrap() - 4.0).abs() < 0.5);
}

#[test]
fn input_errors_exit_2() {
    let sphere = spec("sphere2");
    let s = sphere.to_str().unwrap();
    let asym = tmp("asym.json");
    std::fs::write(&asym, r#"{"dim":2,"metric":[["1","x0"],["0","1"]],"box":[[-1,1],[-1,1]]}"#).unwrap();
    let no_phi = tmp("nophi.json");
    std::fs::write(&no_phi, r#"{"dim":2,"metric":[["1","0"],["0","1"]],"box":[[-1,1],[-1,1]]}"#).unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["check", "--spec", asym.to_str().unwrap()],
        vec!["check", "--suite", "invariance", "--spec", no_phi.to_str().unwrap()],
        vec!["check", "--spec", "/nonexistent.json"],
        vec!["check", "--spec", s, "--frobnicate"],
        vec!["transport", "--spec", s, "--curve", "line:0,0:0.5,0.5", "--loop"],
        vec!["transport", "--spec", s, "--curve", "line:0,0:3,0"],
        vec!["transport", "--spec", s, "--bundle", "nonsense"],
        vec!["curvature", "--spec", s, "--point", "0.1"],
        vec!["check", "--spec", s, "--tol", "abc"],
    ];
    for args in cases {
        let (code, _, err) = run(&args);
        assert_eq!(code, 2, "{args:?}: {err}");
        assert!(!err.is_empty());
    }
    let (_, _, err) = run(&["check", "--spec", asym.to_str().unwrap()]);
    assert!(err.contains("not symmetric"), "{err}");
}
