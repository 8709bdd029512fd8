use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn psnci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psnci"))
        .args(args)
        .env_remove("PSNCI_THREADS")
        .output()
        .expect("spawn psnci")
}

const FOCK1: &str = r#"{"modes":1,"terms":[{"amp_re":1,"mode1":{"type":"fock","n":1}}]}"#;
const VACUUM: &str = r#"{"modes":1,"terms":[{"amp_re":1,"mode1":{"type":"fock","n":0}}]}"#;

fn bell01() -> String {
    let c = 0.5f64.sqrt();
    format!(
        r#"{{"modes":2,"terms":[
            {{"amp_re":{c},"mode1":{{"type":"fock","n":0}},"mode2":{{"type":"fock","n":1}}}},
            {{"amp_re":{c},"mode1":{{"type":"fock","n":1}},"mode2":{{"type":"fock","n":0}}}}]}}"#
    )
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn dist_fock_one_minimum_is_minus_one_over_pi() {
    let dir = tempfile::tempdir().unwrap();
    let state_file = dir.path().join("fock1.json");
    fs::write(&state_file, FOCK1).unwrap();
    let out = dir.path().join("w.csv");
    let res = psnci(&[
        "dist",
        "--state",
        state_file.to_str().unwrap(),
        "--rep",
        "wigner",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(String::from_utf8_lossy(&res.stdout).starts_with("norm_check 1"));
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["q", "p", "f_total", "f_11"]);
    assert_eq!(rows.len(), 281 * 281);
    let min = rows
        .iter()
        .map(|r| r[2].parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!((min + std::f64::consts::FRAC_1_PI).abs() < 1e-11);
    let config: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("w.csv.config.json")).unwrap())
            .unwrap();
    assert_eq!(config["command"], "dist");
    assert_eq!(config["state"]["terms"][0]["mode1"]["n"], 1);
}

#[test]
fn dist_vacuum_norm_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    let res = psnci(&[
        "dist",
        "--state",
        VACUUM,
        "--rep",
        "husimi",
        "--points",
        "101",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout);
    let norm: f64 = stdout
        .trim()
        .strip_prefix("norm_check ")
        .unwrap()
        .parse()
        .unwrap();
    assert!((norm - 1.0).abs() < 1e-6);
    let (_, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 101 * 101);
}

#[test]
fn dist_two_mode_dumps_factor_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("two.csv");
    let res = psnci(&[
        "dist",
        "--state",
        &bell01(),
        "--points",
        "41",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let (header, rows) = csv_rows(&out);
    assert_eq!(&header[..3], ["mode", "q", "p"]);
    assert_eq!(rows.len(), 2 * 41 * 41);
    let config: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("two.csv.config.json")).unwrap())
            .unwrap();
    let terms = config["factor_products"].as_array().unwrap();
    assert_eq!(terms.len(), 3);
    assert_eq!(terms[0]["term"], "f_11");
}

#[test]
fn malformed_state_is_a_usage_error() {
    assert_eq!(
        psnci(&["dist", "--state", r#"{"modes":1,"terms":["#])
            .status
            .code(),
        Some(2)
    );
    let unknown = r#"{"modes":1,"terms":[{"amp_re":1,"mode1":{"type":"fock","n":0}}],"extra":1}"#;
    assert_eq!(
        psnci(&["indicator", "--state", unknown]).status.code(),
        Some(2)
    );
    assert_eq!(
        psnci(&["dist", "--state", "/nonexistent/state.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        psnci(&["indicator", "--state", VACUUM, "--extent", "-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(psnci(&["bogus"]).status.code(), Some(2));
}

#[test]
fn indicator_reports_delta_and_eta() {
    let res = psnci(&["indicator", "--state", &bell01(), "--rep", "wigner,husimi"]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    let results = report["results"].as_array().unwrap();
    let wigner = &results[0];
    assert_eq!(wigner["rep"], "wigner");
    assert!((wigner["delta"].as_f64().unwrap() - 0.426).abs() < 0.005);
    assert!(results[1]["delta"].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(report["config"]["options"]["coeff_convention"], "sqrt");
}

#[test]
fn indicator_vacuum_eta_is_zero() {
    let res = psnci(&["indicator", "--state", VACUUM, "--rep", "wigner,husimi"]);
    let report: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    for r in report["results"].as_array().unwrap() {
        assert!(r["eta"].as_f64().unwrap().abs() < 1e-12);
    }
}

#[test]
fn tolerance_breach_is_a_numerical_failure() {
    let res = psnci(&[
        "indicator",
        "--state",
        FOCK1,
        "--rep",
        "wigner",
        "--tol",
        "1e-14",
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(!res.stdout.is_empty());
}

#[test]
fn coverage_failure_exits_three() {
    let res = psnci(&[
        "indicator",
        "--state",
        FOCK1,
        "--extent",
        "1.5",
        "--points",
        "31",
    ]);
    assert_eq!(
        res.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
}

#[test]
fn sweep_a_rows_and_bell_maximum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let res = psnci(&[
        "sweep-a",
        "--family",
        "entangled01",
        "--steps",
        "21",
        "--reps",
        "wigner,husimi,rivier",
        "--points",
        "41",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let (header, rows) = csv_rows(&out);
    assert_eq!(
        header,
        [
            "param",
            "rep",
            "delta",
            "eta",
            "entropy",
            "norm_check",
            "err_est"
        ]
    );
    assert_eq!(rows.len(), 21 * 3);
    for rep in ["wigner", "husimi", "rivier"] {
        let eta: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r[1] == rep)
            .map(|r| (r[0].parse().unwrap(), r[3].parse().unwrap()))
            .collect();
        assert_eq!(eta.len(), 21);
        let best = eta
            .iter()
            .copied()
            .fold((0.0, f64::MIN), |b, x| if x.1 > b.1 { x } else { b });
        assert_eq!(best.0, 0.5, "{rep}");
    }
    assert!(rows
        .iter()
        .filter(|r| r[1] == "husimi")
        .all(|r| r[2].is_empty()));
    assert!(dir.path().join("a.csv.config.json").exists());
}

#[test]
fn sweep_r_rows_grouped_by_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let res = psnci(&[
        "sweep-r",
        "--family",
        "psi00r",
        "--a",
        "0.3,0.5,0.7",
        "--rmax",
        "2",
        "--steps",
        "9",
        "--points",
        "121",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let (header, rows) = csv_rows(&out);
    assert_eq!(header.last().unwrap(), "a");
    assert_eq!(rows.len(), 27);
    for group in rows.chunks(9) {
        let eta: Vec<f64> = group.iter().map(|r| r[3].parse().unwrap()).collect();
        assert!(eta[0].abs() < 1e-9);
        assert!(eta.windows(2).all(|w| w[1] >= w[0]));
        assert!(group.iter().all(|r| r[7] == group[0][7]));
    }
}

#[test]
fn zero_steps_is_a_usage_error() {
    assert_eq!(
        psnci(&["sweep-a", "--family", "entangled01", "--steps", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        psnci(&["sweep-r", "--family", "psi00r", "--steps", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        psnci(&["sweep-r", "--family", "psi00r", "--a", "1.5"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let res = psnci(&[
            "sweep-a",
            "--family",
            "entangled12",
            "--a2",
            "0.2,0.5",
            "--points",
            "41",
            "--threads",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success());
        (
            fs::read(&out).unwrap(),
            fs::read(dir.path().join(format!("{name}.config.json"))).unwrap(),
        )
    };
    assert_eq!(run("one.csv"), run("two.csv"));
}

#[test]
fn entropy_of_bell_state() {
    let res = psnci(&["entropy", "--state", &bell01()]);
    let report: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!((report["entropy"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let res = psnci(&["entropy", "--state", &bell01(), "--entropy-base", "e"]);
    let report: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!((report["entropy"].as_f64().unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(
        psnci(&["entropy", "--state", VACUUM]).status.code(),
        Some(2)
    );
}

#[test]
fn validate_passes_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let res = psnci(&[
        "validate",
        "--rep",
        "husimi",
        "--skip-grid-halving",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stdout)
    );
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("PASS husimi positivity"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["report"]["all_passed"], true);
}

#[test]
fn validate_on_coarse_grid_fails() {
    let res = psnci(&["validate", "--points", "16", "--skip-grid-halving"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stdout).contains("FAIL normalization"));
}

#[test]
fn threads_from_environment() {
    let res = Command::new(env!("CARGO_BIN_EXE_psnci"))
        .args(["indicator", "--state", VACUUM, "--rep", "wigner"])
        .env("PSNCI_THREADS", "1")
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report["config"]["options"]["threads"], 1);
    let bad = Command::new(env!("CARGO_BIN_EXE_psnci"))
        .args(["indicator", "--state", VACUUM])
        .env("PSNCI_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
