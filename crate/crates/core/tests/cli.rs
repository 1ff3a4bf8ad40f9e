mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use common::*;
use loadcert::cli::{EXIT_FAIL, EXIT_INPUT, EXIT_NO_CONVERGENCE, EXIT_OK};
use loadcert::{parse_network, parse_operating_point, LoadFlowCase};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(rel)
}

fn run(args: &[&str], out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_loadcert"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    status.status.code().expect("exit code")
}

fn toml_at(path: &Path) -> toml::Value {
    toml::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

struct Paths {
    network: String,
    injections: String,
    operating_point: String,
    zero: String,
}

fn ieee13() -> Paths {
    let s = |p: &str| fixture(p).to_str().unwrap().to_string();
    Paths {
        network: s("ieee13/network.toml"),
        injections: s("ieee13/injections.toml"),
        operating_point: s("ieee13/operating_point.toml"),
        zero: s("ieee13/zero.toml"),
    }
}

#[test]
fn check_with_operating_point_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.toml");
    let p = ieee13();
    let code = run(
        &[
            "check",
            "--network",
            &p.network,
            "--injections",
            &p.injections,
            "--operating-point",
            &p.operating_point,
        ],
        &out,
    );
    assert_eq!(code, EXIT_OK);
    let rep = toml_at(&out);
    assert_eq!(rep["schema_version"].as_integer(), Some(1));
    assert_eq!(rep["theorem_ok"].as_bool(), Some(true));
    assert_eq!(rep["corollary_ok"].as_bool(), Some(false));
    assert!(rep["theorem"]["rho"].as_float().unwrap() > 0.0);
    assert_eq!(rep["prior_detail"].as_array().unwrap().len(), 3);
}

#[test]
fn check_without_operating_point_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.toml");
    let p = ieee13();
    assert_eq!(
        run(
            &[
                "check",
                "--network",
                &p.network,
                "--injections",
                &p.injections
            ],
            &out
        ),
        EXIT_FAIL
    );
    let rep = toml_at(&out);
    assert_eq!(rep["corollary_ok"].as_bool(), Some(false));
    assert!(rep["corollary"]["xi_s"].as_float().unwrap() > 0.25);
    assert!(rep.get("theorem").is_none());
}

#[test]
fn zero_injection_check_has_zero_radius() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.toml");
    let p = ieee13();
    assert_eq!(
        run(
            &["check", "--network", &p.network, "--injections", &p.zero],
            &out
        ),
        EXIT_OK
    );
    assert_eq!(toml_at(&out)["corollary"]["rho"].as_float(), Some(0.0));
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = ieee13();
    for sub in ["check", "solve", "sweep"] {
        let a = dir.path().join(format!("{sub}-a"));
        let b = dir.path().join(format!("{sub}-b"));
        let args = [
            "--network",
            &p.network,
            "--injections",
            &p.injections,
            "--operating-point",
            &p.operating_point,
        ];
        let mut full = vec![sub];
        full.extend(args);
        run(&full, &a);
        run(&full, &b);
        assert_eq!(
            std::fs::read(&a).unwrap(),
            std::fs::read(&b).unwrap(),
            "{sub}"
        );
    }
}

#[test]
fn zero_injection_solve_returns_w() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve.toml");
    let p = ieee13();
    assert_eq!(
        run(
            &["solve", "--network", &p.network, "--injections", &p.zero],
            &out
        ),
        EXIT_OK
    );
    let net = parse_network(&std::fs::read_to_string(&p.network).unwrap()).unwrap();
    let op = parse_operating_point(&std::fs::read_to_string(&out).unwrap(), &net).unwrap();
    let case = LoadFlowCase::new(net).unwrap();
    assert!(inf_dist(&op.v, case.zero_load().as_slice()) < 1e-15);
}

#[test]
fn single_bus_solve_matches_quadratic_formula() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve.toml");
    let net_path = fixture("single_bus/network.toml");
    let inj_path = fixture("single_bus/injections.toml");
    let code = run(
        &[
            "solve",
            "--network",
            net_path.to_str().unwrap(),
            "--injections",
            inj_path.to_str().unwrap(),
            "--tol",
            "1e-14",
        ],
        &out,
    );
    assert_eq!(code, EXIT_OK);
    let rep = toml_at(&out);
    assert_eq!(rep["solve"]["contained_in_d"].as_bool(), Some(true));
    let bus = &rep["buses"][0];
    let v = c(
        bus["v_re"].as_float().unwrap(),
        bus["v_im"].as_float().unwrap(),
    );
    assert!((v - scalar_oracle(c(2.0, -6.0), c(1.0, 0.0), c(-0.8, -0.3))).norm() < 1e-10);
}

#[test]
fn solve_report_is_a_valid_operating_point() {
    let dir = tempfile::tempdir().unwrap();
    let p = ieee13();
    let solved = dir.path().join("solve.toml");
    let check = dir.path().join("check.toml");
    assert_eq!(
        run(
            &[
                "solve",
                "--network",
                &p.network,
                "--injections",
                &p.injections
            ],
            &solved
        ),
        EXIT_OK
    );
    let code = run(
        &[
            "check",
            "--network",
            &p.network,
            "--injections",
            &p.injections,
            "--operating-point",
            solved.to_str().unwrap(),
        ],
        &check,
    );
    assert_eq!(code, EXIT_OK);
    // s = s_hat gives a zero-radius ball around the operating point
    let rep = toml_at(&check);
    assert_eq!(rep["theorem"]["xi_delta_s"].as_float(), Some(0.0));
    assert!(rep["theorem"]["rho"].as_float().unwrap().abs() < 1e-12);
}

#[test]
fn non_convergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve.toml");
    let p = ieee13();
    let code = run(
        &[
            "solve",
            "--network",
            &p.network,
            "--injections",
            &p.injections,
            "--max-iter",
            "2",
        ],
        &out,
    );
    assert_eq!(code, EXIT_NO_CONVERGENCE);
    assert_eq!(toml_at(&out)["solve"]["converged"].as_bool(), Some(false));
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let p = ieee13();
    assert_eq!(
        run(
            &[
                "check",
                "--network",
                "/nonexistent.toml",
                "--injections",
                &p.injections
            ],
            &out
        ),
        EXIT_INPUT
    );
    assert_eq!(run(&["check", "--network", &p.network], &out), EXIT_INPUT);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[[injections]]\nbus = \"nowhere\"\np_mw = 1.0\n").unwrap();
    assert_eq!(
        run(
            &[
                "check",
                "--network",
                &p.network,
                "--injections",
                bad.to_str().unwrap()
            ],
            &out
        ),
        EXIT_INPUT
    );
    // an operating point whose voltages do not solve the equations
    let text = std::fs::read_to_string(&p.operating_point)
        .unwrap()
        .replacen("v_re = 1.", "v_re = 0.9", 1);
    let wrong = dir.path().join("wrong.toml");
    std::fs::write(&wrong, text).unwrap();
    let code = run(
        &[
            "check",
            "--network",
            &p.network,
            "--injections",
            &p.injections,
            "--operating-point",
            wrong.to_str().unwrap(),
        ],
        &out,
    );
    if cfg!(debug_assertions) {
        assert_eq!(code, EXIT_INPUT);
        assert!(!out.exists());
    } else {
        assert!(code == EXIT_OK || code == EXIT_FAIL);
    }
}

#[test]
fn sweep_table_is_monotone_and_nested() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let p = ieee13();
    let code = run(
        &[
            "sweep",
            "--network",
            &p.network,
            "--injections",
            &p.injections,
            "--operating-point",
            &p.operating_point,
        ],
        &out,
    );
    assert_eq!(code, EXIT_OK);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("kappa,theorem,corollary,improved,prior,fp_converged")
    );
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 512);
    let col = |k: usize| rows.iter().map(|r| r[k] == "true").collect::<Vec<_>>();
    let (theorem, corollary, improved, prior) = (col(1), col(2), col(3), col(4));
    use loadcert::continuation::{is_nested, is_prefix_true};
    assert!(is_prefix_true(&corollary) && is_prefix_true(&improved) && is_prefix_true(&prior));
    assert!(is_nested(&prior, &improved) && is_nested(&improved, &corollary));
    assert!(theorem.iter().any(|&t| t));
}

#[test]
fn tiny_sweep_passes_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let p = ieee13();
    let code = run(
        &[
            "sweep",
            "--network",
            &p.network,
            "--injections",
            &p.injections,
            "--steps",
            "2",
            "--kappa-max",
            "1e-6",
        ],
        &out,
    );
    assert_eq!(code, EXIT_OK);
    let text = std::fs::read_to_string(&out).unwrap();
    for line in text.lines().skip(1) {
        assert!(line.ends_with(",,true,true,true,true"), "{line}");
    }
}

#[test]
fn dump_matrix_lists_every_entry() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("y.txt");
    let net_path = fixture("single_bus/network.toml");
    assert_eq!(
        run(
            &["dump-matrix", "--network", net_path.to_str().unwrap()],
            &out
        ),
        EXIT_OK
    );
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "row col re im");
    assert_eq!(lines.len(), 5);
    let first: Vec<f64> = lines[1]
        .split(' ')
        .skip(2)
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(first, vec![2.0, -6.0]);
}
