use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use degsl_cli::expr::{BinOp, Func, Var};
use degsl_cli::{parse_expression, Expr, Vars};
use proptest::prelude::*;

fn degsl(dir: &Path, config: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join("run.json");
    std::fs::write(&cfg, config).unwrap();
    let prefix = dir.join("out").join("run");
    let out = Command::new(env!("CARGO_BIN_EXE_degsl"))
        .arg(&cfg)
        .arg("--out")
        .arg(&prefix)
        .args(extra)
        .output()
        .unwrap();
    (out, prefix)
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map(|rd| {
            rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
                .collect()
        })
        .unwrap_or_default();
    names.sort();
    names
}

fn config(body: &str) -> String {
    format!(r#"{{"domain": {{"interval": [0, 1]}}, "mesh": {{"elements": [16]}}, {body}}}"#)
}

#[test]
fn solve_writes_solution_and_residual_line() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = degsl(
        dir.path(),
        &config(
            r#""weight": "1", "rhs": "pi^2*sin(pi*x)", "exact": "sin(pi*x)", "command": "solve""#,
        ),
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.starts_with("solve: nodes=17 dofs=15 residual="),
        "{stdout}"
    );
    assert_eq!(files_in(&dir.path().join("out")), vec!["run_solution.csv"]);
    let csv = std::fs::read_to_string(dir.path().join("out/run_solution.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "x,v");
    assert_eq!(rows.len(), 18);
    assert_eq!(rows[1], "0.0000000000000000e0,0.0000000000000000e0");
    assert!(!csv.contains('\r'));
    let mid: Vec<f64> = rows[9].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(mid[0], 0.5);
    assert!((mid[1] - 1.0).abs() < 1e-2);
}

#[test]
fn certify_names_failed_condition() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = degsl(
        dir.path(),
        &config(r#""weight": "x", "command": "certify""#),
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("n^-2 in L1"));
    let csv = std::fs::read_to_string(dir.path().join("out/run_certify.csv")).unwrap();
    assert!(csv.starts_with("condition,passed,value\nnonnegative,1,"));
    assert!(csv.contains("\ninverse_square_l1,0,inf\n"));
}

#[test]
fn solve_with_inadmissible_weight_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = degsl(
        dir.path(),
        &config(r#""weight": "x - 0.5", "rhs": "1", "command": "solve""#),
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(files_in(&dir.path().join("out")), vec!["run_certify.csv"]);
}

#[test]
fn config_errors_exit_three_without_outputs() {
    let cases = [
        config(r#""weight": "sin(pi*x", "rhs": "1", "command": "solve""#),
        config(r#""weight": "foo(x)", "rhs": "1", "command": "solve""#),
        config(r#""weight": "1", "rhs": "1", "command": "solve", "colour": 3"#),
        config(r#""weight": "1", "rhs": "1", "command": "dance""#),
        config(r#""weight": "1", "rhs": "sqrt(x-2)", "command": "solve""#),
        config(r#""weight": "1", "rhs": "1", "command": "convergence""#),
        "{ not json".to_string(),
    ];
    for cfg in &cases {
        let dir = tempfile::tempdir().unwrap();
        let (out, _) = degsl(dir.path(), cfg, &[]);
        assert_eq!(
            out.status.code(),
            Some(3),
            "{cfg}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!dir.path().join("out").exists(), "{cfg}");
        assert!(!out.stderr.is_empty());
    }
    let dir = tempfile::tempdir().unwrap();
    let missing = Command::new(env!("CARGO_BIN_EXE_degsl"))
        .arg(dir.path().join("absent.json"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn solver_failures_exit_two() {
    for body in [
        r#""weight": "1", "command": "eigen", "k": 40"#,
        r#""weight": "1", "rhs": "1/(x-0.5)", "command": "solve""#,
    ] {
        let dir = tempfile::tempdir().unwrap();
        let (out, _) = degsl(dir.path(), &config(body), &[]);
        assert_eq!(out.status.code(), Some(2), "{body}");
        assert!(!dir.path().join("out").exists());
    }
}

#[test]
fn eigen_and_constants_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (out, prefix) = degsl(
        dir.path(),
        &config(r#""weight": "1", "command": "eigen", "k": 3"#),
        &["--quad-degree", "6"],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(format!("{}_eigen.csv", prefix.display())).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "m,lambda");
    assert_eq!(rows.len(), 4);
    let lambda1: f64 = rows[1].strip_prefix("1,").unwrap().parse().unwrap();
    assert!(
        (lambda1 - std::f64::consts::PI.powi(2)).abs() < 0.1,
        "{lambda1}"
    );

    let (out, prefix) = degsl(
        dir.path(),
        &config(r#""weight": "x^0.4", "command": "constants", "poincare_q": [2, 4]"#),
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(format!("{}_constants.csv", prefix.display())).unwrap();
    assert!(csv.starts_with("quantity,parameter,value,kind\npoincare,2.0000000000000000e0,"));
    assert!(csv.contains(",lower_bound\n"));
    assert!(csv.contains("\nhardy,,"));
}

#[test]
fn nodal_weight_file() {
    let dir = tempfile::tempdir().unwrap();
    let weights: String = (0..17)
        .map(|i| format!("{i} {}\n", 1.0 + i as f64 / 16.0))
        .collect();
    std::fs::write(dir.path().join("n.txt"), weights).unwrap();
    let cfg = config(&format!(
        r#""weight_file": "{}", "command": "certify""#,
        dir.path().join("n.txt").display()
    ));
    let (out, _) = degsl(dir.path(), &cfg, &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn timeseries_from_time_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#""weight": "(1+t)*(1+x)", "rhs": "(1+t)*x", "currents": ["sqrt((1+t)*(1+x))"],
           "command": "timeseries", "time": {"start": 0, "step": 0.5, "count": 4}"#,
    );
    let (out, prefix) = degsl(dir.path(), &cfg, &["--threads", "2"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.contains(": solved")).count(), 4);
    let csv = std::fs::read_to_string(format!("{}_series.csv", prefix.display())).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[3].starts_with("1.0000000000000000e0,1,1,1,1,"));
    // ∫ (1+t)(1+x) / ((1+t)(1+x)) = |Ω|
    let force: f64 = rows[1].split(',').nth(7).unwrap().parse().unwrap();
    assert!((force - 1.0).abs() < 1e-10);
}

#[test]
fn convergence_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"domain": {"rectangle": {"x": [0, 1], "y": [0, 1]}}, "mesh": {"elements": [4, 4], "levels": 3},
            "weight": "1", "rhs": "2*pi^2*sin(pi*x)*sin(pi*y)", "exact": "sin(pi*x)*sin(pi*y)", "command": "convergence"}"#;
    let (out, prefix) = degsl(dir.path(), cfg, &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(format!("{}_convergence.csv", prefix.display())).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(
        rows[0],
        ["level", "elements", "h", "l2_error", "h1_error", "l2_order", "h1_order"]
    );
    assert_eq!(rows[1][5], "");
    let l2_order: f64 = rows[3][5].parse().unwrap();
    let h1_order: f64 = rows[3][6].parse().unwrap();
    assert!((l2_order - 2.0).abs() < 0.3, "{l2_order}");
    assert!((h1_order - 1.0).abs() < 0.3, "{h1_order}");
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0f64..1e6).prop_map(Expr::Num),
        (1e-12f64..1e-3).prop_map(Expr::Num),
        Just(Expr::Pi),
        Just(Expr::Var(Var::X)),
        Just(Expr::Var(Var::Y)),
        Just(Expr::Var(Var::T)),
    ];
    leaf.prop_recursive(5, 48, 3, |inner| {
        let op = prop::sample::select(vec![
            BinOp::Add,
            BinOp::Sub,
            BinOp::Mul,
            BinOp::Div,
            BinOp::Pow,
        ]);
        let func = prop::sample::select(vec![
            Func::Sin,
            Func::Cos,
            Func::Exp,
            Func::Log,
            Func::Sqrt,
            Func::Abs,
        ]);
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::Binary(
                o,
                Box::new(a),
                Box::new(b)
            )),
            (func, inner.clone()).prop_map(|(f, a)| Expr::Call(f, vec![a])),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::Call(Func::Pow, vec![a, b])),
        ]
    })
}

proptest! {
    #[test]
    fn unparse_round_trips(e in expr_strategy()) {
        let text = e.to_string();
        let back = parse_expression(&text).unwrap();
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn commuted_forms_agree(x in -1e3f64..1e3) {
        let a = parse_expression("2*x+1").unwrap();
        let b = parse_expression("1+x*2").unwrap();
        let v = Vars { x, y: 0.0, t: 0.0 };
        prop_assert_eq!(a.eval(&v).unwrap(), b.eval(&v).unwrap());
    }

    #[test]
    fn whitespace_is_insignificant(e in expr_strategy()) {
        let spaced = e.to_string().replace('(', " ( ").replace(')', " ) ");
        prop_assert_eq!(parse_expression(&spaced).unwrap(), e);
    }
}
