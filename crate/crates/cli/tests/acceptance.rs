//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use degsl_core::constants::verify_holder_chain_with;
use degsl_core::{
    assemble_system, build_interval_mesh, build_rectangle_mesh, check_inverse_integrability,
    force_integral, run_time_series, solve_eigenpairs, weighted_sobolev_norm, weizsacker_term,
    Mesh, QuadratureRule, ScalarField, SeriesOptions, SliceProblem, WeightField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Cli {
    dir: tempfile::TempDir,
}

struct CliRun {
    status: i32,
    stdout: String,
    prefix: PathBuf,
}

impl CliRun {
    fn csv(&self, name: &str) -> String {
        let path = PathBuf::from(format!("{}_{name}.csv", self.prefix.display()));
        std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
    }
}

impl Cli {
    fn new() -> Cli {
        Cli {
            dir: tempfile::tempdir().expect("temp dir"),
        }
    }

    fn run(&self, tag: &str, config: &str, extra: &[&str]) -> CliRun {
        let cfg = self.dir.path().join(format!("{tag}.json"));
        std::fs::write(&cfg, config).expect("write config");
        let prefix = self.dir.path().join(tag);
        let out = Command::new(env!("CARGO_BIN_EXE_degsl"))
            .arg(&cfg)
            .arg("--out")
            .arg(&prefix)
            .args(extra)
            .output()
            .expect("run degsl");
        CliRun {
            status: out.status.code().unwrap_or(-1),
            stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
            prefix,
        }
    }
}

fn sci(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Column `name` of a CSV as numbers (empty cells become NaN).
fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let idx = header
        .iter()
        .position(|h| *h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    lines
        .map(|l| {
            l.split(',')
                .nth(idx)
                .unwrap_or("")
                .parse()
                .unwrap_or(f64::NAN)
        })
        .collect()
}

const CONVERGENCE_SMOOTH: &str = r#"{
    "domain": {"interval": [0, 1]},
    "mesh": {"elements": [16], "levels": 4},
    "weight": "1",
    "rhs": "pi^2*sin(pi*x)",
    "exact": "sin(pi*x)",
    "command": "convergence"
}"#;

const CONVERGENCE_DEGENERATE: &str = r#"{
    "domain": {"interval": [0, 1]},
    "mesh": {"elements": [16], "levels": 4},
    "weight": "x^0.4",
    "rhs": "-0.4*pi*x^(-0.6)*cos(pi*x) + pi^2*x^0.4*sin(pi*x)",
    "exact": "sin(pi*x)",
    "command": "convergence"
}"#;

fn criterion_1(cli: &Cli) -> Outcome {
    let run = cli.run("c1", CONVERGENCE_SMOOTH, &[]);
    if run.status != 0 {
        return Err(format!("exit status {}", run.status));
    }
    let csv = run.csv("convergence");
    let elements = column(&csv, "elements");
    let l2 = column(&csv, "l2_error");
    let orders: Vec<f64> = l2.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let monotone = l2.windows(2).all(|w| w[1] < w[0]);
    let last = *orders.last().unwrap();
    let fine = *l2.last().unwrap();
    check(
        elements == [16.0, 32.0, 64.0, 128.0]
            && monotone
            && (last - 2.0).abs() <= 0.2
            && fine < 5e-4,
        format!(
            "L2 errors [{}], orders {orders:.3?}, error at 128 = {fine:.3e}",
            sci(&l2)
        ),
    )
}

fn criterion_2(cli: &Cli) -> Outcome {
    let run = cli.run("c2", CONVERGENCE_DEGENERATE, &[]);
    if run.status != 0 {
        return Err(format!("exit status {}: {}", run.status, run.stdout));
    }
    // exit status 0: every stiffness factorization had positive pivots
    let l2 = column(&run.csv("convergence"), "l2_error");
    check(
        l2.len() == 4 && l2.windows(2).all(|w| w[1] < w[0]),
        format!(
            "L2 errors [{}] over 3 refinements, all factorizations definite",
            sci(&l2)
        ),
    )
}

fn criterion_3() -> Outcome {
    let mesh = build_interval_mesh(0.0, 1.0, 64).unwrap();
    let rule = QuadratureRule::interval(4);
    let report = |alpha: f64| {
        check_inverse_integrability(
            &WeightField::expr(move |x| x[0].powf(alpha)),
            2.0,
            &mesh,
            &rule,
        )
    };
    let mut detail = Vec::new();
    let mut ok = true;
    for alpha in [0.1, 0.3, 0.45] {
        let r = report(alpha);
        let exact = 1.0 / (1.0 - 2.0 * alpha);
        ok &= r.is_finite() && (r.value - exact).abs() / exact < 1e-2;
        detail.push(format!("a={alpha}: {:.6}", r.value));
    }
    let r = report(0.4);
    ok &= r.is_finite() && (r.value - 5.0).abs() / 5.0 < 1e-2;
    detail.push(format!("a=0.4: {:.6}", r.value));
    for alpha in [0.5, 0.6, 1.0] {
        let r = report(alpha);
        ok &= r.divergent;
        detail.push(format!(
            "a={alpha}: {}",
            if r.divergent { "divergent" } else { "finite" }
        ));
    }
    check(ok, detail.join(", "))
}

fn criterion_4() -> Outcome {
    let rule1 = QuadratureRule::interval(4);
    let unit = WeightField::constant(1.0);
    let mesh = build_interval_mesh(0.0, 1.0, 128).unwrap();
    let sys =
        assemble_system(&mesh, &unit, &ScalarField::zero(), &rule1).map_err(|e| e.to_string())?;
    let seq = solve_eigenpairs(&sys, 5).map_err(|e| e.to_string())?;
    let mut ok = seq.values.windows(2).all(|w| w[0] < w[1]);
    let mut worst = 0.0f64;
    for (m, &l) in seq.values.iter().enumerate() {
        let exact = ((m + 1) as f64 * PI).powi(2);
        worst = worst.max((l - exact).abs() / exact);
    }
    ok &= worst < 1e-2;
    let mut ortho = 0.0f64;
    for i in 0..5 {
        let g = sys.mass.matvec(&seq.vectors[i]);
        for j in 0..5 {
            let ip: f64 = seq.vectors[j].iter().zip(&g).map(|(a, b)| a * b).sum();
            ortho = ortho.max((ip - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    ok &= ortho < 1e-8;

    let tiny = build_interval_mesh(0.0, 1.0, 2).unwrap();
    let one =
        assemble_system(&tiny, &unit, &ScalarField::zero(), &rule1).map_err(|e| e.to_string())?;
    let l12 = solve_eigenpairs(&one, 1)
        .map_err(|e| e.to_string())?
        .first();
    ok &= (l12 - 12.0).abs() < 1e-12;

    let square = build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), 32, 32).unwrap();
    let sys2 = assemble_system(
        &square,
        &unit,
        &ScalarField::zero(),
        &QuadratureRule::triangle(4),
    )
    .map_err(|e| e.to_string())?;
    let l2d = solve_eigenpairs(&sys2, 1)
        .map_err(|e| e.to_string())?
        .first();
    let rel2d = (l2d - 2.0 * PI * PI).abs() / (2.0 * PI * PI);
    ok &= rel2d < 2e-2;
    check(
        ok,
        format!(
            "1D max rel err {worst:.2e}, M-orthonormality {ortho:.1e}, 1-DOF {l12}, 2D lambda1 {l2d:.5} (rel {rel2d:.2e})"
        ),
    )
}

fn random_zero_boundary(mesh: &Mesh, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..mesh.num_nodes())
        .map(|i| {
            if mesh.is_boundary(i) {
                0.0
            } else {
                rng.gen_range(-1.0..1.0)
            }
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let mesh = build_interval_mesh(0.0, 1.0, 128).unwrap();
    let rule = QuadratureRule::interval(4);
    let n = WeightField::constant(1.0);
    let sys = assemble_system(&mesh, &n, &ScalarField::zero(), &rule).map_err(|e| e.to_string())?;
    let lambda1 = solve_eigenpairs(&sys, 1)
        .map_err(|e| e.to_string())?
        .first();
    let hardy = 1.0 / lambda1.sqrt();
    let coercivity = lambda1 / (1.0 + lambda1);
    let exact_c = PI * PI / (1.0 + PI * PI);
    let mut ok =
        (hardy - 1.0 / PI).abs() * PI < 1e-2 && (coercivity - exact_c).abs() / exact_c < 1e-2;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let norm = |v: &[f64]| {
        let f = ScalarField::Nodal {
            values: v.to_vec(),
            zero_boundary: true,
        };
        weighted_sobolev_norm(&f, 2.0, &n, &mesh, &rule).unwrap()
    };
    let mut coercive_violations = 0;
    let mut continuity_violations = 0;
    let mut min_slack = f64::INFINITY;
    for i in 0..1000 {
        let u = random_zero_boundary(&mesh, &mut rng);
        let mut v = random_zero_boundary(&mesh, &mut rng);
        if i % 2 == 1 {
            // nearly parallel pairs sit close to equality
            let s = rng.gen_range(-3.0..3.0);
            v.iter_mut()
                .zip(&u)
                .for_each(|(v, u)| *v = s * u + 1e-3 * *v);
        }
        let (ur, vr) = (sys.restrict(&u), sys.restrict(&v));
        let q_uu = sys.stiffness.bilinear(&ur, &ur);
        let nu = norm(&u);
        if q_uu < coercivity * nu * nu * (1.0 - 1e-10) {
            coercive_violations += 1;
        }
        let q_uv = sys.stiffness.bilinear(&ur, &vr);
        let slack = nu * norm(&v) + 1e-10 - q_uv.abs();
        min_slack = min_slack.min(slack);
        if slack < 0.0 {
            continuity_violations += 1;
        }
    }
    ok &= coercive_violations == 0 && continuity_violations == 0;
    check(
        ok,
        format!(
            "hardy {hardy:.6} (1/pi {:.6}), coercivity {coercivity:.6}, violations {coercive_violations}/{continuity_violations}, min continuity slack {min_slack:.3e}",
            1.0 / PI
        ),
    )
}

fn criterion_6() -> Outcome {
    let mesh = build_interval_mesh(0.0, 1.0, 64).unwrap();
    let rule = QuadratureRule::interval(4);
    let weights: [(&str, WeightField); 3] = [
        ("1", WeightField::constant(1.0)),
        ("x^0.4", WeightField::expr(|x| x[0].powf(0.4))),
        (
            "sin^2+0.1",
            WeightField::expr(|x| (PI * x[0]).sin().powi(2) + 0.1),
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, n) in &weights {
        let report = check_inverse_integrability(n, 2.0, &mesh, &rule);
        let mut min_slack = f64::INFINITY;
        let mut failures = 0;
        for _ in 0..500 {
            let u = ScalarField::Nodal {
                values: random_zero_boundary(&mesh, &mut rng),
                zero_boundary: true,
            };
            let c = verify_holder_chain_with(&u, n, &report, &mesh, &rule)
                .map_err(|e| e.to_string())?;
            min_slack = min_slack.min(c.rhs - c.lhs);
            if !c.passed() {
                failures += 1;
            }
        }
        ok &= failures == 0;
        detail.push(format!("{name}: min slack {min_slack:.3e}"));
    }
    check(ok, detail.join(", "))
}

fn criterion_7() -> Outcome {
    let rule = QuadratureRule::interval(4);
    let mesh = build_interval_mesh(0.0, 1.0, 128).unwrap();
    let w = weizsacker_term(
        &WeightField::expr(|x| (PI * x[0]).sin().powi(2)),
        &mesh,
        &rule,
    )
    .map_err(|e| e.to_string())?;
    let exact = PI * PI / 2.0;
    let mut ok = (w.lhs - exact).abs() / exact < 1e-2 && (w.rhs - exact).abs() / exact < 1e-2;
    let coarse = build_interval_mesh(0.0, 1.0, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut not_decreasing = 0;
    for _ in 0..20 {
        let c = rng.gen_range(0.2..2.0);
        let a = rng.gen_range(0.1..1.5);
        let k = rng.gen_range(0.5..3.0);
        let phi = rng.gen_range(0.0..PI);
        let n = WeightField::expr(move |x| c + a * (k * PI * x[0] + phi).sin().powi(2));
        let fine_m = weizsacker_term(&n, &mesh, &rule)
            .map_err(|e| e.to_string())?
            .relative_mismatch();
        let coarse_m = weizsacker_term(&n, &coarse, &rule)
            .map_err(|e| e.to_string())?
            .relative_mismatch();
        worst = worst.max(fine_m);
        if fine_m >= coarse_m {
            not_decreasing += 1;
        }
    }
    ok &= worst < 1e-2 && not_decreasing == 0;
    check(
        ok,
        format!(
            "sin^2: lhs {:.6} rhs {:.6} (pi^2/2 {exact:.6}); random weights: max mismatch {worst:.2e}, non-decreasing {not_decreasing}",
            w.lhs, w.rhs
        ),
    )
}

type ForceCase<'a> = (&'a str, fn(&[f64]) -> f64, &'a Mesh, &'a QuadratureRule);

fn criterion_8() -> Outcome {
    let rule1 = QuadratureRule::interval(4);
    let unit = build_interval_mesh(0.0, 1.0, 64).unwrap();
    let rect = build_rectangle_mesh((0.0, 2.0), (0.0, 1.0), 16, 8).unwrap();
    let rule2 = QuadratureRule::triangle(4);
    let cases: [ForceCase<'_>; 3] = [
        ("x^0.4", |x| x[0].powf(0.4), &unit, &rule1),
        (
            "sin^2+0.1",
            |x| (PI * x[0]).sin().powi(2) + 0.1,
            &unit,
            &rule1,
        ),
        ("1+xy on [0,2]x[0,1]", |x| 1.0 + x[0] * x[1], &rect, &rule2),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for &(name, density, mesh, rule) in &cases {
        let n = WeightField::expr(density);
        let dj = ScalarField::expr(move |x| density(x).sqrt());
        let f = force_integral(&[dj], &n, mesh, rule).map_err(|e| e.to_string())?;
        let area = mesh.domain().measure();
        ok &= !f.divergent && (f.value - area).abs() / area < 1e-2;
        let zero =
            force_integral(&[ScalarField::zero()], &n, mesh, rule).map_err(|e| e.to_string())?;
        ok &= zero.value == 0.0;
        detail.push(format!("{name}: {:.8} vs {area}", f.value));
    }
    check(ok, detail.join(", "))
}

const SERIES_INADMISSIBLE: &str = r#"{
    "domain": {"interval": [0, 1]},
    "mesh": {"elements": [32]},
    "weight": "1+t",
    "rhs": "(1+t)*pi^2*sin(pi*x)",
    "command": "timeseries",
    "slices": [
        {"t": 0.0}, {"t": 0.1}, {"t": 0.2}, {"t": 0.3}, {"t": 0.4},
        {"t": 0.45, "weight": "x"},
        {"t": 0.5}, {"t": 0.6}, {"t": 0.7}, {"t": 0.8}, {"t": 0.9}
    ]
}"#;

fn criterion_9(cli: &Cli) -> Outcome {
    let mesh = build_interval_mesh(0.0, 1.0, 32).unwrap();
    let rule = QuadratureRule::interval(4);
    let slices: Vec<SliceProblem> = (0..10)
        .map(|i| {
            let a = 1.0 + 0.1 * i as f64;
            SliceProblem::new(
                0.1 * i as f64,
                WeightField::constant(a),
                ScalarField::expr(move |x| a * PI * PI * (PI * x[0]).sin()),
            )
        })
        .collect();
    let reports =
        run_time_series(&slices, &mesh, &SeriesOptions::default()).map_err(|e| e.to_string())?;
    let v0 = reports[0].solution.clone().ok_or("first slice unsolved")?;
    let v0f = ScalarField::nodal(&mesh, v0.clone()).unwrap();
    let scale = degsl_core::lp_norm(&v0f, 2.0, &mesh, &rule).unwrap();
    let mut worst = 0.0f64;
    for r in &reports {
        let v = r.solution.as_ref().ok_or("slice unsolved")?;
        let d: Vec<f64> = v.iter().zip(&v0).map(|(a, b)| a - b).collect();
        let diff =
            degsl_core::lp_norm(&ScalarField::nodal(&mesh, d).unwrap(), 2.0, &mesh, &rule).unwrap();
        worst = worst.max(diff / scale);
    }
    let mut ok = worst < 1e-10;

    let run = cli.run("c9", SERIES_INADMISSIBLE, &[]);
    let solved = column(&run.csv("series"), "solved");
    let unsolved = solved.iter().filter(|&&s| s == 0.0).count();
    ok &= run.status == 1 && solved.len() == 11 && unsolved == 1 && solved[5] == 0.0;
    check(
        ok,
        format!("max relative L2 spread of v_t {worst:.2e}; inadmissible series: exit {}, {unsolved} unsolved of {}", run.status, solved.len()),
    )
}

fn criterion_10(cli: &Cli) -> Outcome {
    let configs: [(&str, String, &str); 6] = [
        ("solve", CONVERGENCE_SMOOTH.replace("convergence", "solve"), "solution"),
        ("eigen", r#"{"domain": {"rectangle": {"x": [0, 1], "y": [0, 1]}}, "mesh": {"elements": [24, 24]}, "weight": "1+x*y", "command": "eigen", "k": 4}"#.into(), "eigen"),
        ("constants", r#"{"domain": {"interval": [0, 1]}, "mesh": {"elements": [32]}, "weight": "x^0.4", "command": "constants", "poincare_q": [2, 1.3333333333333333]}"#.into(), "constants"),
        ("certify", r#"{"domain": {"interval": [0, 1]}, "mesh": {"elements": [32]}, "weight": "x", "command": "certify"}"#.into(), "certify"),
        ("convergence", CONVERGENCE_DEGENERATE.into(), "convergence"),
        ("timeseries", SERIES_INADMISSIBLE.replace("\"x\"", "\"sin(pi*x)^2+0.1\""), "series"),
    ];
    let mut differing = Vec::new();
    for (tag, cfg, file) in &configs {
        let a = cli.run(&format!("d_{tag}_a"), cfg, &["--threads", "1"]);
        let b = cli.run(&format!("d_{tag}_b"), cfg, &["--threads", "4"]);
        let c = cli.run(&format!("d_{tag}_c"), cfg, &[]);
        let (x, y, z) = (a.csv(file), b.csv(file), c.csv(file));
        if x != y || x != z || x.is_empty() {
            differing.push(*tag);
        }
    }
    check(
        differing.is_empty(),
        if differing.is_empty() {
            "byte-identical CSVs for solve, eigen, constants, certify, convergence, timeseries (1, 4, default threads)".into()
        } else {
            format!("outputs differ for {differing:?}")
        },
    )
}

type Criterion<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let cli = Cli::new();
    let criteria: Vec<Criterion<'_>> = vec![
        (
            "manufactured-solution convergence",
            Box::new(|| criterion_1(&cli)),
        ),
        ("degenerate-weight solve", Box::new(|| criterion_2(&cli))),
        ("admissibility threshold", Box::new(criterion_3)),
        ("spectrum", Box::new(criterion_4)),
        ("constants chain", Box::new(criterion_5)),
        ("Holder embedding certificate", Box::new(criterion_6)),
        ("Weizsacker identity", Box::new(criterion_7)),
        ("force-integral diagnostic", Box::new(criterion_8)),
        ("time-series behavior", Box::new(|| criterion_9(&cli))),
        ("determinism", Box::new(|| criterion_10(&cli))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS  criterion {:>2} {name} ({secs:.2}s): {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL  criterion {:>2} {name} ({secs:.2}s): {d}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}
