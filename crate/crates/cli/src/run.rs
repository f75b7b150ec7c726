//! Command dispatch. Every command computes all of its tables first and
//! only then writes files, so failed runs leave nothing behind.

use std::path::PathBuf;

use degsl_core::quadrature::DEFAULT_DEGREE;
use degsl_core::{
    assemble_system, build_interval_mesh, build_rectangle_mesh, certify_density, constants_report,
    refine_uniform, run_time_series, solve_eigenpairs, solve_weak, weighted_sobolev_norm,
    AdmissibilityFlags, Mesh, QuadratureRule, ScalarField, SeriesOptions, SliceProblem,
    WeightField,
};

use crate::config::{read_nodal_file, Command, DomainSpec, ParsedExpressions, RunConfig};
use crate::error::CliError;
use crate::expr::{Expr, Vars};
use crate::report::{flag, number, optional, output_path, write_file, Table};

pub const DEFAULT_PREFIX: &str = "degsl";
pub const DEFAULT_EIGENPAIRS: usize = 5;
pub const DEFAULT_CONVERGENCE_LEVELS: usize = 4;
pub const MAX_QUAD_DEGREE: usize = 40;

/// Command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub quad_degree: Option<usize>,
    pub out: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// 0 success, 1 admissibility failure, 2 solver failure in some slice.
    pub status: i32,
    /// One line per command or slice.
    pub summary: Vec<String>,
    pub outputs: Vec<(PathBuf, String)>,
}

/// Computes the command's outputs without touching the filesystem
/// (except for reading a nodal weight file).
pub fn execute(config: &RunConfig, options: &RunOptions) -> Result<RunOutcome, CliError> {
    let parsed = config.validate()?;
    let degree = options
        .quad_degree
        .or(config.quad_degree)
        .unwrap_or(DEFAULT_DEGREE);
    if degree == 0 || degree > MAX_QUAD_DEGREE {
        return Err(CliError::Config(format!(
            "quadrature degree {degree} outside [1, {MAX_QUAD_DEGREE}]"
        )));
    }
    let prefix = options
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| DEFAULT_PREFIX.to_string());
    let ctx = Context {
        config,
        parsed: &parsed,
        prefix,
        degree,
    };
    match config.command {
        Command::Solve => ctx.solve(),
        Command::Eigen => ctx.eigen(),
        Command::Constants => ctx.constants(),
        Command::Certify => ctx.certify(),
        Command::Convergence => ctx.convergence(),
        Command::Timeseries => ctx.timeseries(),
    }
}

/// Executes and writes the output files.
pub fn run(config: &RunConfig, options: &RunOptions) -> Result<RunOutcome, CliError> {
    let outcome = execute(config, options)?;
    for (path, contents) in &outcome.outputs {
        write_file(path, contents)?;
    }
    Ok(outcome)
}

struct Context<'a> {
    config: &'a RunConfig,
    parsed: &'a ParsedExpressions,
    prefix: String,
    degree: usize,
}

pub fn expression_field(expr: &Expr, t: f64) -> ScalarField {
    let e = expr.clone();
    ScalarField::expr(move |p| e.eval_ieee(&Vars::at(p, t)))
}

/// Strict evaluation at every quadrature point. Vertices are skipped:
/// endpoint singularities there are handled by the integrators.
pub fn check_expression(
    field: &str,
    expr: &Expr,
    mesh: &Mesh,
    rule: &QuadratureRule,
    t: f64,
) -> Result<(), CliError> {
    let nv = mesh.dim() + 1;
    let mut point = [0.0; 2];
    for e in 0..mesh.num_elements() {
        for q in 0..rule.len() {
            mesh.map_barycentric(e, &rule.barycentric(q)[..nv], &mut point);
            expr.eval(&Vars::at(&point[..mesh.dim()], t))
                .map_err(|source| CliError::Evaluation {
                    field: field.to_string(),
                    source,
                })?;
        }
    }
    Ok(())
}

fn failure_line(flags: &AdmissibilityFlags) -> String {
    format!("certify: failed {}", flags.failures().join(", "))
}

fn certify_table(flags: &AdmissibilityFlags) -> Table {
    let mut t = Table::new(&["condition", "passed", "value"]);
    t.push(vec![
        "nonnegative".into(),
        flag(flags.nonnegative),
        number(flags.min_sampled),
    ]);
    t.push(vec![
        "l1".into(),
        flag(flags.l1_finite),
        number(flags.l1_norm),
    ]);
    t.push(vec![
        "inverse_square_l1".into(),
        flag(flags.inverse_square.is_finite()),
        number(flags.inverse_square.value),
    ]);
    t
}

type SliceExprs<'a> = (
    f64,
    Option<&'a Expr>,
    &'a Expr,
    Option<&'a Vec<Expr>>,
    Option<&'a Expr>,
);

impl Context<'_> {
    fn rule(&self, mesh: &Mesh) -> QuadratureRule {
        QuadratureRule::for_dim(mesh.dim(), self.degree)
    }

    fn output(&self, name: &str, table: &Table) -> (PathBuf, String) {
        (output_path(&self.prefix, name), table.to_csv())
    }

    fn base_mesh(&self) -> Result<Mesh, CliError> {
        let m = &self.config.mesh.elements;
        let mesh = match self.config.domain {
            DomainSpec::Interval([a, b]) => build_interval_mesh(a, b, m[0]),
            DomainSpec::Rectangle { x, y } => {
                build_rectangle_mesh((x[0], x[1]), (y[0], y[1]), m[0], m[1])
            }
        };
        mesh.map_err(|e| CliError::Config(e.to_string()))
    }

    fn refined(mesh: Mesh, levels: usize) -> Result<Mesh, CliError> {
        (0..levels).try_fold(mesh, |m, _| refine_uniform(&m).map_err(CliError::from))
    }

    /// The mesh for single-mesh commands.
    fn mesh(&self) -> Result<Mesh, CliError> {
        Self::refined(self.base_mesh()?, self.config.mesh.levels.unwrap_or(0))
    }

    fn weight(
        &self,
        expr: Option<&Expr>,
        mesh: &Mesh,
        rule: &QuadratureRule,
        t: f64,
    ) -> Result<WeightField, CliError> {
        if let Some(e) = expr {
            check_expression("weight", e, mesh, rule, t)?;
            return Ok(WeightField::new(expression_field(e, t)));
        }
        let path = self
            .config
            .weight_file
            .as_ref()
            .ok_or_else(|| CliError::Config("no weight given".into()))?;
        let values = read_nodal_file(path, mesh.num_nodes())?;
        Ok(WeightField::new(ScalarField::nodal(mesh, values)?))
    }

    fn scalar(
        &self,
        name: &str,
        expr: &Expr,
        mesh: &Mesh,
        rule: &QuadratureRule,
        t: f64,
    ) -> Result<ScalarField, CliError> {
        check_expression(name, expr, mesh, rule, t)?;
        Ok(expression_field(expr, t))
    }

    /// Certificate gate for the single-weight commands.
    fn gate(&self, n: &WeightField, mesh: &Mesh, rule: &QuadratureRule) -> Option<RunOutcome> {
        let flags = certify_density(n, mesh, rule);
        (!flags.passed()).then(|| RunOutcome {
            status: 1,
            summary: vec![failure_line(&flags)],
            outputs: vec![self.output("certify", &certify_table(&flags))],
        })
    }

    fn solve(&self) -> Result<RunOutcome, CliError> {
        let mesh = self.mesh()?;
        let rule = self.rule(&mesh);
        let n = self.weight(self.parsed.weight.as_ref(), &mesh, &rule, 0.0)?;
        let zeta = self.scalar(
            "rhs",
            self.parsed.rhs.as_ref().expect("validated"),
            &mesh,
            &rule,
            0.0,
        )?;
        if let Some(outcome) = self.gate(&n, &mesh, &rule) {
            return Ok(outcome);
        }
        let system = assemble_system(&mesh, &n, &zeta, &rule)?;
        let sol = solve_weak(&system)?;
        let values = sol.field.nodal_values().expect("nodal solution");
        let mut table = Table::new(if mesh.dim() == 1 {
            &["x", "v"]
        } else {
            &["x", "y", "v"]
        });
        for (i, &v) in values.iter().enumerate() {
            let mut row: Vec<String> = mesh.node(i).iter().map(|&c| number(c)).collect();
            row.push(number(v));
            table.push(row);
        }
        let mut line = format!(
            "solve: nodes={} dofs={} residual={:e}",
            mesh.num_nodes(),
            system.dofs(),
            sol.residual
        );
        if let Some(exact) = &self.parsed.exact {
            check_expression("exact", exact, &mesh, &rule, 0.0)?;
            line.push_str(&format!(
                " l2_error={:e}",
                l2_error(&sol.field, exact, &mesh, &rule)
            ));
        }
        let mut summary = vec![line];
        summary.extend(sol.warnings.iter().map(|w| format!("warning: {w}")));
        Ok(RunOutcome {
            status: 0,
            summary,
            outputs: vec![self.output("solution", &table)],
        })
    }

    fn eigen(&self) -> Result<RunOutcome, CliError> {
        let mesh = self.mesh()?;
        let rule = self.rule(&mesh);
        let n = self.weight(self.parsed.weight.as_ref(), &mesh, &rule, 0.0)?;
        if let Some(outcome) = self.gate(&n, &mesh, &rule) {
            return Ok(outcome);
        }
        let k = self.config.k.unwrap_or(DEFAULT_EIGENPAIRS);
        let system = assemble_system(&mesh, &n, &ScalarField::zero(), &rule)?;
        let seq = solve_eigenpairs(&system, k)?;
        let mut table = Table::new(&["m", "lambda"]);
        for (m, &l) in seq.values.iter().enumerate() {
            table.push(vec![(m + 1).to_string(), number(l)]);
        }
        let worst = seq.residuals.iter().copied().fold(0.0, f64::max);
        Ok(RunOutcome {
            status: 0,
            summary: vec![format!(
                "eigen: k={k} lambda1={:e} max_residual={worst:e}",
                seq.first()
            )],
            outputs: vec![self.output("eigen", &table)],
        })
    }

    fn constants(&self) -> Result<RunOutcome, CliError> {
        let mesh = self.mesh()?;
        let rule = self.rule(&mesh);
        let n = self.weight(self.parsed.weight.as_ref(), &mesh, &rule, 0.0)?;
        let qs = self.config.poincare_q.clone().unwrap_or_else(|| vec![2.0]);
        let report = constants_report(&mesh, &n, &qs, &rule)?;
        let mut table = Table::new(&["quantity", "parameter", "value", "kind"]);
        for p in &report.poincare {
            let kind = if p.sharp { "estimate" } else { "lower_bound" };
            table.push(vec![
                "poincare".into(),
                number(p.q),
                number(p.value),
                kind.into(),
            ]);
        }
        table.push(vec![
            "hardy".into(),
            String::new(),
            number(report.hardy),
            "estimate".into(),
        ]);
        table.push(vec![
            "coercivity".into(),
            String::new(),
            number(report.coercivity),
            "estimate".into(),
        ]);
        table.push(vec![
            "continuity".into(),
            String::new(),
            number(report.continuity),
            "estimate".into(),
        ]);
        table.push(vec![
            "inverse_square_l1".into(),
            number(2.0),
            number(report.inverse_square.value),
            "integral".into(),
        ]);
        table.push(vec![
            "holder_embedding".into(),
            String::new(),
            optional(report.holder_embedding),
            if report.holder_embedding.is_some() {
                "estimate"
            } else {
                "not_applicable"
            }
            .into(),
        ]);
        Ok(RunOutcome {
            status: 0,
            summary: vec![format!(
                "constants: hardy={:e} coercivity={:e} continuity={:e}",
                report.hardy, report.coercivity, report.continuity
            )],
            outputs: vec![self.output("constants", &table)],
        })
    }

    fn certify(&self) -> Result<RunOutcome, CliError> {
        let mesh = self.mesh()?;
        let rule = self.rule(&mesh);
        let n = self.weight(self.parsed.weight.as_ref(), &mesh, &rule, 0.0)?;
        let flags = certify_density(&n, &mesh, &rule);
        let (status, line) = if flags.passed() {
            (
                0,
                format!(
                    "certify: passed (inverse_square_l1={:e})",
                    flags.inverse_square.value
                ),
            )
        } else {
            (1, failure_line(&flags))
        };
        Ok(RunOutcome {
            status,
            summary: vec![line],
            outputs: vec![self.output("certify", &certify_table(&flags))],
        })
    }

    fn convergence(&self) -> Result<RunOutcome, CliError> {
        if self.config.weight_file.is_some() {
            return Err(CliError::Config(
                "convergence studies need a weight expression".into(),
            ));
        }
        let levels = self
            .config
            .mesh
            .levels
            .unwrap_or(DEFAULT_CONVERGENCE_LEVELS);
        if levels == 0 {
            return Err(CliError::Config("`mesh.levels` must be positive".into()));
        }
        let exact = self.parsed.exact.as_ref().expect("validated");
        let weight = self.parsed.weight.as_ref().expect("validated");
        let rhs = self.parsed.rhs.as_ref().expect("validated");
        let mut mesh = self.base_mesh()?;
        let mut rows: Vec<(usize, f64, f64, f64)> = Vec::new();
        for level in 0..levels {
            if level > 0 {
                mesh = refine_uniform(&mesh)?;
            }
            let rule = self.rule(&mesh);
            let n = self.weight(Some(weight), &mesh, &rule, 0.0)?;
            let zeta = self.scalar("rhs", rhs, &mesh, &rule, 0.0)?;
            check_expression("exact", exact, &mesh, &rule, 0.0)?;
            if level == 0 {
                if let Some(outcome) = self.gate(&n, &mesh, &rule) {
                    return Ok(outcome);
                }
            }
            let system = assemble_system(&mesh, &n, &zeta, &rule)?;
            let sol = solve_weak(&system)?;
            let l2 = l2_error(&sol.field, exact, &mesh, &rule);
            let h1 = weighted_h1_error(&sol.field, exact, &n, &mesh, &rule)?;
            rows.push((mesh.num_elements(), mesh.mesh_size(), l2, h1));
        }
        let order = |a: f64, b: f64| (a / b).log2();
        let mut table = Table::new(&[
            "level", "elements", "h", "l2_error", "h1_error", "l2_order", "h1_order",
        ]);
        for (l, &(elements, h, l2, h1)) in rows.iter().enumerate() {
            let (lo, ho) = match l {
                0 => (None, None),
                _ => (
                    Some(order(rows[l - 1].2, l2)),
                    Some(order(rows[l - 1].3, h1)),
                ),
            };
            table.push(vec![
                l.to_string(),
                elements.to_string(),
                number(h),
                number(l2),
                number(h1),
                optional(lo),
                optional(ho),
            ]);
        }
        let last = rows.len() - 1;
        let mut line = format!("convergence: levels={levels} l2_error={:e}", rows[last].2);
        if last > 0 {
            line.push_str(&format!(
                " l2_order={:.4}",
                order(rows[last - 1].2, rows[last].2)
            ));
        }
        Ok(RunOutcome {
            status: 0,
            summary: vec![line],
            outputs: vec![self.output("convergence", &table)],
        })
    }

    fn timeseries(&self) -> Result<RunOutcome, CliError> {
        let mesh = self.mesh()?;
        let rule = self.rule(&mesh);
        let p = self.parsed;
        let specs: Vec<SliceExprs<'_>> = match &self.config.time {
            Some(grid) => (0..grid.count)
                .map(|i| {
                    let t = grid.start + i as f64 * grid.step;
                    (
                        t,
                        p.weight.as_ref(),
                        p.rhs.as_ref().expect("validated"),
                        p.currents.as_ref(),
                        p.internal_force.as_ref(),
                    )
                })
                .collect(),
            None => p
                .slices
                .iter()
                .map(|s| {
                    (
                        s.t,
                        s.weight.as_ref().or(p.weight.as_ref()),
                        s.rhs.as_ref().or(p.rhs.as_ref()).expect("validated"),
                        s.currents.as_ref().or(p.currents.as_ref()),
                        s.internal_force.as_ref().or(p.internal_force.as_ref()),
                    )
                })
                .collect(),
        };
        let mut slices = Vec::with_capacity(specs.len());
        for &(t, weight, rhs, currents, force) in &specs {
            let mut s = SliceProblem::new(
                t,
                self.weight(weight, &mesh, &rule, t)?,
                self.scalar("rhs", rhs, &mesh, &rule, t)?,
            );
            if let Some(cs) = currents {
                s.dj = Some(
                    cs.iter()
                        .map(|c| self.scalar("currents", c, &mesh, &rule, t))
                        .collect::<Result<Vec<_>, _>>()?,
                );
            }
            if let Some(q) = force {
                s.q = Some(self.scalar("internal_force", q, &mesh, &rule, t)?);
            }
            slices.push(s);
        }
        let reports = run_time_series(
            &slices,
            &mesh,
            &SeriesOptions {
                quad_degree: self.degree,
            },
        )?;

        let mut table = Table::new(&[
            "t",
            "nonnegative",
            "l1_finite",
            "inverse_square_finite",
            "solved",
            "lambda1",
            "hardy",
            "force_integral",
            "weizsacker_lhs",
            "weizsacker_rhs",
            "residual",
            "consistency_residual",
        ]);
        let mut summary = Vec::with_capacity(reports.len());
        let mut status = 0;
        for r in &reports {
            let a = &r.admissibility;
            table.push(vec![
                number(r.t),
                flag(a.nonnegative),
                flag(a.l1_finite),
                flag(a.inverse_square.is_finite()),
                flag(r.solved()),
                optional(r.lambda1),
                optional(r.hardy),
                optional(r.force_integral.map(|f| f.value)),
                optional(r.weizsacker.map(|w| w.lhs)),
                optional(r.weizsacker.map(|w| w.rhs)),
                optional(r.solve_residual),
                optional(r.consistency.map(|c| c.residual)),
            ]);
            let line = if !a.passed() {
                status = status.max(1);
                format!(
                    "t={}: inadmissible ({})",
                    number(r.t),
                    a.failures().join(", ")
                )
            } else if let Some(f) = &r.failure {
                status = 2;
                format!("t={}: solver failure: {f}", number(r.t))
            } else {
                let mut line = format!(
                    "t={}: solved lambda1={:e} residual={:e}",
                    number(r.t),
                    r.lambda1.unwrap_or(f64::NAN),
                    r.solve_residual.unwrap_or(f64::NAN)
                );
                if let Some(c) = r.consistency {
                    line.push_str(&format!(
                        " consistency={}",
                        if c.passed { "ok" } else { "violated" }
                    ));
                }
                line
            };
            summary.push(line);
            summary.extend(
                r.warnings
                    .iter()
                    .map(|w| format!("t={}: warning: {w}", number(r.t))),
            );
        }
        Ok(RunOutcome {
            status,
            summary,
            outputs: vec![self.output("series", &table)],
        })
    }
}

/// `‖v − v*‖₂` by quadrature against the exact expression.
pub fn l2_error(v: &ScalarField, exact: &Expr, mesh: &Mesh, rule: &QuadratureRule) -> f64 {
    let nv = mesh.dim() + 1;
    let mut point = [0.0; 2];
    let mut sum = 0.0;
    for e in 0..mesh.num_elements() {
        let scale = mesh.element_measure(e) / rule.reference_measure();
        for q in 0..rule.len() {
            let lam = rule.barycentric(q);
            mesh.map_barycentric(e, &lam[..nv], &mut point);
            let p = &point[..mesh.dim()];
            let d = v.eval_local(mesh, e, &lam[..nv], p) - exact.eval_ieee(&Vars::at(p, 0.0));
            sum += rule.weights()[q] * scale * d * d;
        }
    }
    sum.sqrt()
}

/// `‖v − v*‖_{1,2,n}` with `v*` represented by its interpolant two
/// refinements finer than `v`'s mesh.
pub fn weighted_h1_error(
    v: &ScalarField,
    exact: &Expr,
    n: &WeightField,
    mesh: &Mesh,
    rule: &QuadratureRule,
) -> Result<f64, CliError> {
    let fine = refine_uniform(&refine_uniform(mesh)?)?;
    let mut diff = Vec::with_capacity(fine.num_nodes());
    for i in 0..fine.num_nodes() {
        let x = fine.node(i);
        diff.push(v.evaluate(mesh, x)? - exact.eval_ieee(&Vars::at(x, 0.0)));
    }
    if n.field().is_nodal() {
        return Err(CliError::Config(
            "weighted error needs a weight expression".into(),
        ));
    }
    let diff = ScalarField::nodal(&fine, diff)?;
    Ok(weighted_sobolev_norm(&diff, 2.0, n, &fine, rule)?)
}
