//! Time-sliced problems: for each slice certify the density, solve
//! `−∇·(n_t∇v_t) = ζ_t` and compute the force-integral and Weizsäcker
//! diagnostics. Slices never share state, so they run in parallel and the
//! reports come back in input order.

use rayon::prelude::*;

use crate::assembly::assemble_system;
use crate::eigen::solve_eigenpairs;
use crate::error::{Error, Result};
use crate::field::{AdmissibilityRecord, ScalarField, WeightField};
use crate::mesh::Mesh;
use crate::norms::{
    check_inverse_integrability, force_integral, lp_norm, weizsacker_term, ForceIntegral,
    IntegrabilityReport, WeizsackerTerm,
};
use crate::quadrature::{QuadratureRule, DEFAULT_DEGREE};
use crate::singular::{integrate_scalar, SingularPolicy};
use crate::solve::solve_weak;

/// Relative tolerance for `ζ = q − ∂²ₜn` at the nodes.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-8;

/// Membership in `{n ≥ 0, n ∈ L¹, n⁻² ∈ L¹}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityFlags {
    pub nonnegative: bool,
    pub min_sampled: f64,
    pub l1_norm: f64,
    pub l1_finite: bool,
    pub inverse_square: IntegrabilityReport,
}

impl AdmissibilityFlags {
    pub fn passed(&self) -> bool {
        self.nonnegative && self.l1_finite && self.inverse_square.is_finite()
    }

    /// Names of the failed conditions.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.nonnegative {
            out.push("n >= 0");
        }
        if !self.l1_finite {
            out.push("n in L1");
        }
        if !self.inverse_square.is_finite() {
            out.push("n^-2 in L1");
        }
        out
    }
}

pub fn certify_density(n: &WeightField, mesh: &Mesh, rule: &QuadratureRule) -> AdmissibilityFlags {
    let nv = mesh.dim() + 1;
    let dim = mesh.dim();
    let mut min_sampled = f64::INFINITY;
    let mut point = [0.0; 2];
    for e in 0..mesh.num_elements() {
        for q in 0..rule.len() {
            let lam = rule.barycentric(q);
            mesh.map_barycentric(e, &lam[..nv], &mut point);
            let v = n.eval_local(mesh, e, &lam[..nv], &point[..dim]);
            min_sampled = if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                min_sampled.min(v)
            };
        }
    }
    if let Ok(nodal) = n.field().nodal_on(mesh) {
        for v in nodal.into_iter().filter(|v| !v.is_nan()) {
            min_sampled = min_sampled.min(v);
        }
    }
    let nonnegative = min_sampled >= 0.0;
    let l1 = integrate_scalar(
        mesh,
        rule,
        &SingularPolicy::default(),
        |e, lam, x| !n.eval_local(mesh, e, lam, x).is_finite(),
        |e, lam, x| n.eval_local(mesh, e, lam, x).abs(),
    );
    let inverse_square = if nonnegative {
        check_inverse_integrability(n, 2.0, mesh, rule)
    } else {
        IntegrabilityReport {
            s: 2.0,
            value: f64::INFINITY,
            divergent: true,
            method: crate::singular::IntegrationMethod::Plain,
            estimated_error: f64::INFINITY,
        }
    };
    AdmissibilityFlags {
        nonnegative,
        min_sampled,
        l1_norm: l1.value,
        l1_finite: !l1.divergent && l1.value.is_finite(),
        inverse_square,
    }
}

/// Nodal central difference `(n_prev − 2 n_curr + n_next)/dt²`.
pub fn second_time_difference(
    prev: &WeightField,
    curr: &WeightField,
    next: &WeightField,
    dt: f64,
    mesh: &Mesh,
) -> Result<ScalarField> {
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let a = prev.field().nodal_on(mesh)?;
    let b = curr.field().nodal_on(mesh)?;
    let c = next.field().nodal_on(mesh)?;
    let inv = 1.0 / (dt * dt);
    ScalarField::nodal(
        mesh,
        (0..a.len())
            .map(|i| (a[i] - 2.0 * b[i] + c[i]) * inv)
            .collect(),
    )
}

#[derive(Debug, Clone)]
pub struct SliceProblem {
    pub t: f64,
    pub n: WeightField,
    pub zeta: ScalarField,
    /// Components of `∂ₜj`.
    pub dj: Option<Vec<ScalarField>>,
    /// Divergence of the internal forces, supplied as data.
    pub q: Option<ScalarField>,
}

impl SliceProblem {
    pub fn new(t: f64, n: WeightField, zeta: ScalarField) -> SliceProblem {
        SliceProblem {
            t,
            n,
            zeta,
            dj: None,
            q: None,
        }
    }
}

/// Check of `ζ = q − ∂²ₜn` at the nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyCheck {
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct SliceReport {
    pub t: f64,
    pub admissibility: AdmissibilityFlags,
    /// Nodal solution; present only for admissible slices that solved.
    pub solution: Option<Vec<f64>>,
    pub lambda1: Option<f64>,
    pub hardy: Option<f64>,
    pub force_integral: Option<ForceIntegral>,
    pub weizsacker: Option<WeizsackerTerm>,
    pub solve_residual: Option<f64>,
    pub consistency: Option<ConsistencyCheck>,
    /// Solver or diagnostic error for an admissible slice.
    pub failure: Option<String>,
    pub warnings: Vec<String>,
}

impl SliceReport {
    pub fn solved(&self) -> bool {
        self.solution.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub quad_degree: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            quad_degree: DEFAULT_DEGREE,
        }
    }
}

pub fn run_time_series(
    slices: &[SliceProblem],
    mesh: &Mesh,
    options: &SeriesOptions,
) -> Result<Vec<SliceReport>> {
    if slices.is_empty() {
        return Err(Error::EmptySeries);
    }
    let rule = QuadratureRule::for_dim(mesh.dim(), options.quad_degree);
    let neighbours = time_neighbours(slices);
    Ok((0..slices.len())
        .into_par_iter()
        .map(|i| run_slice(slices, i, neighbours[i], mesh, &rule))
        .collect())
}

/// For each slice, the slices at `t − dt` and `t + dt` on a uniform time
/// grid (by time, not by input position), with `dt`.
fn time_neighbours(slices: &[SliceProblem]) -> Vec<Option<(usize, usize, f64)>> {
    let mut order: Vec<usize> = (0..slices.len()).collect();
    order.sort_by(|&a, &b| slices[a].t.total_cmp(&slices[b].t));
    let mut out = vec![None; slices.len()];
    if order.len() < 3 {
        return out;
    }
    let dt = slices[order[1]].t - slices[order[0]].t;
    let uniform = dt > 0.0
        && order
            .windows(2)
            .all(|w| ((slices[w[1]].t - slices[w[0]].t) - dt).abs() <= 1e-9 * dt.abs().max(1.0));
    if !uniform {
        return out;
    }
    for w in order.windows(3) {
        out[w[1]] = Some((w[0], w[2], dt));
    }
    out
}

fn run_slice(
    slices: &[SliceProblem],
    i: usize,
    neighbours: Option<(usize, usize, f64)>,
    mesh: &Mesh,
    rule: &QuadratureRule,
) -> SliceReport {
    let s = &slices[i];
    let admissibility = certify_density(&s.n, mesh, rule);
    let mut report = SliceReport {
        t: s.t,
        admissibility,
        solution: None,
        lambda1: None,
        hardy: None,
        force_integral: None,
        weizsacker: None,
        solve_residual: None,
        consistency: None,
        failure: None,
        warnings: Vec::new(),
    };
    if let (Some(q), Some((p, n, dt))) = (&s.q, neighbours) {
        report.consistency = consistency(s, q, &slices[p].n, &slices[n].n, dt, mesh, rule).ok();
    }
    if !report.admissibility.passed() {
        return report;
    }
    let n = s.n.clone().with_admissibility(AdmissibilityRecord {
        l1_norm: report.admissibility.l1_norm,
        inverse_square: report.admissibility.inverse_square,
    });
    let solved = assemble_system(mesh, &n, &s.zeta, rule).and_then(|system| {
        let sol = solve_weak(&system)?;
        let lambda1 = solve_eigenpairs(&system, 1)?.first();
        Ok((sol, lambda1))
    });
    match solved {
        Ok((sol, lambda1)) => {
            report.solve_residual = Some(sol.residual);
            report.warnings.extend(sol.warnings);
            report.solution = sol.field.nodal_values().map(<[f64]>::to_vec);
            report.lambda1 = Some(lambda1);
            report.hardy = Some(1.0 / lambda1.sqrt());
        }
        Err(e) => report.failure = Some(e.to_string()),
    }
    if let Some(dj) = &s.dj {
        match force_integral(dj, &n, mesh, rule) {
            Ok(f) => report.force_integral = Some(f),
            Err(e) => report.warnings.push(format!("force integral: {e}")),
        }
    }
    match weizsacker_term(&n, mesh, rule) {
        Ok(w) => report.weizsacker = Some(w),
        Err(e) => report.warnings.push(format!("weizsacker term: {e}")),
    }
    report
}

fn consistency(
    s: &SliceProblem,
    q: &ScalarField,
    prev: &WeightField,
    next: &WeightField,
    dt: f64,
    mesh: &Mesh,
    rule: &QuadratureRule,
) -> Result<ConsistencyCheck> {
    let d2n = second_time_difference(prev, &s.n, next, dt, mesh)?;
    let d2n = d2n.nodal_values().expect("nodal");
    let zeta = s.zeta.nodal_on(mesh)?;
    let qv = q.nodal_on(mesh)?;
    let r: Vec<f64> = (0..zeta.len())
        .map(|i| zeta[i] - (qv[i] - d2n[i]))
        .collect();
    let rn = lp_norm(&ScalarField::nodal(mesh, r)?, 2.0, mesh, rule)?;
    let zn = lp_norm(&ScalarField::nodal(mesh, zeta)?, 2.0, mesh, rule)?;
    let qn = lp_norm(&ScalarField::nodal(mesh, qv)?, 2.0, mesh, rule)?;
    let residual = rn / zn.max(qn).max(f64::MIN_POSITIVE);
    Ok(ConsistencyCheck {
        residual,
        passed: residual <= CONSISTENCY_TOLERANCE,
    })
}
