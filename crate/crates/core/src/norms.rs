//! Lebesgue and Sobolev norms, plain and weighted, plus the integrals that
//! divide by the density: `∫ n^-s`, the force integral `∫ |∂ₜj|²/n` and the
//! Weizsäcker term.

use crate::error::{Error, Result};
use crate::field::{ScalarField, WeightField};
use crate::mesh::Mesh;
use crate::quadrature::QuadratureRule;
use crate::singular::{integrate_scalar, IntegrationMethod, SingularPolicy};

pub const MIN_EXPONENT: f64 = 1.0;
pub const MAX_EXPONENT: f64 = 16.0;

fn check_exponent(p: f64) -> Result<()> {
    if (MIN_EXPONENT..=MAX_EXPONENT).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// Sum over elements of `∫_e f`, in element order.
pub(crate) fn integrate_plain<F>(mesh: &Mesh, rule: &QuadratureRule, mut f: F) -> Result<f64>
where
    F: FnMut(usize, &[f64], &[f64]) -> Result<f64>,
{
    let dim = mesh.dim();
    let nv = dim + 1;
    let mut point = [0.0; 2];
    let mut total = 0.0;
    for e in 0..mesh.num_elements() {
        let scale = mesh.element_measure(e) / rule.reference_measure();
        let mut local = 0.0;
        for q in 0..rule.len() {
            let lam = rule.barycentric(q);
            mesh.map_barycentric(e, &lam[..nv], &mut point);
            local += rule.weights()[q] * f(e, &lam[..nv], &point[..dim])?;
        }
        total += scale * local;
    }
    Ok(total)
}

fn weight_at(n: &WeightField, mesh: &Mesh, e: usize, lam: &[f64], p: &[f64]) -> Result<f64> {
    let w = n.eval_local(mesh, e, lam, p);
    if w < 0.0 || w.is_nan() {
        return Err(Error::NegativeWeight {
            point: p.to_vec(),
            value: w,
        });
    }
    Ok(w)
}

/// `‖u‖_p = (∫ |u|^p)^{1/p}`.
pub fn lp_norm(u: &ScalarField, p: f64, mesh: &Mesh, rule: &QuadratureRule) -> Result<f64> {
    check_exponent(p)?;
    u.check_mesh(mesh)?;
    let s = integrate_plain(mesh, rule, |e, lam, x| {
        Ok(u.eval_local(mesh, e, lam, x).abs().powf(p))
    })?;
    Ok(s.powf(1.0 / p))
}

/// `‖u‖_{p,n} = (∫ |u|^p n)^{1/p}`.
pub fn weighted_lp_norm(
    u: &ScalarField,
    p: f64,
    n: &WeightField,
    mesh: &Mesh,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_exponent(p)?;
    u.check_mesh(mesh)?;
    n.field().check_mesh(mesh)?;
    let s = integrate_plain(mesh, rule, |e, lam, x| {
        let w = weight_at(n, mesh, e, lam, x)?;
        Ok(u.eval_local(mesh, e, lam, x).abs().powf(p) * w)
    })?;
    Ok(s.powf(1.0 / p))
}

/// `‖∇u‖_p`, or `‖∇u‖_{p,n}` when a weight is given. `u` must be nodal.
pub fn gradient_norm(
    u: &ScalarField,
    p: f64,
    n: Option<&WeightField>,
    mesh: &Mesh,
    rule: &QuadratureRule,
) -> Result<f64> {
    Ok(gradient_norm_pow(u, p, n, mesh, rule)?.powf(1.0 / p))
}

fn gradient_norm_pow(
    u: &ScalarField,
    p: f64,
    n: Option<&WeightField>,
    mesh: &Mesh,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_exponent(p)?;
    if !u.is_nodal() {
        return Err(Error::ExpressionGradient);
    }
    u.check_mesh(mesh)?;
    let dim = mesh.dim();
    let nv = dim + 1;
    let mut point = [0.0; 2];
    let mut total = 0.0;
    for e in 0..mesh.num_elements() {
        let g = u.element_gradient(mesh, e)?;
        let gp = g[0].hypot(g[1]).powf(p);
        let mass = match n {
            None => mesh.element_measure(e),
            Some(n) => {
                let scale = mesh.element_measure(e) / rule.reference_measure();
                let mut s = 0.0;
                for q in 0..rule.len() {
                    let lam = rule.barycentric(q);
                    mesh.map_barycentric(e, &lam[..nv], &mut point);
                    s += rule.weights()[q] * weight_at(n, mesh, e, &lam[..nv], &point[..dim])?;
                }
                scale * s
            }
        };
        total += gp * mass;
    }
    Ok(total)
}

/// `‖u‖_{1,p,n} = (‖u‖_p^p + ‖∇u‖_{p,n}^p)^{1/p}`; with `n = None` this is
/// the unweighted `‖u‖_{1,p}`.
pub fn sobolev_norm(
    u: &ScalarField,
    p: f64,
    n: Option<&WeightField>,
    mesh: &Mesh,
    rule: &QuadratureRule,
) -> Result<f64> {
    let grad = gradient_norm_pow(u, p, n, mesh, rule)?;
    let val = lp_norm(u, p, mesh, rule)?.powf(p);
    Ok((val + grad).powf(1.0 / p))
}

pub fn weighted_sobolev_norm(
    u: &ScalarField,
    p: f64,
    n: &WeightField,
    mesh: &Mesh,
    rule: &QuadratureRule,
) -> Result<f64> {
    sobolev_norm(u, p, Some(n), mesh, rule)
}

/// Estimate of `∫ n^-s` with divergence detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrabilityReport {
    pub s: f64,
    /// `+∞` when divergent.
    pub value: f64,
    pub divergent: bool,
    pub method: IntegrationMethod,
    pub estimated_error: f64,
}

impl IntegrabilityReport {
    pub fn is_finite(&self) -> bool {
        !self.divergent
    }
}

pub fn check_inverse_integrability(
    n: &WeightField,
    s: f64,
    mesh: &Mesh,
    rule: &QuadratureRule,
) -> IntegrabilityReport {
    check_inverse_integrability_with(n, s, mesh, rule, &SingularPolicy::default())
}

pub fn check_inverse_integrability_with(
    n: &WeightField,
    s: f64,
    mesh: &Mesh,
    rule: &QuadratureRule,
    policy: &SingularPolicy,
) -> IntegrabilityReport {
    let thr = policy.zero_threshold;
    let r = integrate_scalar(
        mesh,
        rule,
        policy,
        |e, lam, x| !(n.eval_local(mesh, e, lam, x) >= thr),
        |e, lam, x| {
            let w = n.eval_local(mesh, e, lam, x);
            if w >= thr {
                w.powf(-s)
            } else {
                f64::INFINITY
            }
        },
    );
    IntegrabilityReport {
        s,
        value: if r.divergent { f64::INFINITY } else { r.value },
        divergent: r.divergent,
        method: r.method,
        estimated_error: r.error,
    }
}

/// `∫ |∂ₜj|² / n`, or a divergence flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceIntegral {
    pub value: f64,
    pub divergent: bool,
    pub estimated_error: f64,
    pub method: IntegrationMethod,
}

/// Integrates `Σ_k dj_k² / n`. Where `n` is exactly zero a vanishing
/// numerator counts as zero and a nonzero one as divergence.
pub fn force_integral(
    dj: &[ScalarField],
    n: &WeightField,
    mesh: &Mesh,
    rule: &QuadratureRule,
) -> Result<ForceIntegral> {
    for c in dj {
        c.check_mesh(mesh)?;
    }
    n.field().check_mesh(mesh)?;
    let policy = SingularPolicy::default();
    let thr = policy.zero_threshold;
    let r = integrate_scalar(
        mesh,
        rule,
        &policy,
        |e, lam, x| !(n.eval_local(mesh, e, lam, x) >= thr),
        |e, lam, x| {
            let w = n.eval_local(mesh, e, lam, x);
            let num: f64 = dj
                .iter()
                .map(|c| c.eval_local(mesh, e, lam, x).powi(2))
                .sum();
            if w > 0.0 {
                num / w
            } else if num < thr {
                0.0
            } else {
                f64::INFINITY
            }
        },
    );
    Ok(ForceIntegral {
        value: if r.divergent { f64::INFINITY } else { r.value },
        divergent: r.divergent,
        estimated_error: r.error,
        method: r.method,
    })
}

/// Both sides of `∫ |∇√n|² = ¼ ∫ |∇n|²/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeizsackerTerm {
    /// `∫ |∇√n|²` from the P1 interpolant of `√n`.
    pub lhs: f64,
    /// `¼ ∫ |∇n|²/n` with pointwise gradients, `+∞` when divergent.
    pub rhs: f64,
    pub rhs_divergent: bool,
}

impl WeizsackerTerm {
    pub fn relative_mismatch(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.lhs.max(1e-12)
    }
}

pub fn weizsacker_term(
    n: &WeightField,
    mesh: &Mesh,
    rule: &QuadratureRule,
) -> Result<WeizsackerTerm> {
    n.field().check_mesh(mesh)?;
    let nodal = n.field().nodal_on(mesh)?;
    if let Some(i) = nodal.iter().position(|&v| v < 0.0 || v.is_nan()) {
        return Err(Error::NegativeWeight {
            point: mesh.node(i).to_vec(),
            value: nodal[i],
        });
    }
    let root = ScalarField::nodal(mesh, nodal.iter().map(|v| v.sqrt()).collect())?;
    let lhs = gradient_norm_pow(&root, 2.0, None, mesh, rule)?;

    let policy = SingularPolicy::default();
    let thr = policy.zero_threshold;
    let r = integrate_scalar(
        mesh,
        rule,
        &policy,
        |e, lam, x| !(n.eval_local(mesh, e, lam, x) >= thr),
        |e, lam, x| {
            let w = n.eval_local(mesh, e, lam, x);
            let g = pointwise_gradient(n.field(), mesh, e, x);
            let num = g[0] * g[0] + g[1] * g[1];
            if w > 0.0 {
                0.25 * num / w
            } else if num < thr {
                0.0
            } else {
                f64::INFINITY
            }
        },
    );
    Ok(WeizsackerTerm {
        lhs,
        rhs: if r.divergent { f64::INFINITY } else { r.value },
        rhs_divergent: r.divergent,
    })
}

/// Gradient of a field at a point: element gradient for nodal fields,
/// central differences for expressions. The step shrinks near the boundary
/// so every sample stays inside the domain.
fn pointwise_gradient(u: &ScalarField, mesh: &Mesh, e: usize, x: &[f64]) -> [f64; 2] {
    match u {
        ScalarField::Nodal { .. } => u.element_gradient(mesh, e).expect("nodal field"),
        ScalarField::Expr(f) => {
            let base = 1e-5 * mesh.domain().extent();
            let step = base.min(0.5 * distance_to_boundary(mesh, x));
            let mut g = [0.0; 2];
            let mut probe = [x[0], x.get(1).copied().unwrap_or(0.0)];
            for k in 0..mesh.dim() {
                let orig = probe[k];
                probe[k] = orig + step;
                let fp = f(&probe[..mesh.dim()]);
                probe[k] = orig - step;
                let fm = f(&probe[..mesh.dim()]);
                probe[k] = orig;
                g[k] = (fp - fm) / (2.0 * step);
            }
            g
        }
    }
}

fn distance_to_boundary(mesh: &Mesh, x: &[f64]) -> f64 {
    use crate::mesh::Domain;
    match *mesh.domain() {
        Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
        Domain::Rectangle {
            x: (x0, x1),
            y: (y0, y1),
        } => (x[0] - x0).min(x1 - x[0]).min(x[1] - y0).min(y1 - x[1]),
    }
}
