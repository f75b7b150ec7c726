//! Discrete constants of the inequality chain behind coercivity: Hardy
//! (`‖u‖₂ ≤ c‖∇u‖_{2,n}`), coercivity, continuity, Poincaré and the Hölder
//! embedding `‖∇u‖_{4/3} ≤ ‖n⁻²‖₁^{1/4} ‖∇u‖_{2,n}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_system, AssembledSystem};
use crate::eigen::{largest_eigenvalue, solve_eigenpairs};
use crate::error::{Error, Result};
use crate::field::{ScalarField, WeightField};
use crate::mesh::Mesh;
use crate::norms::{check_inverse_integrability, gradient_norm, IntegrabilityReport};
use crate::quadrature::QuadratureRule;

/// `1/√λ₁`: the sharp discrete constant in `‖u‖₂ ≤ c‖∇u‖_{2,n}`.
pub fn estimate_hardy_constant(system: &AssembledSystem) -> Result<f64> {
    Ok(1.0 / solve_eigenpairs(system, 1)?.first().sqrt())
}

/// `λ₁/(1+λ₁)`: the largest `c` with `Q(u,u) ≥ c‖u‖²_{1,2,n}`.
pub fn estimate_coercivity_constant(system: &AssembledSystem) -> Result<f64> {
    let l = solve_eigenpairs(system, 1)?.first();
    Ok(l / (1.0 + l))
}

/// `λ_max/(1+λ_max)`: the smallest `C` with `|Q(u,v)| ≤ C‖u‖_{1,2,n}‖v‖_{1,2,n}`
/// on the discrete space. Always below 1.
pub fn estimate_continuity_constant(system: &AssembledSystem) -> Result<f64> {
    let l = largest_eigenvalue(system)?;
    Ok(l / (1.0 + l))
}

/// `‖n⁻²‖₁^{1/4}`, or `None` when `n⁻²` is not integrable.
pub fn holder_embedding_constant(report: &IntegrabilityReport) -> Option<f64> {
    report.is_finite().then(|| report.value.powf(0.25))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareEstimate {
    pub q: f64,
    pub value: f64,
    /// `true` for the eigenvalue characterization (`q = 2`); otherwise the
    /// value is the best ratio found by ascent, a lower bound.
    pub sharp: bool,
}

pub const POINCARE_STARTS: usize = 20;
const ASCENT_STEPS: usize = 400;
const POINCARE_SEED: u64 = 0x90_1CA8E;

/// Constant in `‖u‖_q ≤ c‖∇u‖_q` over the discrete H¹₀ space of `mesh`.
pub fn estimate_poincare_constant(
    mesh: &Mesh,
    q: f64,
    rule: &QuadratureRule,
) -> Result<PoincareEstimate> {
    if !(1.0..=16.0).contains(&q) {
        return Err(Error::InvalidExponent(q));
    }
    if q == 2.0 {
        let sys = assemble_system(
            mesh,
            &WeightField::constant(1.0),
            &ScalarField::zero(),
            rule,
        )?;
        let l = solve_eigenpairs(&sys, 1)?.first();
        return Ok(PoincareEstimate {
            q,
            value: 1.0 / l.sqrt(),
            sharp: true,
        });
    }
    let ratio = PoincareRatio::new(mesh, q, rule);
    if ratio.interior.is_empty() {
        return Err(Error::EmptySystem);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POINCARE_SEED);
    let mut best: Option<f64> = None;
    for _ in 0..POINCARE_STARTS {
        let start: Vec<f64> = (0..ratio.interior.len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        if let Some(r) = ratio.ascend(start) {
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
    }
    best.map(|value| PoincareEstimate {
        q,
        value,
        sharp: false,
    })
    .ok_or_else(|| Error::Estimation("every ascent start was degenerate".into()))
}

/// `‖u‖_q / ‖∇u‖_q` and its gradient over interior nodal coefficients.
pub struct PoincareRatio<'a> {
    mesh: &'a Mesh,
    q: f64,
    rule: &'a QuadratureRule,
    interior: Vec<usize>,
    slot: Vec<usize>,
}

impl<'a> PoincareRatio<'a> {
    pub fn new(mesh: &'a Mesh, q: f64, rule: &'a QuadratureRule) -> PoincareRatio<'a> {
        let interior = mesh.interior_nodes();
        let mut slot = vec![usize::MAX; mesh.num_nodes()];
        for (k, &i) in interior.iter().enumerate() {
            slot[i] = k;
        }
        PoincareRatio {
            mesh,
            q,
            rule,
            interior,
            slot,
        }
    }

    fn full(&self, u: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.mesh.num_nodes()];
        for (k, &i) in self.interior.iter().enumerate() {
            f[i] = u[k];
        }
        f
    }

    /// Returns `(∫|u|^q, ∫|∇u|^q)` and optionally their gradients.
    fn parts(&self, u: &[f64], grads: Option<(&mut [f64], &mut [f64])>) -> (f64, f64) {
        let mesh = self.mesh;
        let q = self.q;
        let full = self.full(u);
        let nv = mesh.dim() + 1;
        let (mut nu, mut ng) = (0.0, 0.0);
        let mut grads = grads;
        for e in 0..mesh.num_elements() {
            let cell = mesh.cell(e);
            let geo = mesh.geometry(e);
            let scale = geo.measure / self.rule.reference_measure();
            for qp in 0..self.rule.len() {
                let lam = self.rule.barycentric(qp);
                let val: f64 = (0..nv).map(|k| lam[k] * full[cell[k]]).sum();
                let w = self.rule.weights()[qp] * scale;
                nu += w * val.abs().powf(q);
                if let Some((gu, _)) = grads.as_mut() {
                    let d = q * val.abs().powf(q - 1.0) * val.signum();
                    for k in 0..nv {
                        let s = self.slot[cell[k]];
                        if s != usize::MAX {
                            gu[s] += w * d * lam[k];
                        }
                    }
                }
            }
            let mut g = [0.0; 2];
            for k in 0..nv {
                g[0] += full[cell[k]] * geo.grads[k][0];
                g[1] += full[cell[k]] * geo.grads[k][1];
            }
            let gn = g[0].hypot(g[1]);
            ng += geo.measure * gn.powf(q);
            if let Some((_, gg)) = grads.as_mut() {
                if gn > 0.0 {
                    let d = q * gn.powf(q - 2.0);
                    for k in 0..nv {
                        let s = self.slot[cell[k]];
                        if s != usize::MAX {
                            gg[s] +=
                                geo.measure * d * (g[0] * geo.grads[k][0] + g[1] * geo.grads[k][1]);
                        }
                    }
                }
            }
        }
        (nu, ng)
    }

    pub fn ratio(&self, u: &[f64]) -> Option<f64> {
        let (nu, ng) = self.parts(u, None);
        (ng > 0.0).then(|| (nu / ng).powf(1.0 / self.q))
    }

    /// Gradient ascent on `log(‖u‖_q/‖∇u‖_q)` with step doubling/halving.
    /// Returns the best ratio visited.
    fn ascend(&self, mut u: Vec<f64>) -> Option<f64> {
        let n = u.len();
        let log_r = |u: &[f64]| self.ratio(u).map(f64::ln);
        let mut current = log_r(&u)?;
        let mut step = 0.1;
        let mut stalled = 0;
        for _ in 0..ASCENT_STEPS {
            let mut gu = vec![0.0; n];
            let mut gg = vec![0.0; n];
            let (nu, ng) = self.parts(&u, Some((&mut gu, &mut gg)));
            if !(nu > 0.0 && ng > 0.0) {
                break;
            }
            let dir: Vec<f64> = (0..n).map(|i| (gu[i] / nu - gg[i] / ng) / self.q).collect();
            let dn = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            let un = u.iter().map(|d| d * d).sum::<f64>().sqrt();
            if dn == 0.0 || un == 0.0 {
                break;
            }
            let mut improved = false;
            for _ in 0..30 {
                let t = step * un / dn;
                let cand: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                match log_r(&cand) {
                    Some(v) if v > current => {
                        let gain = v - current;
                        let cn = cand.iter().map(|d| d.abs()).fold(0.0, f64::max);
                        u = cand.into_iter().map(|c| c / cn).collect();
                        current = v;
                        step = (step * 2.0).min(1.0);
                        improved = true;
                        stalled = if gain < 1e-13 { stalled + 1 } else { 0 };
                        break;
                    }
                    _ => step *= 0.5,
                }
            }
            if !improved || stalled >= 5 {
                break;
            }
        }
        Some(current.exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HolderOutcome {
    /// `rhs − lhs ≥ 0`.
    Holds {
        slack: f64,
    },
    Violated {
        slack: f64,
    },
    /// `n⁻²` is not integrable; the embedding constant does not exist.
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderCheck {
    pub outcome: HolderOutcome,
    /// `‖∇u‖_{4/3}`.
    pub lhs: f64,
    /// `‖n⁻²‖₁^{1/4} ‖∇u‖_{2,n}`.
    pub rhs: f64,
}

impl HolderCheck {
    pub fn passed(&self) -> bool {
        matches!(self.outcome, HolderOutcome::Holds { .. })
    }
}

/// Checks `‖∇u‖_{4/3} ≤ ‖n⁻²‖₁^{1/4} ‖∇u‖_{2,n}` for a nodal `u`.
pub fn verify_holder_chain(
    u: &ScalarField,
    n: &WeightField,
    mesh: &Mesh,
    rule: &QuadratureRule,
) -> Result<HolderCheck> {
    let report = match n.admissibility() {
        Some(rec) => rec.inverse_square,
        None => check_inverse_integrability(n, 2.0, mesh, rule),
    };
    verify_holder_chain_with(u, n, &report, mesh, rule)
}

/// As [`verify_holder_chain`] with a precomputed `∫ n⁻²` report.
pub fn verify_holder_chain_with(
    u: &ScalarField,
    n: &WeightField,
    inverse_square: &IntegrabilityReport,
    mesh: &Mesh,
    rule: &QuadratureRule,
) -> Result<HolderCheck> {
    let lhs = gradient_norm(u, 4.0 / 3.0, None, mesh, rule)?;
    let weighted = gradient_norm(u, 2.0, Some(n), mesh, rule)?;
    let Some(c) = holder_embedding_constant(inverse_square) else {
        return Ok(HolderCheck {
            outcome: HolderOutcome::NotApplicable,
            lhs,
            rhs: f64::INFINITY,
        });
    };
    let rhs = c * weighted;
    let slack = rhs - lhs;
    let outcome = if slack >= 0.0 {
        HolderOutcome::Holds { slack }
    } else {
        HolderOutcome::Violated { slack }
    };
    Ok(HolderCheck { outcome, lhs, rhs })
}

/// Every measurable constant for one weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsReport {
    pub poincare: Vec<PoincareEstimate>,
    pub hardy: f64,
    pub coercivity: f64,
    pub continuity: f64,
    /// `‖n⁻²‖₁^{1/4}`; `None` when divergent.
    pub holder_embedding: Option<f64>,
    pub inverse_square: IntegrabilityReport,
}

pub fn constants_report(
    mesh: &Mesh,
    n: &WeightField,
    poincare_q: &[f64],
    rule: &QuadratureRule,
) -> Result<ConstantsReport> {
    let system = assemble_system(mesh, n, &ScalarField::zero(), rule)?;
    let lambda1 = solve_eigenpairs(&system, 1)?.first();
    let inverse_square = check_inverse_integrability(n, 2.0, mesh, rule);
    let poincare = poincare_q
        .iter()
        .map(|&q| estimate_poincare_constant(mesh, q, rule))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstantsReport {
        poincare,
        hardy: 1.0 / lambda1.sqrt(),
        coercivity: lambda1 / (1.0 + lambda1),
        continuity: estimate_continuity_constant(&system)?,
        holder_embedding: holder_embedding_constant(&inverse_square),
        inverse_square,
    })
}
