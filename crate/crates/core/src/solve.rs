//! Weak solutions of the reduced system `A v = b`.

use crate::assembly::AssembledSystem;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::sparse::{dot, norm2, ProfileCholesky};

/// Generalized condition estimates above this attach a warning.
pub const CONDITION_WARNING: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct WeakSolution {
    /// Interior coefficients.
    pub coefficients: Vec<f64>,
    /// Nodal field with zero boundary values.
    pub field: ScalarField,
    /// `‖Av − b‖/‖b‖`, or `‖Av‖` when `b = 0`.
    pub residual: f64,
    pub warnings: Vec<String>,
}

pub fn residual_norm(system: &AssembledSystem, v: &[f64]) -> f64 {
    let av = system.stiffness.matvec(v);
    let r: Vec<f64> = av.iter().zip(&system.load).map(|(a, b)| a - b).collect();
    let bn = norm2(&system.load);
    if bn > 0.0 {
        norm2(&r) / bn
    } else {
        norm2(&r)
    }
}

/// Direct solve through a profile Cholesky factorization of `A`.
pub fn solve_weak(system: &AssembledSystem) -> Result<WeakSolution> {
    let chol = ProfileCholesky::factor(&system.stiffness)?;
    let v = chol.solve(&system.load);
    let residual = residual_norm(system, &v);
    let mut warnings = Vec::new();
    let cond = generalized_condition_estimate(system, &chol);
    if cond > CONDITION_WARNING {
        warnings.push(format!(
            "ill-conditioned stiffness: lambda_max/lambda_1 ~ {cond:.3e}"
        ));
    }
    let full = system.expand(&v);
    Ok(WeakSolution {
        field: ScalarField::Nodal {
            values: full,
            zero_boundary: true,
        },
        coefficients: v,
        residual,
        warnings,
    })
}

/// Rough `λ_max/λ_1` of `A e = λ M e` from a few power and inverse
/// iterations.
fn generalized_condition_estimate(system: &AssembledSystem, chol: &ProfileCholesky) -> f64 {
    let n = system.dofs();
    let Ok(mchol) = ProfileCholesky::factor(&system.mass) else {
        return f64::INFINITY;
    };
    let rayleigh = |x: &[f64]| system.stiffness.bilinear(x, x) / system.mass.bilinear(x, x);
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    for _ in 0..30 {
        x = chol.solve(&system.mass.matvec(&x));
        let s = norm2(&x);
        x.iter_mut().for_each(|v| *v /= s);
    }
    let lo = rayleigh(&x);
    let mut y: Vec<f64> = (0..n)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    for _ in 0..30 {
        y = mchol.solve(&system.stiffness.matvec(&y));
        let s = norm2(&y);
        y.iter_mut().for_each(|v| *v /= s);
    }
    let hi = rayleigh(&y);
    hi / lo
}

#[derive(Debug, Clone)]
pub struct IterativeSolution {
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from the initial guess `x0`,
/// stopping at relative residual `1e-12` or `10·dofs` iterations.
pub fn solve_cg(system: &AssembledSystem, x0: &[f64]) -> Result<IterativeSolution> {
    let n = system.dofs();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    let a = &system.stiffness;
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::NonCoercive {
            row: system.interior_dofs[i],
            pivot: diag[i],
        });
    }
    let tol = 1e-12;
    let cap = 10 * n;
    let bn = norm2(&system.load);
    let scale = if bn > 0.0 { bn } else { 1.0 };
    let mut x = x0.to_vec();
    let ax = a.matvec(&x);
    let mut r: Vec<f64> = system.load.iter().zip(&ax).map(|(b, v)| b - v).collect();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut it = 0;
    while norm2(&r) / scale > tol {
        if it >= cap {
            return Err(Error::NotConverged {
                iterations: it,
                residuals: vec![norm2(&r) / scale],
            });
        }
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NonCoercive { row: 0, pivot: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
    }
    let residual = residual_norm(system, &x);
    Ok(IterativeSolution {
        coefficients: x,
        iterations: it,
        residual,
    })
}

/// `J(v) = ½ vᵀAv − bᵀv`; the weak solution minimizes it.
pub fn energy(system: &AssembledSystem, v: &[f64]) -> Result<f64> {
    if v.len() != system.dofs() {
        return Err(Error::DimensionMismatch {
            expected: system.dofs(),
            got: v.len(),
        });
    }
    Ok(0.5 * system.stiffness.bilinear(v, v) - dot(&system.load, v))
}

/// `‖x‖_M = √(xᵀMx)`.
pub fn mass_norm(system: &AssembledSystem, x: &[f64]) -> f64 {
    system.mass.bilinear(x, x).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_system;
    use crate::field::WeightField;
    use crate::mesh::build_interval_mesh;
    use crate::quadrature::QuadratureRule;
    use std::f64::consts::PI;

    fn manufactured(m: usize) -> AssembledSystem {
        let mesh = build_interval_mesh(0.0, 1.0, m).unwrap();
        let zeta = ScalarField::expr(|x| PI * PI * (PI * x[0]).sin());
        assemble_system(
            &mesh,
            &WeightField::constant(1.0),
            &zeta,
            &QuadratureRule::interval(4),
        )
        .unwrap()
    }

    #[test]
    fn direct_solve_residual() {
        let sys = manufactured(64);
        let sol = solve_weak(&sys).unwrap();
        assert!(sol.residual < 1e-10);
        assert!(sol.warnings.is_empty());
        assert_eq!(sol.field.nodal_values().unwrap()[0], 0.0);
    }

    #[test]
    fn zero_load_zero_solution() {
        let sys = manufactured(16);
        let sys = sys.with_load(vec![0.0; sys.dofs()]).unwrap();
        let sol = solve_weak(&sys).unwrap();
        assert!(sol.coefficients.iter().all(|&v| v == 0.0));
        assert_eq!(energy(&sys, &sol.coefficients).unwrap(), 0.0);
    }

    #[test]
    fn cg_matches_direct() {
        let sys = manufactured(40);
        let direct = solve_weak(&sys).unwrap();
        let guess: Vec<f64> = (0..sys.dofs())
            .map(|i| ((i * 13) % 5) as f64 - 2.0)
            .collect();
        let cg = solve_cg(&sys, &guess).unwrap();
        let diff: Vec<f64> = cg
            .coefficients
            .iter()
            .zip(&direct.coefficients)
            .map(|(a, b)| a - b)
            .collect();
        assert!(mass_norm(&sys, &diff) / mass_norm(&sys, &direct.coefficients) < 1e-8);
    }

    #[test]
    fn singular_stiffness_rejected() {
        let mesh = build_interval_mesh(0.0, 1.0, 8).unwrap();
        let sys = assemble_system(
            &mesh,
            &WeightField::constant(0.0),
            &ScalarField::constant(1.0),
            &QuadratureRule::interval(4),
        )
        .unwrap();
        assert!(matches!(solve_weak(&sys), Err(Error::NonCoercive { .. })));
        assert!(solve_cg(&sys, &vec![0.0; sys.dofs()]).is_err());
    }
}
