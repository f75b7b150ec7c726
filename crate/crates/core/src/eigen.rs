//! Smallest eigenpairs of `A e = λ M e` on the interior degrees of freedom.
//!
//! Systems with at most [`DENSE_LIMIT`] unknowns go through a dense
//! Cholesky reduction; larger ones use shift-invert subspace iteration with
//! a Rayleigh-Ritz step (which also M-orthonormalizes the block) each sweep.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::AssembledSystem;
use crate::error::{Error, Result};
use crate::sparse::{norm2, CsrMatrix, ProfileCholesky};

pub const DENSE_LIMIT: usize = 500;
const MAX_SWEEPS: usize = 2000;
const RESIDUAL_TARGET: f64 = 1e-10;
const SEED: u64 = 0x5EED_0001;

/// Ascending eigenvalues with M-orthonormal reduced eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenSequence {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// `‖A e − λ M e‖ / ‖A e‖` per pair.
    pub residuals: Vec<f64>,
}

impl EigenSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }
}

pub fn relative_residual(a: &CsrMatrix, m: &CsrMatrix, lambda: f64, e: &[f64]) -> f64 {
    let ae = a.matvec(e);
    let me = m.matvec(e);
    let r: Vec<f64> = ae.iter().zip(&me).map(|(x, y)| x - lambda * y).collect();
    norm2(&r) / norm2(&ae)
}

pub fn solve_eigenpairs(system: &AssembledSystem, k: usize) -> Result<EigenSequence> {
    let n = system.dofs();
    if k == 0 || k > n {
        return Err(Error::TooManyEigenpairs {
            requested: k,
            available: n,
        });
    }
    if n <= DENSE_LIMIT {
        let (values, vectors) =
            dense_generalized(&system.stiffness.to_dense(), &system.mass.to_dense())?;
        let values: Vec<f64> = values.iter().copied().take(k).collect();
        if !(values[0] > 0.0) {
            return Err(Error::NonCoercive {
                row: 0,
                pivot: values[0],
            });
        }
        let vectors: Vec<Vec<f64>> = (0..k)
            .map(|j| vectors.column(j).iter().copied().collect())
            .collect();
        finish(system, values, vectors)
    } else {
        subspace_iteration(system, k)
    }
}

fn finish(
    system: &AssembledSystem,
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
) -> Result<EigenSequence> {
    let residuals: Vec<f64> = values
        .iter()
        .zip(&vectors)
        .map(|(&l, e)| relative_residual(&system.stiffness, &system.mass, l, e))
        .collect();
    Ok(EigenSequence {
        values,
        vectors,
        residuals,
    })
}

/// All eigenpairs of `A x = λ M x` for dense symmetric `A` and SPD `M`,
/// ascending, with M-orthonormal columns.
fn dense_generalized(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Estimation("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv_a = l
        .solve_lower_triangular(a)
        .expect("nonsingular Cholesky factor");
    let c = l
        .solve_lower_triangular(&linv_a.transpose())
        .expect("nonsingular Cholesky factor");
    let c = 0.5 * (&c + c.transpose());
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(a.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    let x = l
        .transpose()
        .solve_upper_triangular(&y)
        .expect("nonsingular Cholesky factor");
    Ok((values, x))
}

fn subspace_iteration(system: &AssembledSystem, k: usize) -> Result<EigenSequence> {
    let n = system.dofs();
    let p = (2 * k).max(k + 8).min(n);
    let chol = ProfileCholesky::factor(&system.stiffness)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut x = DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
    let mut residuals = vec![f64::INFINITY; k];
    for _sweep in 0..MAX_SWEEPS {
        let mut y = DMatrix::zeros(n, p);
        for j in 0..p {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let sol = chol.solve(&system.mass.matvec(&col));
            y.set_column(j, &DVector::from_vec(sol));
        }
        let ay = sparse_times(&system.stiffness, &y);
        let my = sparse_times(&system.mass, &y);
        let ar = y.transpose() * &ay;
        let mr = y.transpose() * &my;
        let (values, q) = dense_generalized(
            &(0.5 * (&ar + ar.transpose())),
            &(0.5 * (&mr + mr.transpose())),
        )?;
        x = &y * &q;
        let ax = &ay * &q;
        let mx = &my * &q;
        for j in 0..k {
            let r = ax.column(j) - values[j] * mx.column(j);
            residuals[j] = r.norm() / ax.column(j).norm();
        }
        if residuals.iter().all(|&r| r < RESIDUAL_TARGET) {
            if !(values[0] > 0.0) {
                return Err(Error::NonCoercive {
                    row: 0,
                    pivot: values[0],
                });
            }
            let vectors = (0..k)
                .map(|j| x.column(j).iter().copied().collect())
                .collect();
            return finish(system, values[..k].to_vec(), vectors);
        }
    }
    Err(Error::NotConverged {
        iterations: MAX_SWEEPS,
        residuals,
    })
}

fn sparse_times(a: &CsrMatrix, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), x.ncols());
    for j in 0..x.ncols() {
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        out.set_column(j, &DVector::from_vec(a.matvec(&col)));
    }
    out
}

/// Largest eigenvalue of `A e = λ M e`.
pub fn largest_eigenvalue(system: &AssembledSystem) -> Result<f64> {
    let n = system.dofs();
    if n <= DENSE_LIMIT {
        let (values, _) = dense_generalized(&system.stiffness.to_dense(), &system.mass.to_dense())?;
        return Ok(*values.last().expect("nonempty system"));
    }
    power_iteration(system)
}

fn power_iteration(system: &AssembledSystem) -> Result<f64> {
    let n = system.dofs();
    let mchol = ProfileCholesky::factor(&system.mass)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0xA5A5);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut lambda = 0.0;
    for _ in 0..5000 {
        let y = mchol.solve(&system.stiffness.matvec(&x));
        let s = norm2(&y);
        x = y.into_iter().map(|v| v / s).collect();
        let next = system.stiffness.bilinear(&x, &x) / system.mass.bilinear(&x, &x);
        if (next - lambda).abs() <= 1e-13 * next {
            return Ok(next);
        }
        lambda = next;
    }
    Ok(lambda)
}
