//! P1 Galerkin assembly of `Q(u,v) = ⟨∇u, n∇v⟩`, the L² pairing and the
//! load `⟨u, ζ⟩`, followed by elimination of the boundary nodes.

use crate::error::{Error, Result};
use crate::field::{ScalarField, WeightField};
use crate::mesh::Mesh;
use crate::quadrature::QuadratureRule;
use crate::singular::{integrate_local, SingularPolicy};
use crate::sparse::CsrMatrix;

/// Reduced (interior-node) system for the Dirichlet problem.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub load: Vec<f64>,
    /// `interior_dofs[k]` is the mesh node of reduced unknown `k`.
    pub interior_dofs: Vec<usize>,
    pub num_nodes: usize,
    pub weight: WeightField,
}

impl AssembledSystem {
    pub fn dofs(&self) -> usize {
        self.interior_dofs.len()
    }

    /// Full nodal vector with zeros on the boundary.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.num_nodes];
        for (k, &i) in self.interior_dofs.iter().enumerate() {
            full[i] = reduced[k];
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.interior_dofs.iter().map(|&i| full[i]).collect()
    }

    /// Same operators with a different load.
    pub fn with_load(&self, load: Vec<f64>) -> Result<AssembledSystem> {
        if load.len() != self.dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.dofs(),
                got: load.len(),
            });
        }
        Ok(AssembledSystem {
            load,
            ..self.clone()
        })
    }
}

fn element_local<F>(mesh: &Mesh, e: usize, rule: &QuadratureRule, mut weight: F) -> Result<f64>
where
    F: FnMut(&[f64], &[f64]) -> Result<f64>,
{
    let dim = mesh.dim();
    let nv = dim + 1;
    let mut point = [0.0; 2];
    let mut s = 0.0;
    for q in 0..rule.len() {
        let lam = rule.barycentric(q);
        mesh.map_barycentric(e, &lam[..nv], &mut point);
        s += rule.weights()[q] * weight(&lam[..nv], &point[..dim])?;
    }
    Ok(s * mesh.element_measure(e) / rule.reference_measure())
}

fn push_symmetric(trip: &mut Vec<(usize, usize, f64)>, cell: &[usize], local: &[[f64; 3]; 3]) {
    for a in 0..cell.len() {
        for b in 0..cell.len() {
            let v = if a <= b { local[a][b] } else { local[b][a] };
            trip.push((cell[a], cell[b], v));
        }
    }
}

/// `A_ij = Σ_e ∫_e n ∇φ_i·∇φ_j`, with `n` sampled at every quadrature point.
pub fn assemble_stiffness(
    mesh: &Mesh,
    n: &WeightField,
    rule: &QuadratureRule,
) -> Result<CsrMatrix> {
    n.field().check_mesh(mesh)?;
    let nv = mesh.dim() + 1;
    let mut trip = Vec::with_capacity(mesh.num_elements() * nv * nv);
    for e in 0..mesh.num_elements() {
        let mass_n = element_local(mesh, e, rule, |lam, x| {
            let w = n.eval_local(mesh, e, lam, x);
            if w < 0.0 || w.is_nan() {
                Err(Error::NegativeWeight {
                    point: x.to_vec(),
                    value: w,
                })
            } else if w.is_infinite() {
                Err(Error::NonFinite {
                    what: "weight",
                    point: x.to_vec(),
                    value: w,
                })
            } else {
                Ok(w)
            }
        })?;
        let g = mesh.geometry(e);
        let mut local = [[0.0; 3]; 3];
        for a in 0..nv {
            for b in a..nv {
                local[a][b] =
                    mass_n * (g.grads[a][0] * g.grads[b][0] + g.grads[a][1] * g.grads[b][1]);
            }
        }
        push_symmetric(&mut trip, mesh.cell(e), &local);
    }
    Ok(CsrMatrix::from_triplets(
        mesh.num_nodes(),
        mesh.num_nodes(),
        trip,
    ))
}

/// `M_ij = ∫ φ_i φ_j`.
pub fn assemble_mass(mesh: &Mesh, rule: &QuadratureRule) -> CsrMatrix {
    let nv = mesh.dim() + 1;
    let mut trip = Vec::with_capacity(mesh.num_elements() * nv * nv);
    for e in 0..mesh.num_elements() {
        let mut local = [[0.0; 3]; 3];
        for a in 0..nv {
            for b in a..nv {
                local[a][b] =
                    element_local(mesh, e, rule, |lam, _| Ok(lam[a] * lam[b])).expect("infallible");
            }
        }
        push_symmetric(&mut trip, mesh.cell(e), &local);
    }
    CsrMatrix::from_triplets(mesh.num_nodes(), mesh.num_nodes(), trip)
}

/// `b_i = ∫ φ_i ζ`. Vertices where `ζ` is not finite are treated as
/// integrable singularities and refined toward; a non-integrable `ζ` is an
/// error.
pub fn assemble_load(mesh: &Mesh, zeta: &ScalarField, rule: &QuadratureRule) -> Result<Vec<f64>> {
    zeta.check_mesh(mesh)?;
    let nv = mesh.dim() + 1;
    let local = integrate_local(
        mesh,
        rule,
        &SingularPolicy::default(),
        nv,
        |e, lam, x| !zeta.eval_local(mesh, e, lam, x).is_finite(),
        |e, lam, x, out| {
            let z = zeta.eval_local(mesh, e, lam, x);
            for k in 0..nv {
                out[k] = lam[k] * z;
            }
        },
    );
    if let Some(msg) = local.divergence {
        return Err(Error::Divergent(format!("load functional: {msg}")));
    }
    let mut b = vec![0.0; mesh.num_nodes()];
    for e in 0..mesh.num_elements() {
        for (k, &i) in mesh.cell(e).iter().enumerate() {
            b[i] += local.values[e * nv + k];
        }
    }
    Ok(b)
}

/// Drops boundary rows and columns, realizing the discrete H¹₀ subspace.
pub fn apply_dirichlet(
    stiffness: &CsrMatrix,
    mass: &CsrMatrix,
    load: &[f64],
    mesh: &Mesh,
    weight: &WeightField,
) -> Result<AssembledSystem> {
    let nn = mesh.num_nodes();
    if let Some(got) = [stiffness.nrows(), mass.nrows(), load.len()]
        .into_iter()
        .find(|&g| g != nn)
    {
        return Err(Error::DimensionMismatch { expected: nn, got });
    }
    let interior = mesh.interior_nodes();
    if interior.is_empty() {
        return Err(Error::EmptySystem);
    }
    Ok(AssembledSystem {
        stiffness: stiffness.principal_submatrix(&interior),
        mass: mass.principal_submatrix(&interior),
        load: interior.iter().map(|&i| load[i]).collect(),
        interior_dofs: interior,
        num_nodes: nn,
        weight: weight.clone(),
    })
}

/// Assembles and reduces the full problem `−∇·(n∇v) = ζ`, `v = 0` on ∂Ω.
pub fn assemble_system(
    mesh: &Mesh,
    n: &WeightField,
    zeta: &ScalarField,
    rule: &QuadratureRule,
) -> Result<AssembledSystem> {
    let a = assemble_stiffness(mesh, n, rule)?;
    let m = assemble_mass(mesh, rule);
    let b = assemble_load(mesh, zeta, rule)?;
    apply_dirichlet(&a, &m, &b, mesh, n)
}
