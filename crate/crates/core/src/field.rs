use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::norms::IntegrabilityReport;

pub type PointFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A scalar function on the domain: either a closed-form expression of the
/// coordinates or nodal coefficients of the piecewise-linear interpolant.
#[derive(Clone)]
pub enum ScalarField {
    Expr(Arc<PointFn>),
    Nodal {
        values: Vec<f64>,
        zero_boundary: bool,
    },
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Expr(_) => f.write_str("ScalarField::Expr(..)"),
            ScalarField::Nodal {
                values,
                zero_boundary,
            } => f
                .debug_struct("ScalarField::Nodal")
                .field("len", &values.len())
                .field("zero_boundary", zero_boundary)
                .finish(),
        }
    }
}

impl ScalarField {
    pub fn expr<F>(f: F) -> ScalarField
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ScalarField::Expr(Arc::new(f))
    }

    pub fn constant(c: f64) -> ScalarField {
        ScalarField::expr(move |_| c)
    }

    pub fn zero() -> ScalarField {
        ScalarField::constant(0.0)
    }

    pub fn nodal(mesh: &Mesh, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::FieldLength {
                expected: mesh.num_nodes(),
                got: values.len(),
            });
        }
        Ok(ScalarField::Nodal {
            values,
            zero_boundary: false,
        })
    }

    /// Nodal field in the discrete H¹₀ subspace. Fails if any boundary
    /// coefficient is nonzero.
    pub fn nodal_zero_boundary(mesh: &Mesh, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::FieldLength {
                expected: mesh.num_nodes(),
                got: values.len(),
            });
        }
        if let Some(&i) = mesh.boundary_nodes().iter().find(|&&i| values[i] != 0.0) {
            return Err(Error::InvalidMesh(format!(
                "boundary node {i} carries nonzero coefficient {}",
                values[i]
            )));
        }
        Ok(ScalarField::Nodal {
            values,
            zero_boundary: true,
        })
    }

    pub fn is_nodal(&self) -> bool {
        matches!(self, ScalarField::Nodal { .. })
    }

    pub fn nodal_values(&self) -> Option<&[f64]> {
        match self {
            ScalarField::Nodal { values, .. } => Some(values),
            ScalarField::Expr(_) => None,
        }
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        match self {
            ScalarField::Nodal { values, .. } if values.len() != mesh.num_nodes() => {
                Err(Error::FieldLength {
                    expected: mesh.num_nodes(),
                    got: values.len(),
                })
            }
            _ => Ok(()),
        }
    }

    /// Value at a point of element `e` given both its barycentric and
    /// physical coordinates. No containment check.
    #[inline]
    pub fn eval_local(&self, mesh: &Mesh, e: usize, lambda: &[f64], point: &[f64]) -> f64 {
        match self {
            ScalarField::Expr(f) => f(point),
            ScalarField::Nodal { values, .. } => mesh
                .cell(e)
                .iter()
                .zip(lambda)
                .map(|(&v, l)| l * values[v])
                .sum(),
        }
    }

    /// Value at an arbitrary point of the closed domain.
    pub fn evaluate(&self, mesh: &Mesh, point: &[f64]) -> Result<f64> {
        if !mesh.domain().contains(point) {
            return Err(Error::OutsideDomain {
                point: point.to_vec(),
            });
        }
        match self {
            ScalarField::Expr(f) => Ok(f(point)),
            ScalarField::Nodal { .. } => {
                self.check_mesh(mesh)?;
                let (e, lam) = mesh.locate(point)?;
                Ok(self.eval_local(mesh, e, &lam[..mesh.dim() + 1], point))
            }
        }
    }

    /// Nodal values of the piecewise-linear interpolant.
    pub fn nodal_on(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        match self {
            ScalarField::Expr(f) => Ok((0..mesh.num_nodes()).map(|i| f(mesh.node(i))).collect()),
            ScalarField::Nodal { values, .. } => {
                self.check_mesh(mesh)?;
                Ok(values.clone())
            }
        }
    }

    /// Projects onto the nodal (P1 interpolant) form.
    pub fn interpolate(&self, mesh: &Mesh) -> Result<ScalarField> {
        match self {
            ScalarField::Nodal { .. } => {
                self.check_mesh(mesh)?;
                Ok(self.clone())
            }
            ScalarField::Expr(_) => ScalarField::nodal(mesh, self.nodal_on(mesh)?),
        }
    }

    /// Interpolant with boundary coefficients set to zero.
    pub fn interpolate_zero_boundary(&self, mesh: &Mesh) -> Result<ScalarField> {
        let mut values = self.nodal_on(mesh)?;
        for &i in mesh.boundary_nodes() {
            values[i] = 0.0;
        }
        Ok(ScalarField::Nodal {
            values,
            zero_boundary: true,
        })
    }

    /// Element-wise constant gradient of a nodal field.
    pub fn element_gradient(&self, mesh: &Mesh, e: usize) -> Result<[f64; 2]> {
        let ScalarField::Nodal { values, .. } = self else {
            return Err(Error::ExpressionGradient);
        };
        let g = mesh.geometry(e);
        let mut grad = [0.0; 2];
        for (k, &v) in mesh.cell(e).iter().enumerate() {
            grad[0] += values[v] * g.grads[k][0];
            grad[1] += values[v] * g.grads[k][1];
        }
        Ok(grad)
    }

    /// Pointwise scaling `α·u` preserving the representation.
    pub fn scaled(&self, alpha: f64) -> ScalarField {
        match self {
            ScalarField::Expr(f) => {
                let f = Arc::clone(f);
                ScalarField::expr(move |p| alpha * f(p))
            }
            ScalarField::Nodal {
                values,
                zero_boundary,
            } => ScalarField::Nodal {
                values: values.iter().map(|v| alpha * v).collect(),
                zero_boundary: *zero_boundary,
            },
        }
    }
}

/// Cached outcome of the density admissibility integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityRecord {
    pub l1_norm: f64,
    pub inverse_square: IntegrabilityReport,
}

/// The density `n`, the weight of the operator `−∇·(n∇v)`.
#[derive(Debug, Clone)]
pub struct WeightField {
    field: ScalarField,
    admissibility: Option<AdmissibilityRecord>,
}

impl WeightField {
    pub fn new(field: ScalarField) -> WeightField {
        WeightField {
            field,
            admissibility: None,
        }
    }

    pub fn expr<F>(f: F) -> WeightField
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        WeightField::new(ScalarField::expr(f))
    }

    pub fn constant(c: f64) -> WeightField {
        WeightField::new(ScalarField::constant(c))
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn admissibility(&self) -> Option<&AdmissibilityRecord> {
        self.admissibility.as_ref()
    }

    pub fn with_admissibility(mut self, record: AdmissibilityRecord) -> WeightField {
        self.admissibility = Some(record);
        self
    }

    #[inline]
    pub fn eval_local(&self, mesh: &Mesh, e: usize, lambda: &[f64], point: &[f64]) -> f64 {
        self.field.eval_local(mesh, e, lambda, point)
    }

    pub fn evaluate(&self, mesh: &Mesh, point: &[f64]) -> Result<f64> {
        self.field.evaluate(mesh, point)
    }

    pub fn scaled(&self, alpha: f64) -> WeightField {
        WeightField::new(self.field.scaled(alpha))
    }
}

impl From<ScalarField> for WeightField {
    fn from(field: ScalarField) -> WeightField {
        WeightField::new(field)
    }
}
