//! Weighted Sturm-Liouville problems `−∇·(n∇v) = ζ` with homogeneous
//! Dirichlet data on intervals and rectangles, for densities `n` that may
//! vanish.
//!
//! The weak form `⟨∇u, n∇v⟩ = ⟨u, ζ⟩` is discretized with P1 elements on the
//! space `H¹₀(Ω, n)` normed by `‖u‖²_{1,2,n} = ‖u‖₂² + ‖∇u‖²_{2,n}`. Besides the
//! solver the crate computes the generalized eigenbasis of the form and
//! numerical certificates for the admissibility conditions on `n`
//! (`n ≥ 0`, `n ∈ L¹`, `n⁻² ∈ L¹`) and for each inequality in the
//! coercivity argument.

// `!(x > 0.0)` is used on purpose so that NaN fails positivity checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod constants;
pub mod eigen;
pub mod error;
pub mod field;
pub mod mesh;
pub mod norms;
pub mod quadrature;
pub mod singular;
pub mod slice;
pub mod solve;
pub mod sparse;

pub use assembly::{
    apply_dirichlet, assemble_load, assemble_mass, assemble_stiffness, assemble_system,
    AssembledSystem,
};
pub use constants::{
    constants_report, estimate_coercivity_constant, estimate_continuity_constant,
    estimate_hardy_constant, estimate_poincare_constant, verify_holder_chain, ConstantsReport,
    HolderCheck, HolderOutcome, PoincareEstimate,
};
pub use eigen::{solve_eigenpairs, EigenSequence};
pub use error::{Error, Result};
pub use field::{ScalarField, WeightField};
pub use mesh::{build_interval_mesh, build_rectangle_mesh, refine_uniform, Domain, Mesh};
pub use norms::{
    check_inverse_integrability, force_integral, gradient_norm, lp_norm, sobolev_norm,
    weighted_lp_norm, weighted_sobolev_norm, weizsacker_term, ForceIntegral, IntegrabilityReport,
    WeizsackerTerm,
};
pub use quadrature::QuadratureRule;
pub use slice::{
    certify_density, run_time_series, second_time_difference, AdmissibilityFlags, SeriesOptions,
    SliceProblem, SliceReport,
};
pub use solve::{energy, solve_cg, solve_weak, WeakSolution};
