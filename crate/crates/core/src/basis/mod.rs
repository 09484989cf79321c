//! Parametric basis families, the nonlinear-parameter domain, and
//! estimators for the constants that bound the family.

mod domain;
mod estimate;
mod family;
pub mod isotonic;

pub use domain::{ActiveSet, NonlinearDomain, FEASIBILITY_TOL};
pub use estimate::{
    basis_diff_norm_sq, basis_function_norms, basis_norms, estimate_hoelder, estimate_sup_norm,
    param_jacobian_diff_norm_sq, HoelderEstimate, HOELDER_SAFETY,
};
pub use family::{BasisFamily, BasisFunction, FamilyKind, ParamGradMode, ParamJacobian, Realisation};
