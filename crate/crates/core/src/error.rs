use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite integrand value {value} at quadrature node x = {node}")]
    NonFiniteIntegrand { node: f64, value: f64 },

    #[error("derivative requested from an L2-only field")]
    DerivativeOfL2Field,

    #[error("nonlinear parameters outside the admissible set: {}", violations.join("; "))]
    DomainViolation { violations: Vec<String> },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid quadrature rule: {0}")]
    InvalidQuadrature(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported parameter-gradient mode: {0}")]
    UnsupportedGradientMode(String),

    #[error("incompatible problem and basis family: {0}")]
    Incompatible(String),

    #[error("matrix {name} is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { name: &'static str, asymmetry: f64 },

    #[error("conjugate gradient did not converge in {iterations} iterations (residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("stiffness matrix is not positive definite along the residual: (r, A r) = {curvature:e}")]
    NotPositiveDefinite { curvature: f64 },

    #[error("Gram matrix fails the uniform lower eigenvalue bound: omega = {omega:e} < omega_min = {omega_min:e}")]
    AssumptionSpdFailed { omega: f64, omega_min: f64 },

    #[error("grid oracle too large: {points} points (limit {limit}); use an analytic oracle")]
    GridTooLarge { points: usize, limit: usize },

    #[error("minimiser oracle is empty")]
    EmptyOracle,

    #[error("numerical breakdown: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
