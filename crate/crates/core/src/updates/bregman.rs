//! Bregman geometry on the nonlinear parameters and the proximal step.

use crate::basis::NonlinearDomain;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Mirror map `ψ`. The primal norm is always Euclidean; only `ψ` changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// `ψ(ξ) = ½‖ξ‖²`.
    Euclidean,
    /// `ψ(ξ) = ½ξᵀDξ` with `D = diag(d)`.
    DiagonalQuadratic { d: Vec<f64> },
}

impl Geometry {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Geometry::DiagonalQuadratic { d } = self {
            if d.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "geometry has {} weights for {dim} parameters",
                    d.len()
                )));
            }
            if d.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidArgument("geometry weights must be positive".into()));
            }
        }
        Ok(())
    }

    /// Strong-convexity modulus of `ψ` in the Euclidean norm.
    pub fn mu(&self) -> f64 {
        match self {
            Geometry::Euclidean => 1.0,
            Geometry::DiagonalQuadratic { d } => d.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Diagonal of `∇²ψ`.
    pub fn weights(&self, dim: usize) -> Vec<f64> {
        match self {
            Geometry::Euclidean => vec![1.0; dim],
            Geometry::DiagonalQuadratic { d } => d.clone(),
        }
    }

    pub fn psi(&self, xi: &[f64]) -> f64 {
        let d = self.weights(xi.len());
        0.5 * xi.iter().zip(&d).map(|(x, di)| di * x * x).sum::<f64>()
    }

    pub fn grad_psi(&self, xi: &[f64]) -> Vec<f64> {
        let d = self.weights(xi.len());
        xi.iter().zip(&d).map(|(x, di)| di * x).collect()
    }

    /// `D_ψ(η; ξ) = ψ(η) − ψ(ξ) − ⟨∇ψ(ξ), η − ξ⟩`, evaluated in the
    /// cancellation-free form `½Σ dᵢ(ηᵢ − ξᵢ)²`.
    pub fn bregman_div(&self, eta: &[f64], xi: &[f64]) -> f64 {
        let d = self.weights(xi.len());
        0.5 * eta
            .iter()
            .zip(xi)
            .zip(&d)
            .map(|((e, x), di)| di * (e - x) * (e - x))
            .sum::<f64>()
    }

    /// `argmin_{η∈𝕏} γ⟨g, η⟩ + D_ψ(η; ξ)`: the `D`-weighted projection of
    /// `ξ − γD⁻¹g`.
    pub fn prox_step(&self, domain: &NonlinearDomain, xi: &[f64], grad: &[f64], gamma: f64) -> Result<Vec<f64>> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size {gamma} must be positive")));
        }
        let d = self.weights(xi.len());
        let y: Vec<f64> = (0..xi.len()).map(|i| xi[i] - gamma * grad[i] / d[i]).collect();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite unconstrained prox point".into()));
        }
        let out = domain.project_weighted(&y, &d)?;
        domain.validate(&out)?;
        Ok(out)
    }

    /// `dist(v, N_𝕏(ξ₊))` with `v = −γg − ∇ψ(ξ₊) + ∇ψ(ξ)`, zero exactly when
    /// `ξ₊` satisfies the prox optimality condition.
    ///
    /// Computed as the norm of the projection of `v` onto the tangent cone
    /// at `ξ₊`, which is the polar of the normal cone.
    pub fn prox_optimality_residual(
        &self,
        domain: &NonlinearDomain,
        xi: &[f64],
        grad: &[f64],
        gamma: f64,
        xi_plus: &[f64],
    ) -> f64 {
        let d = self.weights(xi.len());
        let v: Vec<f64> = (0..xi.len())
            .map(|i| -gamma * grad[i] - d[i] * (xi_plus[i] - xi[i]))
            .collect();
        let scale = domain
            .lo()
            .iter()
            .chain(domain.hi())
            .fold(1.0f64, |m, b| m.max(b.abs()));
        let active = domain.active_set(xi_plus, 1e-10 * scale);
        let t = domain.project_tangent(&v, &active);
        t.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// `γ⁻¹(ξ − ξ₊)`.
pub fn gradient_mapping(xi: &[f64], xi_plus: &[f64], gamma: f64) -> Vec<f64> {
    xi.iter().zip(xi_plus).map(|(a, b)| (a - b) / gamma).collect()
}
