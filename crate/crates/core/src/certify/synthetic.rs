//! Synthetic objectives embedded as one-dimensional quadratic energies, and
//! the reduced objective that certificates evaluate.
//!
//! A smooth `f: 𝕏 → ℝ` is embedded with `n_L = 1`, `A = G = [1]` and
//! `ℓ(ξ) = ½ − f(ξ)`, so that `𝒦(1, ξ) = f(ξ)`. Run with the frozen linear
//! rule and `w = 1`, the driver performs mirror descent on `f`.

use super::oracle::{MinimiserOracle, OptimalSet, OracleKind};
use crate::assembly::AssembledSystem;
use crate::basis::NonlinearDomain;
use crate::error::Result;
use crate::optimizer::reduced_energy_value;
use crate::updates::{EnergyModel, LinearRule};
use nalgebra::{DMatrix, DVector};

fn embed(f: f64) -> Result<AssembledSystem> {
    AssembledSystem::from_parts(
        DMatrix::from_element(1, 1, 1.0),
        DVector::from_element(1, 0.5 - f),
        DMatrix::from_element(1, 1, 1.0),
    )
}

/// `f(x, y) = (x² + y² − 1)²` on `[−1.5, 1.5]²`.
#[derive(Debug, Clone)]
pub struct CircleModel {
    domain: NonlinearDomain,
}

impl CircleModel {
    /// Lipschitz constant of `∇f` on the box: the radial curvature
    /// `12r² − 4` at the corners.
    pub const L_BAR: f64 = 50.0;

    pub fn new() -> Self {
        CircleModel {
            domain: NonlinearDomain::boxed(vec![-1.5; 2], vec![1.5; 2]).expect("valid box"),
        }
    }

    pub fn f(xi: &[f64]) -> f64 {
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        (r2 - 1.0) * (r2 - 1.0)
    }

    pub fn grad_f(xi: &[f64]) -> [f64; 2] {
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        let c = 4.0 * (r2 - 1.0);
        [c * xi[0], c * xi[1]]
    }
}

impl Default for CircleModel {
    fn default() -> Self {
        Self::new()
    }
}

impl EnergyModel for CircleModel {
    fn domain(&self) -> &NonlinearDomain {
        &self.domain
    }

    fn n_linear(&self) -> usize {
        1
    }

    fn assemble(&self, xi: &[f64]) -> Result<AssembledSystem> {
        self.domain.validate(xi)?;
        embed(Self::f(xi))
    }

    fn grad_nonlinear(&self, w: &DVector<f64>, xi: &[f64]) -> Result<DVector<f64>> {
        self.domain.validate(xi)?;
        let g = Self::grad_f(xi);
        Ok(DVector::from_vec(vec![w[0] * g[0], w[0] * g[1]]))
    }

    fn phi_norm(&self, _xi: &[f64]) -> Result<f64> {
        Ok(1.0)
    }
}

/// The unit circle with `𝒦* = 0`.
pub fn circle_oracle() -> MinimiserOracle {
    MinimiserOracle {
        kind: OracleKind::Analytic,
        k_star: 0.0,
        k_star_lower: 0.0,
        set: OptimalSet::Sphere {
            center: vec![0.0, 0.0],
            radius: 1.0,
        },
        resolution: None,
        l_bar: Some(CircleModel::L_BAR),
        skipped: 0,
    }
}

/// `f(ξ) = ½‖ξ‖²` on `[−1, 1]^n`, whose gradient is 1-Lipschitz.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    domain: NonlinearDomain,
}

impl QuadraticModel {
    pub fn new(dim: usize) -> Self {
        QuadraticModel {
            domain: NonlinearDomain::boxed(vec![-1.0; dim], vec![1.0; dim]).expect("valid box"),
        }
    }
}

impl EnergyModel for QuadraticModel {
    fn domain(&self) -> &NonlinearDomain {
        &self.domain
    }

    fn n_linear(&self) -> usize {
        1
    }

    fn assemble(&self, xi: &[f64]) -> Result<AssembledSystem> {
        self.domain.validate(xi)?;
        embed(0.5 * xi.iter().map(|x| x * x).sum::<f64>())
    }

    fn grad_nonlinear(&self, w: &DVector<f64>, xi: &[f64]) -> Result<DVector<f64>> {
        self.domain.validate(xi)?;
        Ok(DVector::from_iterator(xi.len(), xi.iter().map(|x| w[0] * x)))
    }

    fn phi_norm(&self, _xi: &[f64]) -> Result<f64> {
        Ok(1.0)
    }
}

/// The objective `ξ ↦ 𝒦̄(ξ)` seen by certificates: the reduced energy, or
/// `𝒦(w, ξ)` at a frozen `w`.
pub struct ReducedObjective<'a> {
    model: &'a dyn EnergyModel,
    frozen: Option<DVector<f64>>,
}

impl<'a> ReducedObjective<'a> {
    pub fn exact(model: &'a dyn EnergyModel) -> Self {
        ReducedObjective { model, frozen: None }
    }

    pub fn frozen(model: &'a dyn EnergyModel, w: DVector<f64>) -> Self {
        ReducedObjective { model, frozen: Some(w) }
    }

    /// The objective a run with `rule` started from `w0` descends.
    pub fn for_rule(model: &'a dyn EnergyModel, rule: &LinearRule, w0: &DVector<f64>) -> Self {
        match rule {
            LinearRule::Frozen => Self::frozen(model, w0.clone()),
            _ => Self::exact(model),
        }
    }

    pub fn model(&self) -> &'a dyn EnergyModel {
        self.model
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen.is_some()
    }

    pub fn value(&self, xi: &[f64]) -> Result<f64> {
        match &self.frozen {
            Some(w) => self.model.energy(w, xi),
            None => reduced_energy_value(self.model, xi),
        }
    }

    pub fn gradient(&self, xi: &[f64]) -> Result<DVector<f64>> {
        match &self.frozen {
            Some(w) => self.model.grad_nonlinear(w, xi),
            None => crate::optimizer::reduced_gradient(self.model, xi),
        }
    }
}
