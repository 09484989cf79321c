//! The discrete energy `𝒦(w, ξ)` and its gradients.

use crate::assembly::{self, AssembledSystem};
use crate::basis::{basis_norms, BasisFamily, FamilyKind, NonlinearDomain, ParamJacobian};
use crate::error::{Error, Result};
use crate::variational::{PointValue, Problem, ProblemForms, QuadratureRule};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// A parametric quadratic energy `𝒦(w, ξ) = ½wᵀA(ξ)w − wᵀℓ(ξ)`.
///
/// Implemented by Galerkin discretisations and by synthetic objectives used
/// to exercise the certificates.
pub trait EnergyModel: Sync {
    fn domain(&self) -> &NonlinearDomain;

    fn n_linear(&self) -> usize;

    fn assemble(&self, xi: &[f64]) -> Result<AssembledSystem>;

    /// `∇_𝕏 𝒦(w, ξ)`.
    fn grad_nonlinear(&self, w: &DVector<f64>, xi: &[f64]) -> Result<DVector<f64>>;

    /// `‖φ(ξ)‖_{U,2}`.
    fn phi_norm(&self, xi: &[f64]) -> Result<f64>;

    fn energy(&self, w: &DVector<f64>, xi: &[f64]) -> Result<f64> {
        Ok(self.assemble(xi)?.energy(w))
    }
}

/// How `∇_𝕏 𝒦` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GradientMode {
    /// Chain rule through `a` and `ℓ` with `∂φ/∂ξ` from the family.
    Assembled,
    /// Hand-derived formula (indicator pair).
    ClosedForm,
    /// Central differences of `𝒦` in `ξ`.
    FiniteDifference { h: f64 },
}

/// Galerkin energy of a problem over a basis family.
#[derive(Debug, Clone)]
pub struct DiscreteEnergy {
    problem: Problem,
    rule: QuadratureRule,
    family: BasisFamily,
    mode: GradientMode,
}

impl DiscreteEnergy {
    pub fn new(problem: Problem, rule: QuadratureRule, family: BasisFamily, mode: GradientMode) -> Result<Self> {
        assembly::check_compatible(&problem, &family)?;
        match mode {
            GradientMode::Assembled => {
                if matches!(family.kind(), FamilyKind::IndicatorPair) {
                    return Err(Error::UnsupportedGradientMode(
                        "indicator pair has no basis parameter derivative".into(),
                    ));
                }
                if problem.needs_derivatives() && !family.param_derivative_in_h1() {
                    return Err(Error::UnsupportedGradientMode(
                        "parameter derivatives of this basis are not in H1; use finite differences".into(),
                    ));
                }
            }
            GradientMode::ClosedForm => {
                let ok = matches!(family.kind(), FamilyKind::IndicatorPair)
                    && matches!(problem.forms(), ProblemForms::L2Approx { .. });
                if !ok {
                    return Err(Error::UnsupportedGradientMode(
                        "closed-form gradient exists only for the indicator pair in L2".into(),
                    ));
                }
            }
            GradientMode::FiniteDifference { h } => {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::InvalidArgument(format!("finite-difference step {h}")));
                }
            }
        }
        Ok(Self {
            problem,
            rule,
            family,
            mode,
        })
    }

    /// The mode used when none is configured.
    pub fn default_mode(problem: &Problem, family: &BasisFamily) -> GradientMode {
        match family.kind() {
            FamilyKind::IndicatorPair => GradientMode::ClosedForm,
            FamilyKind::FreeKnotHats { .. } if problem.needs_derivatives() => {
                GradientMode::FiniteDifference { h: 1e-6 }
            }
            _ => GradientMode::Assembled,
        }
    }

    pub fn with_default_mode(problem: Problem, rule: QuadratureRule, family: BasisFamily) -> Result<Self> {
        let mode = Self::default_mode(&problem, &family);
        Self::new(problem, rule, family, mode)
    }

    /// Same energy with another gradient mode.
    pub fn with_mode(&self, mode: GradientMode) -> Result<Self> {
        Self::new(self.problem.clone(), self.rule.clone(), self.family.clone(), mode)
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn family(&self) -> &BasisFamily {
        &self.family
    }

    pub fn mode(&self) -> GradientMode {
        self.mode
    }

    /// Assembly without the domain check, for difference stencils that may
    /// step just outside `𝕏`.
    fn assemble_unchecked(&self, xi: &[f64]) -> Result<AssembledSystem> {
        let n = self.family.n_linear();
        let rule = assembly::rule_for(&self.problem, &self.family, &self.rule, xi);
        let mut a = nalgebra::DMatrix::zeros(n, n);
        let mut l = DVector::zeros(n);
        let mut g = nalgebra::DMatrix::zeros(n, n);
        let mut phi = vec![PointValue::ZERO; n];
        for (x, wt) in rule.points() {
            self.family.eval_into(xi, x, &mut phi);
            for i in 0..n {
                l[i] += wt * self.problem.ell_density(x, phi[i]);
                for j in 0..n {
                    a[(i, j)] += wt * self.problem.a_density(x, phi[j], phi[i]);
                    g[(i, j)] += wt * self.problem.u_density(phi[j], phi[i]);
                }
            }
        }
        AssembledSystem::from_parts(a, l, g)
    }

    fn grad_assembled(&self, w: &DVector<f64>, xi: &[f64]) -> Result<DVector<f64>> {
        let n_nl = self.family.n_nonlinear();
        let n_l = self.family.n_linear();
        let rule = assembly::rule_for(&self.problem, &self.family, &self.rule, xi);
        let mut phi = vec![PointValue::ZERO; n_l];
        let mut jac = ParamJacobian::zeros(n_nl, n_l);
        let mut grad = DVector::zeros(n_nl);
        for (x, wt) in rule.points() {
            self.family.eval_into(xi, x, &mut phi);
            self.family.eval_dparam_into(xi, x, &mut jac)?;
            let mut r = PointValue::ZERO;
            for (wk, p) in w.iter().zip(&phi) {
                r.value += wk * p.value;
                r.deriv += wk * p.deriv;
            }
            for i in 0..n_nl {
                let dr = jac.contract_row(i, w.as_slice());
                let v = self.problem.a_density(x, dr, r) - self.problem.ell_density(x, dr);
                if !v.is_finite() {
                    return Err(Error::NonFiniteIntegrand { node: x, value: v });
                }
                grad[i] += wt * v;
            }
        }
        Ok(grad)
    }

    /// Derivatives of `½(w₁²(b−a) + w₂²(c−b)) − w₁∫_a^b f − w₂∫_b^c f`.
    fn grad_indicator(&self, w: &DVector<f64>, xi: &[f64]) -> Result<DVector<f64>> {
        let ProblemForms::L2Approx { target } = self.problem.forms() else {
            return Err(Error::UnsupportedGradientMode("closed form needs L2".into()));
        };
        use crate::variational::Field;
        let f = |x: f64| target.eval(x).value;
        let (w1, w2) = (w[0], w[1]);
        let (a, b, c) = (xi[0], xi[1], xi[2]);
        Ok(DVector::from_vec(vec![
            -0.5 * w1 * w1 + w1 * f(a),
            0.5 * w1 * w1 - 0.5 * w2 * w2 + (w2 - w1) * f(b),
            0.5 * w2 * w2 - w2 * f(c),
        ]))
    }

    fn grad_fd(&self, w: &DVector<f64>, xi: &[f64], h: f64) -> Result<DVector<f64>> {
        let n = xi.len();
        let mut grad = DVector::zeros(n);
        let mut p = xi.to_vec();
        for i in 0..n {
            p[i] = xi[i] + h;
            let up = self.assemble_unchecked(&p)?.energy(w);
            p[i] = xi[i] - h;
            let dn = self.assemble_unchecked(&p)?.energy(w);
            p[i] = xi[i];
            grad[i] = (up - dn) / (2.0 * h);
        }
        Ok(grad)
    }
}

impl EnergyModel for DiscreteEnergy {
    fn domain(&self) -> &NonlinearDomain {
        self.family.domain()
    }

    fn n_linear(&self) -> usize {
        self.family.n_linear()
    }

    fn assemble(&self, xi: &[f64]) -> Result<AssembledSystem> {
        assembly::assemble(&self.problem, &self.rule, &self.family, xi)
    }

    fn grad_nonlinear(&self, w: &DVector<f64>, xi: &[f64]) -> Result<DVector<f64>> {
        self.family.domain().validate(xi)?;
        if w.len() != self.family.n_linear() {
            return Err(Error::InvalidArgument(format!(
                "expected {} linear parameters, got {}",
                self.family.n_linear(),
                w.len()
            )));
        }
        match self.mode {
            GradientMode::Assembled => self.grad_assembled(w, xi),
            GradientMode::ClosedForm => self.grad_indicator(w, xi),
            GradientMode::FiniteDifference { h } => self.grad_fd(w, xi, h),
        }
    }

    fn phi_norm(&self, xi: &[f64]) -> Result<f64> {
        basis_norms(&self.family, xi, &self.problem, &self.rule)
    }
}
