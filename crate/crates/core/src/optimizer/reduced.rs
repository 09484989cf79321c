//! The reduced energy `𝒦̄(ξ) = min_w 𝒦(w, ξ)` and its gradient.

use crate::assembly::AssembledSystem;
use crate::error::{Error, Result};
use crate::updates::{conjugate_gradient, EnergyModel};
use nalgebra::{Cholesky, DVector};

/// Tolerance of the solves behind reduced quantities.
pub const REDUCED_CG_TOL: f64 = 1e-13;

/// `𝒦̄(ξ)` evaluated two ways, and the best linear parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedEnergy {
    /// `−½ℓᵀA⁻¹ℓ` via a Cholesky factorisation.
    pub value: f64,
    /// `𝒦(w*, ξ)` with `w*` from conjugate gradients.
    pub value_at_solution: f64,
    pub w_star: DVector<f64>,
}

/// `−½ℓᵀA⁻¹ℓ` at `ξ` via Cholesky only.
pub fn reduced_energy_value(model: &dyn EnergyModel, xi: &[f64]) -> Result<f64> {
    quadratic_value(&model.assemble(xi)?)
}

pub(crate) fn quadratic_value(sys: &AssembledSystem) -> Result<f64> {
    let chol = Cholesky::new(sys.a.clone()).ok_or(Error::NotPositiveDefinite {
        curvature: sys.lambda_min,
    })?;
    Ok(-0.5 * sys.l.dot(&chol.solve(&sys.l)))
}

/// Reduced energy at `ξ`; needs `A(ξ)` positive definite.
pub fn reduced_energy(model: &dyn EnergyModel, xi: &[f64], cg_tol: f64) -> Result<ReducedEnergy> {
    let sys = model.assemble(xi)?;
    let n = sys.n();
    let value = quadratic_value(&sys)?;
    let cg = conjugate_gradient(&sys.a, &sys.l, &DVector::zeros(n), cg_tol, 100 * n.max(10))?;
    let value_at_solution = sys.energy(&cg.x);
    Ok(ReducedEnergy {
        value,
        value_at_solution,
        w_star: cg.x,
    })
}

/// `∇𝒦̄(ξ) = ∇_𝕏𝒦(w*(ξ), ξ)`; `w*` is not differentiated.
pub fn reduced_gradient(model: &dyn EnergyModel, xi: &[f64]) -> Result<DVector<f64>> {
    let r = reduced_energy(model, xi, REDUCED_CG_TOL)?;
    model.grad_nonlinear(&r.w_star, xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisFamily, FamilyKind, NonlinearDomain, ParamGradMode};
    use crate::updates::DiscreteEnergy;
    use crate::variational::{scalar_fn, FnField, Problem, ProblemConstants, QuadratureRule};

    fn indicator_model(scale: f64, f: fn(f64) -> f64) -> DiscreteEnergy {
        let p = Problem::l2_approx(
            0.0,
            1.0,
            FnField::l2(scalar_fn(move |x| scale * f(x))),
            ProblemConstants::new(1.0, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        let fam = BasisFamily::new(
            FamilyKind::IndicatorPair,
            NonlinearDomain::new(vec![0.0; 3], vec![1.0; 3], vec![vec![0, 1, 2]], 0.0).unwrap(),
            (0.0, 1.0),
            ParamGradMode::Analytic,
        )
        .unwrap();
        DiscreteEnergy::with_default_mode(p, QuadratureRule::uniform(0.0, 1.0, 4, 4).unwrap(), fam).unwrap()
    }

    #[test]
    fn indicator_pair_closed_form() {
        let m = indicator_model(1.0, |x| x);
        let r = reduced_energy(&m, &[0.0, 0.5, 1.0], 1e-14).unwrap();
        assert!((r.w_star[0] - 0.25).abs() < 1e-14 && (r.w_star[1] - 0.75).abs() < 1e-14);
        assert!((r.value + 0.15625).abs() < 1e-14);
        assert!((r.value - r.value_at_solution).abs() <= 1e-10 * r.value.abs());
    }

    #[test]
    fn zero_load_gives_zero() {
        let m = indicator_model(0.0, |x| x);
        let r = reduced_energy(&m, &[0.1, 0.5, 0.9], 1e-14).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.w_star, DVector::zeros(2));
        let g = reduced_gradient(&m, &[0.1, 0.5, 0.9]).unwrap();
        assert_eq!(g, DVector::zeros(3));
    }

    #[test]
    fn quadratic_homogeneity_in_load() {
        let xi = [0.1, 0.4, 0.8];
        let a = reduced_energy(&indicator_model(1.0, |x| x * x), &xi, 1e-14).unwrap();
        let b = reduced_energy(&indicator_model(2.0, |x| x * x), &xi, 1e-14).unwrap();
        assert!((b.value - 4.0 * a.value).abs() <= 1e-13);
        assert!((&b.w_star - &a.w_star * 2.0).amax() <= 1e-13);
    }
}
