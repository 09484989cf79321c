//! The continuous variational problem: forms `a`, `ℓ`, the energy and the
//! Hilbert-space inner product, all realised by quadrature on an interval.

mod field;
mod quadrature;

pub use field::{scalar_fn, Combination, Field, FnField, Indicator, NodalField, PointValue, Regularity, ScalarFn};
pub use quadrature::{gauss_legendre, integrate, QuadratureRule};

use crate::error::{Error, Result};
use std::fmt;

/// Lax-Milgram constants of the problem. Supplied by the user; never estimated.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProblemConstants {
    /// Coercivity constant α.
    pub alpha: f64,
    /// Continuity constant ‖a‖.
    pub norm_a: f64,
    /// Dual norm ‖ℓ‖.
    pub norm_ell: f64,
}

impl ProblemConstants {
    pub fn new(alpha: f64, norm_a: f64, norm_ell: f64) -> Result<Self> {
        let c = Self {
            alpha,
            norm_a,
            norm_ell,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("norm_a", self.norm_a),
            ("norm_ell", self.norm_ell),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// The two model problems.
#[derive(Clone)]
pub enum ProblemForms {
    /// `a(u,v) = ∫uv`, `ℓ(v) = ∫fv`.
    L2Approx { target: FnField },
    /// `a(u,v) = ∫(K u'v' + σuv)` with Dirichlet data lifted by the linear
    /// interpolant `ū`; the unknown is `u - ū ∈ H¹₀`.
    DiffusionReaction {
        diffusivity: ScalarFn,
        reaction: ScalarFn,
        source: ScalarFn,
        g_lo: f64,
        g_hi: f64,
    },
}

impl fmt::Debug for ProblemForms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemForms::L2Approx { target } => f.debug_struct("L2Approx").field("target", target).finish(),
            ProblemForms::DiffusionReaction { g_lo, g_hi, .. } => f
                .debug_struct("DiffusionReaction")
                .field("g_lo", g_lo)
                .field("g_hi", g_hi)
                .finish_non_exhaustive(),
        }
    }
}

/// A variational problem on `Ω = (lo, hi)`.
#[derive(Debug, Clone)]
pub struct Problem {
    lo: f64,
    hi: f64,
    forms: ProblemForms,
    constants: ProblemConstants,
    breakpoints: Vec<f64>,
}

impl Problem {
    pub fn new(lo: f64, hi: f64, forms: ProblemForms, constants: ProblemConstants) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidArgument(format!(
                "domain ({lo}, {hi}) must be a nonempty finite interval"
            )));
        }
        constants.validate()?;
        let mut breakpoints = Vec::new();
        if let ProblemForms::L2Approx { target } = &forms {
            breakpoints.extend(target.breakpoints());
        }
        Ok(Self {
            lo,
            hi,
            forms,
            constants,
            breakpoints,
        })
    }

    pub fn l2_approx(lo: f64, hi: f64, target: FnField, constants: ProblemConstants) -> Result<Self> {
        Self::new(lo, hi, ProblemForms::L2Approx { target }, constants)
    }

    /// Declares points where coefficients or data are non-smooth.
    pub fn with_breakpoints(mut self, extra: &[f64]) -> Self {
        self.breakpoints.extend_from_slice(extra);
        self
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn forms(&self) -> &ProblemForms {
        &self.forms
    }

    pub fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    pub fn set_constants(&mut self, constants: ProblemConstants) {
        self.constants = constants;
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// True when `a` involves spatial derivatives (so trial fields must be H¹).
    pub fn needs_derivatives(&self) -> bool {
        matches!(self.forms, ProblemForms::DiffusionReaction { .. })
    }

    /// True when `U = H¹₀` and trial functions must vanish on the boundary.
    pub fn is_dirichlet(&self) -> bool {
        self.needs_derivatives()
    }

    /// The linear lifting `ū` of the Dirichlet data (zero for L² problems).
    pub fn lifting(&self, x: f64) -> PointValue {
        match &self.forms {
            ProblemForms::L2Approx { .. } => PointValue::ZERO,
            ProblemForms::DiffusionReaction { g_lo, g_hi, .. } => {
                let slope = (g_hi - g_lo) / (self.hi - self.lo);
                PointValue::new(g_lo + slope * (x - self.lo), slope)
            }
        }
    }

    /// Integrand of `a(u, v)` at `x`.
    #[inline]
    pub fn a_density(&self, x: f64, u: PointValue, v: PointValue) -> f64 {
        match &self.forms {
            ProblemForms::L2Approx { .. } => u.value * v.value,
            ProblemForms::DiffusionReaction {
                diffusivity, reaction, ..
            } => diffusivity(x) * u.deriv * v.deriv + reaction(x) * u.value * v.value,
        }
    }

    /// Integrand of `ℓ(v)` at `x`, including the lifting term.
    #[inline]
    pub fn ell_density(&self, x: f64, v: PointValue) -> f64 {
        match &self.forms {
            ProblemForms::L2Approx { target } => target.eval(x).value * v.value,
            ProblemForms::DiffusionReaction { source, .. } => {
                let ubar = self.lifting(x);
                source(x) * v.value - self.a_density(x, ubar, v)
            }
        }
    }

    /// Integrand of the `U` inner product: L² or full H¹.
    #[inline]
    pub fn u_density(&self, u: PointValue, v: PointValue) -> f64 {
        if self.needs_derivatives() {
            u.value * v.value + u.deriv * v.deriv
        } else {
            u.value * v.value
        }
    }

    fn check_regular(&self, fields: &[&dyn Field]) -> Result<()> {
        if self.needs_derivatives() && fields.iter().any(|f| f.regularity() == Regularity::L2) {
            return Err(Error::DerivativeOfL2Field);
        }
        Ok(())
    }

    /// `rule` split at every declared kink of the problem and of `fields`.
    pub fn refine_for(&self, rule: &QuadratureRule, fields: &[&dyn Field]) -> QuadratureRule {
        let mut extra = self.breakpoints.clone();
        for f in fields {
            extra.extend(f.breakpoints());
        }
        rule.refined(&extra)
    }
}

/// `a(u, v)`.
pub fn bilinear(problem: &Problem, rule: &QuadratureRule, u: &dyn Field, v: &dyn Field) -> Result<f64> {
    problem.check_regular(&[u, v])?;
    let rule = problem.refine_for(rule, &[u, v]);
    integrate(|x| problem.a_density(x, u.eval(x), v.eval(x)), &rule)
}

/// `ℓ(v)`.
pub fn linear_form(problem: &Problem, rule: &QuadratureRule, v: &dyn Field) -> Result<f64> {
    problem.check_regular(&[v])?;
    let rule = problem.refine_for(rule, &[v]);
    integrate(|x| problem.ell_density(x, v.eval(x)), &rule)
}

/// `(u, v)_U`.
pub fn inner_u(problem: &Problem, rule: &QuadratureRule, u: &dyn Field, v: &dyn Field) -> Result<f64> {
    problem.check_regular(&[u, v])?;
    let rule = problem.refine_for(rule, &[u, v]);
    integrate(|x| problem.u_density(u.eval(x), v.eval(x)), &rule)
}

/// `‖u‖_U`.
pub fn norm_u(problem: &Problem, rule: &QuadratureRule, u: &dyn Field) -> Result<f64> {
    Ok(inner_u(problem, rule, u, u)?.max(0.0).sqrt())
}

/// `‖u‖²_a`.
pub fn energy_norm_sq(problem: &Problem, rule: &QuadratureRule, u: &dyn Field) -> Result<f64> {
    bilinear(problem, rule, u, u)
}

/// `𝒥(u) = ½a(u,u) − ℓ(u)`.
pub fn energy(problem: &Problem, rule: &QuadratureRule, u: &dyn Field) -> Result<f64> {
    Ok(0.5 * bilinear(problem, rule, u, u)? - linear_form(problem, rule, u)?)
}

/// Returns `(𝒥(u) − 𝒥(u*), ½‖u − u*‖²_a)`; the two agree when `u*` solves
/// the problem.
pub fn energy_gap_check(
    problem: &Problem,
    rule: &QuadratureRule,
    u: &dyn Field,
    u_star: &dyn Field,
) -> Result<(f64, f64)> {
    let lhs = energy(problem, rule, u)? - energy(problem, rule, u_star)?;
    let diff = Combination::difference(u, u_star);
    let rhs = 0.5 * bilinear(problem, rule, &diff, &diff)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ProblemConstants {
        ProblemConstants::new(1.0, 1.0, 1.0).unwrap()
    }

    fn l2(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Problem {
        Problem::l2_approx(0.0, 1.0, FnField::l2(scalar_fn(f)), unit()).unwrap()
    }

    fn dr(k: f64, s: f64) -> Problem {
        Problem::new(
            0.0,
            1.0,
            ProblemForms::DiffusionReaction {
                diffusivity: scalar_fn(move |_| k),
                reaction: scalar_fn(move |_| s),
                source: scalar_fn(|_| 0.0),
                g_lo: 0.0,
                g_hi: 0.0,
            },
            unit(),
        )
        .unwrap()
    }

    fn rule() -> QuadratureRule {
        QuadratureRule::uniform(0.0, 1.0, 4, 6).unwrap()
    }

    fn lin(c0: f64, c1: f64) -> FnField {
        FnField::h1(scalar_fn(move |x| c0 + c1 * x), scalar_fn(move |_| c1))
    }

    #[test]
    fn bilinear_examples() {
        let p = l2(|_| 1.0);
        let one = FnField::constant(1.0);
        assert!((bilinear(&p, &rule(), &one, &one).unwrap() - 1.0).abs() < 1e-14);

        let q = dr(1.0, 0.0);
        let x = lin(0.0, 1.0);
        assert!((bilinear(&q, &rule(), &x, &x).unwrap() - 1.0).abs() < 1e-14);

        let a = Indicator { lo: 0.0, hi: 0.5 };
        let b = Indicator { lo: 0.5, hi: 1.0 };
        assert_eq!(bilinear(&p, &rule(), &a, &b).unwrap(), 0.0);
    }

    #[test]
    fn l2_field_rejected_by_h1_form() {
        let q = dr(1.0, 0.0);
        let a = Indicator { lo: 0.0, hi: 0.5 };
        assert_eq!(bilinear(&q, &rule(), &a, &a).unwrap_err(), Error::DerivativeOfL2Field);
    }

    #[test]
    fn linear_form_examples() {
        let p = l2(|x| x);
        let zero = FnField::zero();
        assert_eq!(linear_form(&p, &rule(), &zero).unwrap(), 0.0);
        let a = Indicator { lo: 0.0, hi: 0.5 };
        let b = Indicator { lo: 0.5, hi: 1.0 };
        assert!((linear_form(&p, &rule(), &a).unwrap() - 0.125).abs() < 1e-14);
        assert!((linear_form(&p, &rule(), &b).unwrap() - 0.375).abs() < 1e-14);
    }

    #[test]
    fn lifting_enters_load_by_parts() {
        // K = 1, σ = 0, f = 0, g = (0, 1): ū = x, ℓ(v) = −∫ v'.
        let p = Problem::new(
            0.0,
            1.0,
            ProblemForms::DiffusionReaction {
                diffusivity: scalar_fn(|_| 1.0),
                reaction: scalar_fn(|_| 0.0),
                source: scalar_fn(|_| 0.0),
                g_lo: 0.0,
                g_hi: 1.0,
            },
            unit(),
        )
        .unwrap();
        let v = FnField::h1(scalar_fn(|x| x * (1.0 - x)), scalar_fn(|x| 1.0 - 2.0 * x));
        assert!(linear_form(&p, &rule(), &v).unwrap().abs() < 1e-15);
        let v = FnField::h1(scalar_fn(|x| x * x), scalar_fn(|x| 2.0 * x));
        assert!((linear_form(&p, &rule(), &v).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn energy_examples() {
        let p = l2(|_| 1.0);
        assert_eq!(energy(&p, &rule(), &FnField::zero()).unwrap(), 0.0);
        let e = energy(&p, &rule(), &FnField::constant(1.0)).unwrap();
        assert!((e + 0.5).abs() < 1e-14);
        let e = energy(&p, &rule(), &FnField::constant(0.5)).unwrap();
        assert!((e + 0.375).abs() < 1e-14);
    }

    #[test]
    fn energy_gap_examples() {
        let p = l2(|_| 1.0);
        let star = FnField::constant(1.0);
        for (u, want) in [(1.0, 0.0), (0.0, 0.5), (0.5, 0.125)] {
            let (lhs, rhs) = energy_gap_check(&p, &rule(), &FnField::constant(u), &star).unwrap();
            assert!((lhs - want).abs() < 1e-14 && (rhs - want).abs() < 1e-14);
        }
    }

    #[test]
    fn energy_gap_manufactured_diffusion_reaction() {
        // -(u')' + 2u = f with u = sin(πx) + (1 + x) lifting-free part sin(πx).
        let pi = std::f64::consts::PI;
        let p = Problem::new(
            0.0,
            1.0,
            ProblemForms::DiffusionReaction {
                diffusivity: scalar_fn(|_| 1.0),
                reaction: scalar_fn(|_| 2.0),
                source: scalar_fn(move |x| (pi * pi + 2.0) * (pi * x).sin() + 2.0 * (1.0 + x)),
                g_lo: 1.0,
                g_hi: 2.0,
            },
            unit(),
        )
        .unwrap();
        let u0 = FnField::h1(
            scalar_fn(move |x| (pi * x).sin()),
            scalar_fn(move |x| pi * (pi * x).cos()),
        );
        let rule = QuadratureRule::uniform(0.0, 1.0, 16, 8).unwrap();
        let trial = FnField::h1(scalar_fn(|x| x * (1.0 - x)), scalar_fn(|x| 1.0 - 2.0 * x));
        let (lhs, rhs) = energy_gap_check(&p, &rule, &trial, &u0).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
    }

    #[test]
    fn constants_must_be_positive() {
        assert!(ProblemConstants::new(0.0, 1.0, 1.0).is_err());
        assert!(ProblemConstants::new(1.0, f64::INFINITY, 1.0).is_err());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn poly(c: Vec<f64>) -> FnField {
        let d = c.clone();
        FnField::h1(
            scalar_fn(move |x| c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)),
            scalar_fn(move |x| {
                d.iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, &ci)| acc * x + k as f64 * ci)
            }),
        )
    }

    fn piecewise(c: Vec<f64>, e: Vec<f64>, kink: f64) -> FnField {
        let left = poly(c);
        let right = poly(e);
        FnField::h1(
            {
                let (l, r) = (left.clone(), right.clone());
                scalar_fn(move |x| if x < kink { l.eval(x).value } else { r.eval(x).value })
            },
            scalar_fn(move |x| {
                if x < kink {
                    left.eval(x).deriv
                } else {
                    right.eval(x).deriv
                }
            }),
        )
        .with_breakpoints(vec![kink])
    }

    fn coeffs() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, 1..5)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn bilinear_is_symmetric(c1 in coeffs(), c2 in coeffs(), c3 in coeffs(), c4 in coeffs(),
                                 k1 in 0.05f64..0.95, k2 in 0.05f64..0.95, dr in any::<bool>()) {
            let forms = if dr {
                ProblemForms::DiffusionReaction {
                    diffusivity: scalar_fn(|x| 1.0 + x * x),
                    reaction: scalar_fn(|x| x),
                    source: scalar_fn(|_| 1.0),
                    g_lo: 0.0,
                    g_hi: 0.0,
                }
            } else {
                ProblemForms::L2Approx { target: FnField::constant(1.0) }
            };
            let p = Problem::new(0.0, 1.0, forms, ProblemConstants::new(1.0, 1.0, 1.0).unwrap()).unwrap();
            let rule = QuadratureRule::uniform(0.0, 1.0, 3, 6).unwrap();
            let u = piecewise(c1, c2, k1);
            let v = piecewise(c3, c4, k2);
            let uv = bilinear(&p, &rule, &u, &v).unwrap();
            let vu = bilinear(&p, &rule, &v, &u).unwrap();
            prop_assert!((uv - vu).abs() <= 1e-12 * (1.0 + uv.abs()));
        }
    }
}
