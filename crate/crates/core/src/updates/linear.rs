//! Updates of the linear parameters at fixed `ξ`.

use crate::assembly::AssembledSystem;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// How `w` is updated after each nonlinear step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinearRule {
    /// Conjugate gradients to `‖Aw − ℓ‖ ≤ rel_tol‖ℓ‖`.
    FullSolveCg { rel_tol: f64, max_iters: usize },
    /// One exact line-search step along the residual.
    SteepestDescent,
    /// Keeps `w` fixed; only for synthetic objectives.
    Frozen,
}

impl LinearRule {
    pub fn full(rel_tol: f64) -> Self {
        LinearRule::FullSolveCg {
            rel_tol,
            max_iters: 10_000,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, LinearRule::FullSolveCg { .. })
    }
}

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Solves `Ax = b` for symmetric positive definite `A` starting from `x0`.
///
/// Stops when `‖b − Ax‖ ≤ rel_tol·‖b‖`. Fails on nonpositive curvature or
/// when `max_iters` is exhausted.
pub fn conjugate_gradient(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x0: &DVector<f64>,
    rel_tol: f64,
    max_iters: usize,
) -> Result<CgOutcome> {
    let bnorm = b.norm();
    let target = rel_tol * bnorm;
    let mut x = x0.clone();
    let mut r = b - a * &x;
    let mut rr = r.norm_squared();
    if rr.sqrt() <= target {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual_norm: rr.sqrt(),
        });
    }
    let mut p = r.clone();
    for it in 1..=max_iters {
        let ap = a * &p;
        let curv = p.dot(&ap);
        if curv <= 0.0 || !curv.is_finite() {
            return Err(Error::NotPositiveDefinite { curvature: curv });
        }
        let alpha = rr / curv;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        // Recompute the true residual occasionally to stop drift.
        if it % 50 == 0 {
            r = b - a * &x;
        }
        let rr_new = r.norm_squared();
        if rr_new.sqrt() <= target {
            let res = (b - a * &x).norm();
            if res <= target {
                return Ok(CgOutcome {
                    x,
                    iterations: it,
                    residual_norm: res,
                });
            }
            r = b - a * &x;
            p = r.clone();
            rr = r.norm_squared();
            continue;
        }
        p = &r + &p * (rr_new / rr);
        rr = rr_new;
    }
    Err(Error::CgNotConverged {
        iterations: max_iters,
        residual: (b - a * &x).norm(),
    })
}

/// Applies the rule to `w` on the system `sys`.
pub fn update_linear(rule: &LinearRule, sys: &AssembledSystem, w: &DVector<f64>) -> Result<DVector<f64>> {
    match *rule {
        LinearRule::FullSolveCg { rel_tol, max_iters } => {
            Ok(conjugate_gradient(&sys.a, &sys.l, w, rel_tol, max_iters)?.x)
        }
        LinearRule::SteepestDescent => steepest_descent_step(sys, w),
        LinearRule::Frozen => Ok(w.clone()),
    }
}

/// `w + βr` with `r = ℓ − Aw` and `β = (r,r)/(r,Ar)`.
pub fn steepest_descent_step(sys: &AssembledSystem, w: &DVector<f64>) -> Result<DVector<f64>> {
    let r = &sys.l - &sys.a * w;
    if r.norm() <= 1e-14 * (1.0 + sys.l.norm()) {
        return Ok(w.clone());
    }
    let ar = &sys.a * &r;
    let curv = r.dot(&ar);
    if curv <= 0.0 || !curv.is_finite() {
        return Err(Error::NotPositiveDefinite { curvature: curv });
    }
    let beta = r.norm_squared() / curv;
    Ok(w + r * beta)
}

/// Energy drop of a linear update and the guaranteed drop
/// `½λ_max⁻¹‖∇_W𝒦(w)‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecreasePair {
    pub achieved: f64,
    pub guaranteed: f64,
}

/// `(𝒦(w) − 𝒦(w₊), ½λ_max(A)⁻¹‖Aw − ℓ‖²)`.
pub fn decrease_check(sys: &AssembledSystem, w: &DVector<f64>, w_plus: &DVector<f64>) -> DecreasePair {
    let achieved = sys.energy(w) - sys.energy(w_plus);
    let g2 = sys.grad_w(w).norm_squared();
    let guaranteed = if g2 == 0.0 { 0.0 } else { 0.5 * g2 / sys.lambda_max };
    DecreasePair { achieved, guaranteed }
}

/// Upper bound `½(αω)⁻¹‖∇_W𝒦(w)‖²` on the drop of any update, attained
/// only by an exact solve.
pub fn decrease_upper_bound(sys: &AssembledSystem, alpha: f64, w: &DVector<f64>) -> f64 {
    0.5 * sys.grad_w(w).norm_squared() / (alpha * sys.omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn system(a: DMatrix<f64>, l: Vec<f64>) -> AssembledSystem {
        let g = DMatrix::identity(a.nrows(), a.ncols());
        AssembledSystem::from_parts(a, DVector::from_vec(l), g).unwrap()
    }

    fn diag12() -> AssembledSystem {
        system(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])),
            vec![1.0, 2.0],
        )
    }

    #[test]
    fn cg_on_identity() {
        let sys = system(DMatrix::identity(3, 3), vec![1.0, 0.0, 0.0]);
        let w = update_linear(&LinearRule::full(1e-14), &sys, &DVector::zeros(3)).unwrap();
        assert_eq!(w, DVector::from_vec(vec![1.0, 0.0, 0.0]));
    }

    #[test]
    fn steepest_descent_hand_example() {
        let w = steepest_descent_step(&diag12(), &DVector::zeros(2)).unwrap();
        assert!((w[0] - 5.0 / 9.0).abs() < 1e-15 && (w[1] - 10.0 / 9.0).abs() < 1e-15);
        let d = decrease_check(&diag12(), &DVector::zeros(2), &w);
        assert!((d.achieved - 112.5 / 81.0).abs() < 1e-14);
        assert!((d.guaranteed - 1.25).abs() < 1e-15);
    }

    #[test]
    fn full_solve_decrease() {
        let sys = diag12();
        let w0 = DVector::zeros(2);
        let w = update_linear(&LinearRule::full(1e-14), &sys, &w0).unwrap();
        let d = decrease_check(&sys, &w0, &w);
        assert!((d.achieved - 1.5).abs() < 1e-14 && d.achieved >= d.guaranteed);
        assert!(d.achieved <= decrease_upper_bound(&sys, 1.0, &w0) + 1e-14);
    }

    #[test]
    fn optimal_point_is_fixed() {
        let sys = diag12();
        let w = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(steepest_descent_step(&sys, &w).unwrap(), w);
        assert_eq!(update_linear(&LinearRule::full(1e-12), &sys, &w).unwrap(), w);
        let d = decrease_check(&sys, &w, &w);
        assert_eq!((d.achieved, d.guaranteed), (0.0, 0.0));
    }

    #[test]
    fn indefinite_is_rejected() {
        let sys = AssembledSystem::from_parts(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0])),
            DVector::from_vec(vec![0.0, 1.0]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        assert!(matches!(
            steepest_descent_step(&sys, &DVector::zeros(2)),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(matches!(
            update_linear(&LinearRule::full(1e-12), &sys, &DVector::zeros(2)),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn cg_reports_non_convergence() {
        let a = DMatrix::from_fn(6, 6, |i, j| 1.0 / (i + j + 1) as f64);
        let b = DVector::from_element(6, 1.0);
        let err = conjugate_gradient(&a, &b, &DVector::zeros(6), 1e-15, 2).unwrap_err();
        assert!(matches!(err, Error::CgNotConverged { iterations: 2, .. }));
    }

    proptest! {
        #[test]
        fn decrease_guarantee_holds_for_both_rules(
            entries in prop::collection::vec(-1.0f64..1.0, 16),
            shift in 0.1f64..3.0,
            l in prop::collection::vec(-2.0f64..2.0, 4),
            w0 in prop::collection::vec(-2.0f64..2.0, 4),
        ) {
            let m = DMatrix::from_row_slice(4, 4, &entries);
            let a = &m * m.transpose() + DMatrix::identity(4, 4) * shift;
            let sys = system(a, l);
            let w0 = DVector::from_vec(w0);
            for rule in [LinearRule::full(1e-13), LinearRule::SteepestDescent] {
                let w = update_linear(&rule, &sys, &w0).unwrap();
                let d = decrease_check(&sys, &w0, &w);
                prop_assert!(d.achieved >= d.guaranteed - 1e-9 * (1.0 + d.guaranteed));
            }
            let w = update_linear(&LinearRule::full(1e-13), &sys, &w0).unwrap();
            prop_assert!((&sys.a * &w - &sys.l).norm() <= 1e-13 * sys.l.norm() + 1e-300);
        }
    }
}
