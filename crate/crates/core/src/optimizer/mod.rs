//! The two-step alternating minimiser.
//!
//! Each epoch takes a Bregman proximal step in `ξ` against `∇_𝕏𝒦(w_k, ξ_k)`
//! and then updates `w` on the system assembled at the new `ξ`. The lowest
//! energy seen is tracked and receives a tight final solve.

mod reduced;
mod schedule;

pub use reduced::{reduced_energy, reduced_energy_value, reduced_gradient, ReducedEnergy, REDUCED_CG_TOL};
pub use schedule::{
    estimate_lipschitz_l, hoelder_to_lipschitz, iteration_budget, optimal_zeta, LipschitzSource, StepSchedule,
    LIPSCHITZ_SAFETY,
};

use crate::assembly::{require_spd, AssembledSystem};
use crate::error::{Error, Result};
use crate::updates::{
    conjugate_gradient, decrease_check, gradient_mapping, update_linear, DecreasePair, EnergyModel, Geometry,
    LinearRule,
};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// When to stop before `max_epochs`. `None` disables a test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingCriteria {
    /// Stop once `‖ξ_{k+1} − ξ_k‖ ≤ eps_x` (times `γ_k` if `scale_by_gamma`).
    #[serde(default)]
    pub eps_x: Option<f64>,
    #[serde(default)]
    pub scale_by_gamma: bool,
    /// Stop once `|𝒦_{k+1} − 𝒦_k| ≤ eps_k`.
    #[serde(default)]
    pub eps_k: Option<f64>,
    /// Measure the plateau relative to `|𝒦_k|`.
    #[serde(default)]
    pub relative_plateau: bool,
    pub max_epochs: usize,
}

impl StoppingCriteria {
    /// Only the epoch limit.
    pub fn epochs(max_epochs: usize) -> Self {
        StoppingCriteria {
            eps_x: None,
            scale_by_gamma: false,
            eps_k: None,
            relative_plateau: false,
            max_epochs,
        }
    }

    /// `‖ξ_{k+1} − ξ_k‖ ≤ εγ_k`, the stopping rule whose trigger certifies
    /// an `ε`-bound on the gradient mapping.
    pub fn from_surrogate(eps: f64, max_epochs: usize) -> Self {
        StoppingCriteria {
            eps_x: Some(eps),
            scale_by_gamma: true,
            ..Self::epochs(max_epochs)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps_x", self.eps_x), ("eps_k", self.eps_k)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidArgument(format!("{name} = {v} must be nonnegative")));
                }
            }
        }
        Ok(())
    }

    /// Threshold on `‖ξ_{k+1} − ξ_k‖` at step size `gamma`.
    pub fn step_threshold(&self, gamma: f64) -> Option<f64> {
        self.eps_x.map(|e| if self.scale_by_gamma { e * gamma } else { e })
    }
}

/// Everything `run` needs besides the model and the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub linear: LinearRule,
    pub geometry: Geometry,
    pub schedule: StepSchedule,
    pub stopping: StoppingCriteria,
    /// Lower bound required of `λ_min(G(ξ))` at every visited `ξ`.
    pub omega_min: f64,
    /// Relative residual of the final solve.
    #[serde(default = "default_final_tol")]
    pub final_tol: f64,
}

fn default_final_tol() -> f64 {
    1e-13
}

impl RunConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        self.geometry.validate(dim)?;
        self.schedule.validate()?;
        self.stopping.validate()?;
        if !(self.omega_min.is_finite() && self.omega_min > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "omega_min = {} must be positive",
                self.omega_min
            )));
        }
        if !(self.final_tol > 0.0 && self.final_tol < 1.0) {
            return Err(Error::InvalidArgument(format!("final_tol = {}", self.final_tol)));
        }
        Ok(())
    }
}

/// Why the loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxEpochs,
    ParameterStabilised,
    EnergyPlateau,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::MaxEpochs => "max_epochs",
            Termination::ParameterStabilised => "parameter_stabilised",
            Termination::EnergyPlateau => "energy_plateau",
        }
    }
}

/// One row of the run: the state `(w_k, ξ_k)` and how it was reached.
///
/// Row 0 is the state after the initial linear update; its step fields
/// are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub w: Vec<f64>,
    pub xi: Vec<f64>,
    /// `𝒦(w_k, ξ_k)`.
    pub energy: f64,
    /// `𝒦̄(ξ_k)`, or `𝒦(w_k, ξ_k)` under the frozen rule.
    pub reduced_energy: f64,
    /// Drop of the linear update that produced `w_k`.
    pub decrease: DecreasePair,
    /// `‖∇_W𝒦(w_{k−1}, ξ_k)‖`.
    pub grad_w_norm: f64,
    pub lambda_max: f64,
    pub omega: f64,
    /// `‖φ(ξ_k)‖_{U,2}`.
    pub phi_norm: f64,
    /// `γ_{k−1}`.
    pub gamma: Option<f64>,
    /// `L_{ν,ε}(w_{k−1})` behind `γ_{k−1}`, if known.
    pub lipschitz: Option<f64>,
    /// `‖(ξ_{k−1} − ξ_k)/γ_{k−1}‖`.
    pub grad_map_norm: Option<f64>,
    pub step_norm: Option<f64>,
    pub prox_residual: Option<f64>,
    /// `∇_𝕏𝒦(w_{k−1}, ξ_{k−1})`.
    pub grad_nonlinear: Option<Vec<f64>>,
}

/// The full history of a run and its result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rows: Vec<IterationRecord>,
    /// Row index of the lowest recorded energy (first one on ties).
    pub best_iter: usize,
    pub termination: Termination,
    /// The returned iterate: `ξ_min` with `w` after the final solve.
    pub final_xi: Vec<f64>,
    pub final_w: Vec<f64>,
    pub final_energy: f64,
}

impl RunRecord {
    pub fn best(&self) -> &IterationRecord {
        &self.rows[self.best_iter]
    }

    /// Number of nonlinear steps taken.
    pub fn epochs(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.energy).collect()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn reduced_value(rule: &LinearRule, sys: &AssembledSystem, w: &DVector<f64>) -> Result<f64> {
    if matches!(rule, LinearRule::Frozen) {
        return Ok(sys.energy(w));
    }
    reduced::quadratic_value(sys)
}

/// Step size for the step taken from `(w, ξ)` and the `L_{ν,ε}` behind it.
fn step_size(
    model: &dyn EnergyModel,
    cfg: &RunConfig,
    w: &DVector<f64>,
    grad: &DVector<f64>,
) -> Result<(f64, Option<f64>)> {
    match cfg.schedule {
        StepSchedule::ConstantGamma { gamma, lipschitz } => Ok((gamma, lipschitz)),
        StepSchedule::LipschitzAdaptive {
            zeta,
            l_source,
            eps_holder,
            nu,
        } => {
            let l_raw = match l_source {
                LipschitzSource::Constant { l } => l,
                LipschitzSource::Estimate { n_pairs, seed } => estimate_lipschitz_l(model, w, nu, n_pairs, seed)?,
            };
            let l = hoelder_to_lipschitz(l_raw, nu, eps_holder)?;
            let mu = cfg.geometry.mu();
            let gamma = if l > 0.0 {
                zeta * mu / l
            } else {
                // The gradient is constant in ξ: one step reaches the boundary.
                let g = grad.norm();
                if g > 0.0 {
                    model.domain().diameter().max(1.0) / g
                } else {
                    1.0
                }
            };
            Ok((gamma, Some(l)))
        }
    }
}

/// Runs the alternating minimiser from `(w0, ξ0)`.
///
/// Aborts when `λ_min(G(ξ)) < omega_min` at any visited `ξ`.
pub fn run(model: &dyn EnergyModel, cfg: &RunConfig, xi0: &[f64], w0: &DVector<f64>) -> Result<RunRecord> {
    let dom = model.domain();
    cfg.validate(dom.dim())?;
    dom.validate(xi0)?;
    if w0.len() != model.n_linear() {
        return Err(Error::InvalidArgument(format!(
            "expected {} linear parameters, got {}",
            model.n_linear(),
            w0.len()
        )));
    }

    // Initial linear update.
    let mut xi = xi0.to_vec();
    let sys = model.assemble(&xi)?;
    require_spd(&sys, cfg.omega_min)?;
    let mut w = update_linear(&cfg.linear, &sys, w0)?;
    let mut energy = sys.energy(&w);
    let mut rows = vec![IterationRecord {
        iter: 0,
        w: w.as_slice().to_vec(),
        xi: xi.clone(),
        energy,
        reduced_energy: reduced_value(&cfg.linear, &sys, &w)?,
        decrease: decrease_check(&sys, w0, &w),
        grad_w_norm: sys.grad_w(w0).norm(),
        lambda_max: sys.lambda_max,
        omega: sys.omega,
        phi_norm: model.phi_norm(&xi)?,
        gamma: None,
        lipschitz: None,
        grad_map_norm: None,
        step_norm: None,
        prox_residual: None,
        grad_nonlinear: None,
    }];
    let mut best_iter = 0;
    let mut best_w = w.clone();
    let mut termination = Termination::MaxEpochs;

    for k in 0..cfg.stopping.max_epochs {
        let grad = model.grad_nonlinear(&w, &xi)?;
        let (gamma, lipschitz) = step_size(model, cfg, &w, &grad)?;
        let xi_next = cfg.geometry.prox_step(dom, &xi, grad.as_slice(), gamma)?;
        let prox_residual = cfg
            .geometry
            .prox_optimality_residual(dom, &xi, grad.as_slice(), gamma, &xi_next);
        let gmap = gradient_mapping(&xi, &xi_next, gamma);
        let step_norm = dist(&xi, &xi_next);

        let sys = model.assemble(&xi_next)?;
        require_spd(&sys, cfg.omega_min)?;
        let w_next = update_linear(&cfg.linear, &sys, &w)?;
        let energy_next = sys.energy(&w_next);
        rows.push(IterationRecord {
            iter: k + 1,
            w: w_next.as_slice().to_vec(),
            xi: xi_next.clone(),
            energy: energy_next,
            reduced_energy: reduced_value(&cfg.linear, &sys, &w_next)?,
            decrease: decrease_check(&sys, &w, &w_next),
            grad_w_norm: sys.grad_w(&w).norm(),
            lambda_max: sys.lambda_max,
            omega: sys.omega,
            phi_norm: model.phi_norm(&xi_next)?,
            gamma: Some(gamma),
            lipschitz,
            grad_map_norm: Some(gmap.iter().map(|g| g * g).sum::<f64>().sqrt()),
            step_norm: Some(step_norm),
            prox_residual: Some(prox_residual),
            grad_nonlinear: Some(grad.as_slice().to_vec()),
        });
        if energy_next < rows[best_iter].energy {
            best_iter = k + 1;
            best_w = w_next.clone();
        }

        let plateau = cfg.stopping.eps_k.is_some_and(|e| {
            let scale = if cfg.stopping.relative_plateau {
                energy.abs()
            } else {
                1.0
            };
            (energy_next - energy).abs() <= e * scale
        });
        xi = xi_next;
        w = w_next;
        energy = energy_next;
        if cfg.stopping.step_threshold(gamma).is_some_and(|t| step_norm <= t) {
            termination = Termination::ParameterStabilised;
            break;
        }
        if plateau {
            termination = Termination::EnergyPlateau;
            break;
        }
    }

    // Final solve at the best parameters.
    let best = &rows[best_iter];
    let final_xi = best.xi.clone();
    let (final_w, final_energy) = if matches!(cfg.linear, LinearRule::Frozen) {
        (best_w, best.energy)
    } else {
        let sys = model.assemble(&final_xi)?;
        let n = sys.n();
        let solved = conjugate_gradient(&sys.a, &sys.l, &best_w, cfg.final_tol, 100 * n.max(100))?.x;
        let e = sys.energy(&solved);
        // Rounding can leave a converged solve a hair above its start.
        if e <= best.energy {
            (solved, e)
        } else {
            (best_w, best.energy)
        }
    };
    Ok(RunRecord {
        rows,
        best_iter,
        termination,
        final_xi,
        final_w: final_w.as_slice().to_vec(),
        final_energy,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::basis::{BasisFamily, FamilyKind, NonlinearDomain, ParamGradMode};
    use crate::updates::DiscreteEnergy;
    use crate::variational::{scalar_fn, FnField, Problem, ProblemConstants, QuadratureRule};

    const S: f64 = 0.1;

    fn gauss(c: f64) -> impl Fn(f64) -> f64 {
        move |x| (-(x - c) * (x - c) / (2.0 * S * S)).exp()
    }

    pub(crate) fn gaussian_fit() -> DiscreteEnergy {
        let p = Problem::l2_approx(
            0.0,
            1.0,
            FnField::l2(scalar_fn(gauss(0.5))),
            ProblemConstants::new(1.0, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        let fam = BasisFamily::new(
            FamilyKind::GaussianBumps { widths: vec![S] },
            NonlinearDomain::boxed(vec![0.2], vec![0.8]).unwrap(),
            (0.0, 1.0),
            ParamGradMode::Analytic,
        )
        .unwrap();
        DiscreteEnergy::with_default_mode(p, QuadratureRule::uniform(0.0, 1.0, 32, 10).unwrap(), fam).unwrap()
    }

    fn cfg(linear: LinearRule, gamma: f64, stopping: StoppingCriteria) -> RunConfig {
        RunConfig {
            linear,
            geometry: Geometry::Euclidean,
            schedule: StepSchedule::ConstantGamma { gamma, lipschitz: None },
            stopping,
            omega_min: 1e-8,
            final_tol: 1e-13,
        }
    }

    #[test]
    fn zero_epochs_is_a_galerkin_solve() {
        let m = gaussian_fit();
        let rec = run(
            &m,
            &cfg(LinearRule::full(1e-13), 0.01, StoppingCriteria::epochs(0)),
            &[0.3],
            &DVector::zeros(1),
        )
        .unwrap();
        assert_eq!(rec.rows.len(), 1);
        assert_eq!(rec.termination, Termination::MaxEpochs);
        let r = reduced_energy(&m, &[0.3], 1e-14).unwrap();
        assert!((rec.final_w[0] - r.w_star[0]).abs() <= 1e-12 * r.w_star[0].abs());
        assert!((rec.final_energy - r.value).abs() <= 1e-12 * r.value.abs());
        assert!((rec.rows[0].reduced_energy - r.value).abs() <= 1e-14);
    }

    #[test]
    fn gaussian_fit_recovers_center() {
        let m = gaussian_fit();
        let c = cfg(
            LinearRule::full(1e-13),
            0.01,
            StoppingCriteria {
                eps_x: Some(1e-10),
                ..StoppingCriteria::epochs(2000)
            },
        );
        let rec = run(&m, &c, &[0.3], &DVector::zeros(1)).unwrap();
        assert!((rec.final_xi[0] - 0.5).abs() <= 1e-3, "{:?}", rec.final_xi);
        // The exact minimum is attained at the centre with w = 1.
        let k_star = reduced_energy(&m, &[0.5], 1e-14).unwrap().value;
        assert!((rec.final_energy - k_star).abs() <= 1e-8);
        let e = rec.energies();
        for i in 1..e.len() {
            assert!(e[i] <= e[i - 1] + 1e-10 * e[i - 1].abs());
        }
        assert!(e.iter().all(|v| rec.final_energy <= *v));
        assert!(rec.final_energy <= e[0]);
    }

    #[test]
    fn optimal_start_stops_at_once() {
        let m = gaussian_fit();
        let c = cfg(
            LinearRule::full(1e-13),
            0.01,
            StoppingCriteria {
                eps_x: Some(1e-8),
                ..StoppingCriteria::epochs(100)
            },
        );
        let rec = run(&m, &c, &[0.5], &DVector::zeros(1)).unwrap();
        assert_eq!(rec.termination, Termination::ParameterStabilised);
        assert_eq!(rec.epochs(), 1);
        assert!(rec.rows[1].step_norm.unwrap() <= 1e-8);
    }

    #[test]
    fn surrogate_stop_fires_iff_step_within_eps_gamma() {
        let m = gaussian_fit();
        let (eps, gamma) = (0.05, 0.01);
        let c = cfg(
            LinearRule::SteepestDescent,
            gamma,
            StoppingCriteria::from_surrogate(eps, 500),
        );
        let rec = run(&m, &c, &[0.3], &DVector::zeros(1)).unwrap();
        assert_eq!(rec.termination, Termination::ParameterStabilised);
        let n = rec.rows.len();
        for r in &rec.rows[1..n - 1] {
            assert!(r.step_norm.unwrap() > eps * gamma);
        }
        let last = &rec.rows[n - 1];
        assert!(last.step_norm.unwrap() <= eps * gamma);
        assert!(last.grad_map_norm.unwrap() <= eps * (1.0 + 1e-12));
    }

    #[test]
    fn plateau_stop() {
        let m = gaussian_fit();
        let c = cfg(
            LinearRule::full(1e-13),
            0.01,
            StoppingCriteria {
                eps_k: Some(1e-6),
                ..StoppingCriteria::epochs(1000)
            },
        );
        let rec = run(&m, &c, &[0.3], &DVector::zeros(1)).unwrap();
        assert_eq!(rec.termination, Termination::EnergyPlateau);
        let n = rec.rows.len();
        assert!((rec.rows[n - 1].energy - rec.rows[n - 2].energy).abs() <= 1e-6);
    }

    #[test]
    fn best_iterate_is_tracked_with_large_steps() {
        // Overshooting steps make the energy oscillate.
        let m = gaussian_fit();
        let c = cfg(LinearRule::SteepestDescent, 0.2, StoppingCriteria::epochs(30));
        let rec = run(&m, &c, &[0.3], &DVector::zeros(1)).unwrap();
        let min = rec.energies().into_iter().fold(f64::INFINITY, f64::min);
        assert_eq!(rec.best().energy, min);
        assert_eq!(rec.final_xi, rec.best().xi);
        assert!(rec.final_energy <= min);
        assert!(rec.final_energy <= rec.rows[0].energy);
    }

    #[test]
    fn decrease_and_spectral_bound_recorded() {
        let m = gaussian_fit();
        for rule in [LinearRule::full(1e-13), LinearRule::SteepestDescent] {
            let rec = run(
                &m,
                &cfg(rule, 0.01, StoppingCriteria::epochs(20)),
                &[0.3],
                &DVector::zeros(1),
            )
            .unwrap();
            for r in &rec.rows {
                assert!(r.decrease.achieved >= r.decrease.guaranteed - 1e-9);
                assert!(r.lambda_max <= r.phi_norm * r.phi_norm * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn adaptive_schedule_uses_estimate() {
        let m = gaussian_fit();
        let c = RunConfig {
            schedule: StepSchedule::LipschitzAdaptive {
                zeta: 1.0,
                l_source: LipschitzSource::Estimate { n_pairs: 16, seed: 7 },
                eps_holder: 0.0,
                nu: 1.0,
            },
            ..cfg(LinearRule::full(1e-13), 1.0, StoppingCriteria::epochs(5))
        };
        let rec = run(&m, &c, &[0.3], &DVector::zeros(1)).unwrap();
        for r in &rec.rows[1..] {
            let l = r.lipschitz.unwrap();
            assert!(l > 0.0);
            assert!((r.gamma.unwrap() - 1.0 / l).abs() <= 1e-15 * (1.0 / l));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = gaussian_fit();
        let c = cfg(LinearRule::full(1e-13), 0.01, StoppingCriteria::epochs(1));
        assert!(run(&m, &c, &[0.9], &DVector::zeros(1)).is_err());
        assert!(run(&m, &c, &[0.3], &DVector::zeros(2)).is_err());
        let bad = RunConfig {
            omega_min: 0.0,
            ..c.clone()
        };
        assert!(run(&m, &bad, &[0.3], &DVector::zeros(1)).is_err());
        let strict = RunConfig { omega_min: 10.0, ..c };
        assert!(matches!(
            run(&m, &strict, &[0.3], &DVector::zeros(1)),
            Err(Error::AssumptionSpdFailed { .. })
        ));
    }
}
