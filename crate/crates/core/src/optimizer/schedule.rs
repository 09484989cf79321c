//! Step-size schedules and the closed-form scheduling constants.

use crate::error::{Error, Result};
use crate::updates::EnergyModel;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Safety factor applied to sampled Lipschitz ratios.
pub const LIPSCHITZ_SAFETY: f64 = 2.0;

/// Where the Hölder constant `L(w)` of `∇_𝕏𝒦(w, ·)` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum LipschitzSource {
    Constant { l: f64 },
    Estimate { n_pairs: usize, seed: u64 },
}

/// Step sizes for the nonlinear update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSchedule {
    ConstantGamma {
        gamma: f64,
        /// Optional `L` used only by certificates.
        #[serde(default)]
        lipschitz: Option<f64>,
    },
    /// `γ_k = ζμ / L_{ν,ε}(w_k)`.
    LipschitzAdaptive {
        zeta: f64,
        l_source: LipschitzSource,
        eps_holder: f64,
        nu: f64,
    },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::ConstantGamma { gamma, lipschitz } => {
                if !(gamma.is_finite() && gamma > 0.0) {
                    return Err(Error::InvalidArgument(format!("gamma = {gamma} must be positive")));
                }
                if let Some(l) = lipschitz {
                    if !(l.is_finite() && l >= 0.0) {
                        return Err(Error::InvalidArgument(format!("lipschitz = {l}")));
                    }
                }
            }
            StepSchedule::LipschitzAdaptive {
                zeta,
                l_source,
                eps_holder,
                nu,
            } => {
                if !(zeta > 0.0 && zeta < 2.0) {
                    return Err(Error::InvalidArgument(format!("zeta = {zeta} must lie in (0, 2)")));
                }
                hoelder_to_lipschitz(1.0, nu, eps_holder)?;
                match l_source {
                    LipschitzSource::Constant { l } if !(l.is_finite() && l > 0.0) => {
                        return Err(Error::InvalidArgument(format!("L = {l} must be positive")));
                    }
                    LipschitzSource::Estimate { n_pairs: 0, .. } => {
                        return Err(Error::InvalidArgument("n_pairs must be positive".into()));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// `(ν, ε)` of the schedule; a constant step is treated as Lipschitz.
    pub fn holder(&self) -> (f64, f64) {
        match *self {
            StepSchedule::ConstantGamma { .. } => (1.0, 0.0),
            StepSchedule::LipschitzAdaptive { nu, eps_holder, .. } => (nu, eps_holder),
        }
    }
}

/// `L_{ν,ε}` such that a `(ν, L)`-Hölder gradient obeys a quadratic upper
/// bound with constant `L_{ν,ε}` up to an additive `ε`.
pub fn hoelder_to_lipschitz(l: f64, nu: f64, eps: f64) -> Result<f64> {
    if !(l.is_finite() && l >= 0.0) {
        return Err(Error::InvalidArgument(format!("L = {l} must be nonnegative")));
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidArgument(format!("nu = {nu} must lie in (0, 1]")));
    }
    if nu == 1.0 {
        return Ok(l);
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps = {eps} must be positive when nu < 1"
        )));
    }
    let e = (1.0 - nu) / (1.0 + nu);
    Ok(((1.0 / (2.0 * eps)) * e).powf(e) * l.powf(2.0 / (1.0 + nu)))
}

/// The `ζ` minimising the iteration budget for `r = L_max/(μ²β_max)`.
pub fn optimal_zeta(l_max: f64, mu: f64, beta_max: f64) -> f64 {
    let r = l_max / (mu * mu * beta_max);
    if r <= 0.75 {
        1.0 - (1.0 - r).sqrt()
    } else {
        0.5
    }
}

/// Number of iterations after which some iterate is `τ`-quasi-stationary.
pub fn iteration_budget(tau: f64, mu: f64, zeta: f64, l_max: f64, beta_max: f64, gap: f64) -> f64 {
    let s = (mu * mu * zeta * (2.0 - zeta) / l_max).min(1.0 / beta_max);
    2.0 * mu * mu * (1.0 + zeta) * (1.0 + zeta) * gap / (tau * tau * s)
}

/// Sampled Hölder constant of `ξ ↦ ∇_𝕏𝒦(w, ξ)` times [`LIPSCHITZ_SAFETY`].
///
/// Pairs come from one seeded stream: even pairs are independent draws,
/// odd pairs are small perturbations. The `i`-th pair does not depend on
/// `n_pairs`, so the estimate is nondecreasing in `n_pairs`.
pub fn estimate_lipschitz_l(
    model: &dyn EnergyModel,
    w: &DVector<f64>,
    nu: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    let dom = model.domain();
    let n = dom.dim();
    let diam = dom.diameter();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for i in 0..n_pairs {
        let xi = dom.sample(&mut rng);
        let other = dom.sample(&mut rng);
        let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let radius = 1e-2 * diam * rng.random_range(0.01..=1.0);
        let eta = if i % 2 == 0 {
            other
        } else {
            let y: Vec<f64> = xi.iter().zip(&dir).map(|(x, d)| x + radius * d).collect();
            dom.project(&y)?
        };
        let dist = xi.iter().zip(&eta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist <= 1e-12 * diam.max(1.0) {
            continue;
        }
        let g1 = model.grad_nonlinear(w, &xi)?;
        let g2 = model.grad_nonlinear(w, &eta)?;
        best = best.max((g1 - g2).norm() / dist.powf(nu));
    }
    Ok(LIPSCHITZ_SAFETY * best)
}
