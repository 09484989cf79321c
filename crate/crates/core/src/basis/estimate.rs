//! Norms of the basis and empirical estimates of its boundedness and
//! Hölder constants. The estimates are diagnostics, not rigorous bounds.

use super::family::{BasisFamily, ParamJacobian};
use crate::error::{Error, Result};
use crate::variational::{PointValue, Problem, QuadratureRule, Regularity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Safety factor applied to the fitted Hölder constant.
pub const HOELDER_SAFETY: f64 = 1.5;

fn check_regularity(family: &BasisFamily, problem: &Problem) -> Result<()> {
    if problem.needs_derivatives() && family.regularity() == Regularity::L2 {
        return Err(Error::DerivativeOfL2Field);
    }
    Ok(())
}

/// `Σ_k ‖φ_k(ξ) − φ_k(η)‖²_U`; with `eta = None` this is `‖φ(ξ)‖²_{U,2}`.
pub fn basis_diff_norm_sq(
    family: &BasisFamily,
    xi: &[f64],
    eta: Option<&[f64]>,
    problem: &Problem,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_regularity(family, problem)?;
    family.domain().validate(xi)?;
    let mut extra = problem.breakpoints().to_vec();
    extra.extend(family.breakpoints(xi));
    if let Some(eta) = eta {
        family.domain().validate(eta)?;
        extra.extend(family.breakpoints(eta));
    }
    let rule = rule.refined(&extra);
    let n_l = family.n_linear();
    let mut a = vec![PointValue::ZERO; n_l];
    let mut b = vec![PointValue::ZERO; n_l];
    let mut sum = 0.0;
    for (x, wt) in rule.points() {
        family.eval_into(xi, x, &mut a);
        if let Some(eta) = eta {
            family.eval_into(eta, x, &mut b);
        }
        for k in 0..n_l {
            let d = PointValue::new(a[k].value - b[k].value, a[k].deriv - b[k].deriv);
            let v = problem.u_density(d, d);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand { node: x, value: v });
            }
            sum += wt * v;
        }
    }
    Ok(sum)
}

/// `Σ_{i,k} ‖∂_iφ_k(ξ) − ∂_iφ_k(η)‖²_U`; with `eta = None` this is
/// `‖∇_𝕏φ(ξ)‖²_{U,2,2}`. Needs `∂φ/∂ξ` in `U`.
pub fn param_jacobian_diff_norm_sq(
    family: &BasisFamily,
    xi: &[f64],
    eta: Option<&[f64]>,
    problem: &Problem,
    rule: &QuadratureRule,
) -> Result<f64> {
    if problem.needs_derivatives() && !family.param_derivative_in_h1() {
        return Err(Error::DerivativeOfL2Field);
    }
    family.domain().validate(xi)?;
    let mut extra = problem.breakpoints().to_vec();
    extra.extend(family.breakpoints(xi));
    if let Some(eta) = eta {
        family.domain().validate(eta)?;
        extra.extend(family.breakpoints(eta));
    }
    let rule = rule.refined(&extra);
    let (n_nl, n_l) = (family.n_nonlinear(), family.n_linear());
    let mut a = ParamJacobian::zeros(n_nl, n_l);
    let mut b = ParamJacobian::zeros(n_nl, n_l);
    let mut sum = 0.0;
    for (x, wt) in rule.points() {
        family.eval_dparam_into(xi, x, &mut a)?;
        if let Some(eta) = eta {
            family.eval_dparam_into(eta, x, &mut b)?;
        }
        for i in 0..n_nl {
            for k in 0..n_l {
                let (p, q) = (a.get(i, k), b.get(i, k));
                let d = PointValue::new(p.value - q.value, p.deriv - q.deriv);
                let v = problem.u_density(d, d);
                if !v.is_finite() {
                    return Err(Error::NonFiniteIntegrand { node: x, value: v });
                }
                sum += wt * v;
            }
        }
    }
    Ok(sum)
}

/// `‖φ(ξ)‖_{U,2} = (Σ_k ‖φ_k(ξ)‖²_U)^{1/2}`.
pub fn basis_norms(family: &BasisFamily, xi: &[f64], problem: &Problem, rule: &QuadratureRule) -> Result<f64> {
    Ok(basis_diff_norm_sq(family, xi, None, problem, rule)?.sqrt())
}

/// `‖φ_k(ξ)‖_U` for each `k`.
pub fn basis_function_norms(
    family: &BasisFamily,
    xi: &[f64],
    problem: &Problem,
    rule: &QuadratureRule,
) -> Result<Vec<f64>> {
    check_regularity(family, problem)?;
    family.domain().validate(xi)?;
    let mut extra = problem.breakpoints().to_vec();
    extra.extend(family.breakpoints(xi));
    let rule = rule.refined(&extra);
    let n_l = family.n_linear();
    let mut buf = vec![PointValue::ZERO; n_l];
    let mut sums = vec![0.0; n_l];
    for (x, wt) in rule.points() {
        family.eval_into(xi, x, &mut buf);
        for k in 0..n_l {
            sums[k] += wt * problem.u_density(buf[k], buf[k]);
        }
    }
    Ok(sums.into_iter().map(f64::sqrt).collect())
}

/// Lower estimate of `sup_ξ ‖φ(ξ)‖_{U,2}`: maximum over seeded feasible draws
/// and the projected box corners.
pub fn estimate_sup_norm(
    family: &BasisFamily,
    problem: &Problem,
    rule: &QuadratureRule,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Vec<f64>> = (0..n_samples).map(|_| family.domain().sample(&mut rng)).collect();
    points.extend(family.domain().projected_corners());
    let mut best: f64 = 0.0;
    for xi in &points {
        best = best.max(basis_norms(family, xi, problem, rule)?);
    }
    Ok(best)
}

/// Fitted Hölder exponent and constant of `ξ ↦ φ(ξ)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HoelderEstimate {
    pub nu: f64,
    pub l_phi: f64,
    pub pairs_used: usize,
}

/// Log-log regression of `‖φ(ξ) − φ(η)‖_{U,2}` against `‖ξ − η‖`.
///
/// Pairs are drawn at separations spread log-uniformly over three decades
/// below a tenth of the domain diameter. The exponent is clipped to `(0, 1]`;
/// the constant is the smallest one that puts every sample under the fitted
/// power law, times [`HOELDER_SAFETY`].
pub fn estimate_hoelder(
    family: &BasisFamily,
    problem: &Problem,
    rule: &QuadratureRule,
    pair_samples: usize,
    seed: u64,
) -> Result<HoelderEstimate> {
    if pair_samples < 10 {
        return Err(Error::InvalidArgument("need at least 10 pairs".into()));
    }
    let dom = family.domain();
    let diam = dom.diameter();
    let n = dom.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut logs: Vec<(f64, f64)> = Vec::with_capacity(pair_samples);
    for _ in 0..pair_samples {
        let xi = dom.sample(&mut rng);
        let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let dn = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        let scale = diam * 10f64.powf(rng.random_range(-4.0..=-1.0));
        if dn == 0.0 {
            continue;
        }
        let target: Vec<f64> = xi.iter().zip(&dir).map(|(x, d)| x + scale * d / dn).collect();
        let eta = dom.project(&target)?;
        let dist = xi.iter().zip(&eta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist <= 1e-14 * diam.max(1.0) {
            continue;
        }
        let dphi = basis_diff_norm_sq(family, &xi, Some(&eta), problem, rule)?.sqrt();
        if dphi <= 0.0 {
            continue;
        }
        logs.push((dist.ln(), dphi.ln()));
    }
    if logs.len() < 2 {
        return Err(Error::Numerical("all Hölder sample pairs were degenerate".into()));
    }
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 1.0 };
    let nu = slope.clamp(1e-3, 1.0);
    let log_l = logs
        .iter()
        .map(|(lx, ly)| ly - nu * lx)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(HoelderEstimate {
        nu,
        l_phi: HOELDER_SAFETY * log_l.exp(),
        pairs_used: logs.len(),
    })
}
