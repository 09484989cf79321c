//! Empirical checks of the a-priori bounds on best linear parameters and on
//! the moduli of continuity of the energy gradients.

use super::{CertificateEntry, Status, Tolerance, WorstCase};
use crate::assembly::kappa_max;
use crate::basis::{basis_diff_norm_sq, param_jacobian_diff_norm_sq, NonlinearDomain};
use crate::error::{Error, Result};
use crate::optimizer::{reduced_energy_value, reduced_gradient};
use crate::updates::{DiscreteEnergy, EnergyModel};
use nalgebra::{Cholesky, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Seeded feasible pairs `(ξ, η)`. Even pairs are independent draws, odd
/// pairs are perturbations at a scale of 1% of the diameter.
pub fn parameter_pairs(domain: &NonlinearDomain, n: usize, seed: u64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 0.01 * domain.diameter();
    (0..n)
        .map(|i| {
            let xi = domain.sample(&mut rng);
            let eta = if i % 2 == 0 {
                domain.sample(&mut rng)
            } else {
                let y: Vec<f64> = xi.iter().map(|x| x + scale * rng.random_range(-1.0..=1.0)).collect();
                domain.project(&y)?
            };
            Ok((xi, eta))
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn solve(model: &DiscreteEnergy, xi: &[f64]) -> Result<(DVector<f64>, f64)> {
    let sys = model.assemble(xi)?;
    let chol = Cholesky::new(sys.a.clone()).ok_or(Error::NotPositiveDefinite {
        curvature: sys.lambda_min,
    })?;
    Ok((chol.solve(&sys.l), sys.omega))
}

/// `‖w*(ξ)‖ ≤ ‖ℓ‖M/(αω_min)` at every sampled point and
/// `‖w*(ξ) − w*(η)‖ ≤ (1 + 2κ)(‖ℓ‖/(αω_min))‖φ(ξ) − φ(η)‖_{U,2}` at every
/// pair.
///
/// `M` is the larger of `m_phi` and the norms `‖φ‖_{U,2}` seen on the
/// samples; `κ` is the larger condition-number bound. Not asserted if some
/// sample has `ω(ξ) < ω_min`.
pub fn best_linear_bounds_check(
    model: &DiscreteEnergy,
    pairs: &[(Vec<f64>, Vec<f64>)],
    m_phi: f64,
    omega_min: f64,
    tol: Tolerance,
) -> Result<Vec<CertificateEntry>> {
    let norm_anchor = "‖w*(ξ)‖ ≤ ‖ℓ‖·sup‖φ‖/(αω_min)";
    let lip_anchor = "‖w*(ξ) − w*(η)‖ ≤ (1 + 2κ)(‖ℓ‖/(αω_min))‖φ(ξ) − φ(η)‖_{U,2}";
    let problem = model.problem();
    let c = problem.constants();
    let rows: Vec<(f64, f64, f64, f64, f64, f64)> = pairs
        .par_iter()
        .map(|(xi, eta)| {
            let (wx, ox) = solve(model, xi)?;
            let (we, oe) = solve(model, eta)?;
            let dphi = basis_diff_norm_sq(model.family(), xi, Some(eta), problem, model.rule())?.sqrt();
            let mx = model.phi_norm(xi)?;
            let me = model.phi_norm(eta)?;
            Ok((wx.norm(), we.norm(), (wx - we).norm(), dphi, mx.max(me), ox.min(oe)))
        })
        .collect::<Result<_>>()?;
    if let Some(r) = rows.iter().find(|r| r.5 < omega_min) {
        let why = format!("ω = {:e} < ω_min = {omega_min:e}", r.5);
        return Ok(vec![
            CertificateEntry::skipped("best_linear_norm", norm_anchor, Status::NotAsserted, why.clone()),
            CertificateEntry::skipped("best_linear_lipschitz", lip_anchor, Status::NotAsserted, why),
        ]);
    }
    let m = rows.iter().fold(m_phi, |acc, r| acc.max(r.4));
    let kappa = kappa_max(c, m, omega_min);
    let base = c.norm_ell / (c.alpha * omega_min);
    let mut nb = WorstCase::new("best_linear_norm", norm_anchor, tol);
    let mut lb = WorstCase::new("best_linear_lipschitz", lip_anchor, tol);
    for (i, r) in rows.iter().enumerate() {
        nb.push(r.0.max(r.1), base * m, || format!("pair {i}"));
        lb.push(r.2, (1.0 + 2.0 * kappa) * base * r.3, || format!("pair {i}"));
    }
    let detail = format!("M = {m:e}, κ = {kappa:e}");
    Ok(vec![
        nb.finish().with_detail(detail.clone()),
        lb.finish().with_detail(detail),
    ])
}

/// A pair of points `(v, ξ)`, `(w, η)` in the full parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularitySample {
    pub v: Vec<f64>,
    pub xi: Vec<f64>,
    pub w: Vec<f64>,
    pub eta: Vec<f64>,
}

impl RegularitySample {
    /// Feasible `ξ, η` from [`parameter_pairs`] with linear parameters
    /// drawn from `[−1, 1]^{n_L}`.
    pub fn draw(domain: &NonlinearDomain, n_linear: usize, n: usize, seed: u64) -> Result<Vec<Self>> {
        let pairs = parameter_pairs(domain, n, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        Ok(pairs
            .into_iter()
            .map(|(xi, eta)| {
                let v: Vec<f64> = (0..n_linear).map(|_| rng.random_range(-1.0..=1.0)).collect();
                let w: Vec<f64> = (0..n_linear).map(|_| rng.random_range(-1.0..=1.0)).collect();
                RegularitySample { v, xi, w, eta }
            })
            .collect())
    }
}

struct RegularityRow {
    lhs_w: f64,
    rhs_w: f64,
    x: Option<(f64, f64)>,
    x_err: Option<Error>,
}

/// The moduli of continuity of `∇_W𝒦` and `∇_𝕏𝒦` with per-pair maxima
/// `M_φ = max ‖φ‖_{U,2}`, `M_W = max(‖v‖, ‖w‖)` and `M_∇φ = max ‖∇_𝕏φ‖_{U,2,2}`:
///
/// * `‖∇_W𝒦(v,ξ) − ∇_W𝒦(w,η)‖ ≤ ‖a‖M_φ²‖v − w‖ + (2‖a‖M_WM_φ + ‖ℓ‖)‖φ(ξ) − φ(η)‖`;
/// * `‖∇_𝕏𝒦(v,ξ) − ∇_𝕏𝒦(w,η)‖ ≤ (2‖a‖M_WM_φ + ‖ℓ‖)M_∇φ‖v − w‖
///   + ‖a‖M_W²M_∇φ‖φ(ξ) − φ(η)‖ + M_W(‖a‖M_WM_φ + ‖ℓ‖)‖∇φ(ξ) − ∇φ(η)‖`.
///
/// The second entry is not asserted when `∂φ/∂ξ` is not in `U`.
pub fn regularity_constants_check(
    model: &DiscreteEnergy,
    samples: &[RegularitySample],
    tol: Tolerance,
) -> Result<Vec<CertificateEntry>> {
    let w_anchor = "‖∇_W𝒦(v,ξ) − ∇_W𝒦(w,η)‖ ≤ ‖a‖M_φ²‖v − w‖ + (2‖a‖M_WM_φ + ‖ℓ‖)‖φ(ξ) − φ(η)‖";
    let x_anchor =
        "‖∇_𝕏𝒦(v,ξ) − ∇_𝕏𝒦(w,η)‖ ≤ (2‖a‖M_WM_φ + ‖ℓ‖)M_∇φ‖v − w‖ + ‖a‖M_W²M_∇φ‖Δφ‖ + M_W(‖a‖M_WM_φ + ‖ℓ‖)‖Δ∇φ‖";
    let problem = model.problem();
    let fam = model.family();
    let rule = model.rule();
    let c = problem.constants();
    let rows: Vec<RegularityRow> = samples
        .par_iter()
        .map(|s| {
            let v = DVector::from_column_slice(&s.v);
            let w = DVector::from_column_slice(&s.w);
            let sx = model.assemble(&s.xi)?;
            let se = model.assemble(&s.eta)?;
            let m_phi = model.phi_norm(&s.xi)?.max(model.phi_norm(&s.eta)?);
            let m_w = norm(&s.v).max(norm(&s.w));
            let dvw = (&v - &w).norm();
            let dphi = basis_diff_norm_sq(fam, &s.xi, Some(&s.eta), problem, rule)?.sqrt();
            let lhs_w = (sx.grad_w(&v) - se.grad_w(&w)).norm();
            let rhs_w = c.norm_a * m_phi * m_phi * dvw + (2.0 * c.norm_a * m_w * m_phi + c.norm_ell) * dphi;

            let jac = || -> Result<(f64, f64, f64)> {
                let jx = param_jacobian_diff_norm_sq(fam, &s.xi, None, problem, rule)?.sqrt();
                let je = param_jacobian_diff_norm_sq(fam, &s.eta, None, problem, rule)?.sqrt();
                let dj = param_jacobian_diff_norm_sq(fam, &s.xi, Some(&s.eta), problem, rule)?.sqrt();
                Ok((jx, je, dj))
            };
            let (x, x_err) = match jac() {
                Ok((jx, je, dj)) => {
                    let m_dphi = jx.max(je);
                    let lhs = (model.grad_nonlinear(&v, &s.xi)? - model.grad_nonlinear(&w, &s.eta)?).norm();
                    let rhs = (2.0 * c.norm_a * m_w * m_phi + c.norm_ell) * m_dphi * dvw
                        + c.norm_a * m_w * m_w * m_dphi * dphi
                        + m_w * (c.norm_a * m_w * m_phi + c.norm_ell) * dj;
                    (Some((lhs, rhs)), None)
                }
                Err(e) => (None, Some(e)),
            };
            Ok(RegularityRow { lhs_w, rhs_w, x, x_err })
        })
        .collect::<Result<_>>()?;

    let mut wc = WorstCase::new("regularity_grad_w", w_anchor, tol);
    for (i, r) in rows.iter().enumerate() {
        wc.push(r.lhs_w, r.rhs_w, || format!("pair {i}"));
    }
    let x_entry = if let Some(e) = rows.iter().find_map(|r| r.x_err.as_ref()) {
        CertificateEntry::skipped(
            "regularity_grad_x",
            x_anchor,
            Status::NotAsserted,
            format!("parameter derivatives of the basis not in U: {e}"),
        )
    } else {
        let mut xc = WorstCase::new("regularity_grad_x", x_anchor, tol);
        for (i, r) in rows.iter().enumerate() {
            if let Some((l, h)) = r.x {
                xc.push(l, h, || format!("pair {i}"));
            }
        }
        xc.finish()
    };
    Ok(vec![wc.finish(), x_entry])
}

/// `∇𝒦̄(ξ) = ∇_𝕏𝒦(w*(ξ), ξ)` against central differences of `𝒦̄` with
/// step `h·max(1, |ξ_i|)`, at every point. Coordinates whose two-sided
/// stencil leaves the domain fall back to a one-sided difference.
///
/// `lhs` is the worst `‖g − g_FD‖ / max(‖g‖, ‖g_FD‖, floor)`.
pub fn gradient_identity_check(
    model: &dyn EnergyModel,
    points: &[Vec<f64>],
    h: f64,
    rel_tol: f64,
    floor: f64,
) -> Result<CertificateEntry> {
    let anchor = "‖∇𝒦̄(ξ) − FD(𝒦̄)(ξ)‖ ≤ tol·‖∇𝒦̄(ξ)‖";
    if !(h > 0.0 && rel_tol >= 0.0 && floor > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "h = {h}, rel_tol = {rel_tol}, floor = {floor}"
        )));
    }
    let dom = model.domain();
    let rows: Vec<f64> = points
        .par_iter()
        .map(|xi| {
            dom.validate(xi)?;
            let g = reduced_gradient(model, xi)?;
            let mut fd = DVector::zeros(xi.len());
            for i in 0..xi.len() {
                let step = h * xi[i].abs().max(1.0);
                let mut p = xi.clone();
                let mut m = xi.clone();
                p[i] += step;
                m[i] -= step;
                let (p_ok, m_ok) = (dom.contains(&p), dom.contains(&m));
                fd[i] = match (p_ok, m_ok) {
                    (true, true) => {
                        (reduced_energy_value(model, &p)? - reduced_energy_value(model, &m)?) / (2.0 * step)
                    }
                    (true, false) => (reduced_energy_value(model, &p)? - reduced_energy_value(model, xi)?) / step,
                    (false, true) => (reduced_energy_value(model, xi)? - reduced_energy_value(model, &m)?) / step,
                    (false, false) => {
                        return Err(Error::InvalidArgument(format!(
                            "no feasible difference stencil at {xi:?} along axis {i}"
                        )))
                    }
                };
            }
            Ok((&g - &fd).norm() / g.norm().max(fd.norm()).max(floor))
        })
        .collect::<Result<_>>()?;
    let mut wc = WorstCase::new("gradient_identity", anchor, Tolerance::absolute(0.0));
    for (i, r) in rows.iter().enumerate() {
        wc.push(*r, rel_tol, || format!("point {i}"));
    }
    Ok(wc.finish())
}
