//! Certificates that need no knowledge of the optimal set beyond a lower
//! bound on `𝒦*`: per-step decrease, the local rate and the
//! quasi-stationarity surrogate.

use super::{CertificateEntry, Status, Tolerance, WorstCase};
use crate::error::Result;
use crate::optimizer::{RunRecord, StoppingCriteria, Termination};
use crate::updates::{gradient_mapping, EnergyModel, Geometry};
use nalgebra::DVector;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `L(γc)^ν + μc`.
pub fn quasi_stationarity_level(l: f64, nu: f64, gamma: f64, mu: f64, c: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    l * (gamma * c).powf(nu) + mu * c
}

/// Per-update energy decrease and the spectral bound on `λ_max(A)`.
///
/// `norm_a` is `‖a‖`; without it the spectral entry is not asserted.
pub fn decrease_certificate(record: &RunRecord, norm_a: Option<f64>, tol: Tolerance) -> Vec<CertificateEntry> {
    let mut dec = WorstCase::new(
        "energy_decrease",
        "½λ_max(A)⁻¹‖∇_W𝒦(w_k, ξ_{k+1})‖² ≤ 𝒦(w_k, ξ_{k+1}) − 𝒦(w_{k+1}, ξ_{k+1})",
        tol,
    );
    for r in &record.rows {
        dec.push(r.decrease.guaranteed, r.decrease.achieved, || {
            format!("iter {}", r.iter)
        });
    }
    let anchor = "λ_max(A(ξ)) ≤ ‖a‖‖φ(ξ)‖²_{U,2}";
    let spectral = match norm_a {
        Some(a) => {
            let mut s = WorstCase::new("lambda_max_bound", anchor, tol);
            for r in &record.rows {
                s.push(r.lambda_max, a * r.phi_norm * r.phi_norm, || format!("iter {}", r.iter));
            }
            s.finish()
        }
        None => CertificateEntry::skipped("lambda_max_bound", anchor, Status::NotAsserted, "‖a‖ unknown"),
    };
    vec![dec.finish(), spectral]
}

/// `𝒦(w_{k+1}, ξ_{k+1}) ≤ 𝒦(w_k, ξ_k)` along the run.
///
/// Asserted when every step has a recorded `L` with `γL ≤ 2μ` and the
/// Hölder slack `eps_holder` is zero; the drop is then guaranteed.
pub fn energy_monotone_certificate(record: &RunRecord, mu: f64, eps_holder: f64, tol: Tolerance) -> CertificateEntry {
    let name = "energy_monotone";
    let anchor = "𝒦(w_{k+1}, ξ_{k+1}) ≤ 𝒦(w_k, ξ_k)";
    if eps_holder != 0.0 {
        return CertificateEntry::skipped(name, anchor, Status::NotAsserted, "Hölder slack ε > 0");
    }
    for r in &record.rows[1..] {
        match (r.gamma, r.lipschitz) {
            (Some(g), Some(l)) if g * l <= 2.0 * mu => {}
            (_, None) => {
                return CertificateEntry::skipped(name, anchor, Status::NotAsserted, format!("no L at iter {}", r.iter))
            }
            _ => {
                return CertificateEntry::skipped(
                    name,
                    anchor,
                    Status::NotAsserted,
                    format!("γL > 2μ at iter {}", r.iter),
                )
            }
        }
    }
    let mut w = WorstCase::new(name, anchor, tol);
    for p in record.rows.windows(2) {
        w.push(p[1].energy, p[0].energy, || format!("iter {}", p[1].iter));
    }
    w.finish()
}

/// `min_{k<n} ‖G_k‖² + ‖∇_W𝒦(w_k, ξ_{k+1})‖² ≤ 2(𝒦₀ − 𝒦*_lower + nε)/S_n`
/// for every `n`, with `S_n = Σ_{k<n} min(γ_k(2μ − γ_kL_k), λ_max(A(ξ_{k+1}))⁻¹)`.
///
/// Only prefixes whose terms are all nonnegative and whose `S_n > 0` are
/// checked; if there are none the entry is inconclusive.
pub fn local_rate_certificate(
    record: &RunRecord,
    mu: f64,
    eps_holder: f64,
    k_star_lower: f64,
    tol: Tolerance,
) -> CertificateEntry {
    let name = "local_rate";
    let anchor = "min_{k<n} ‖G_k‖² + ‖∇_W𝒦‖² ≤ 2(𝒦₀ − 𝒦* + nε)/S_n";
    let k0 = record.rows[0].energy;
    let mut s_n = 0.0;
    let mut min_c2 = f64::INFINITY;
    let mut w = WorstCase::new(name, anchor, tol);
    let mut stop_reason = None;
    for (k, r) in record.rows[1..].iter().enumerate() {
        let (Some(gamma), Some(l), Some(g)) = (r.gamma, r.lipschitz, r.grad_map_norm) else {
            stop_reason = Some(format!("no L at iter {}", r.iter));
            break;
        };
        let a_k = gamma * (2.0 * mu - gamma * l);
        let b_k = 1.0 / r.lambda_max;
        let term = a_k.min(b_k);
        if term < 0.0 {
            stop_reason = Some(format!("negative weight at iter {}", r.iter));
            break;
        }
        s_n += term;
        min_c2 = min_c2.min(g * g + r.grad_w_norm * r.grad_w_norm);
        let n = (k + 1) as f64;
        if s_n > 0.0 {
            let rhs = 2.0 * (k0 - k_star_lower + n * eps_holder) / s_n;
            w.push(min_c2, rhs, || format!("n = {n}"));
        }
    }
    let e = w.finish();
    match (e.status, stop_reason) {
        (Status::Inconclusive, Some(r)) => e.with_detail(r),
        (_, Some(r)) => {
            let d = format!("{}; stopped at {r}", e.detail);
            e.with_detail(d)
        }
        _ => e,
    }
}

/// One nonlinear step `ξ → ξ₊` taken at fixed `w`, plus the linear
/// parameters `w₊` chosen afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateStep {
    pub w: Vec<f64>,
    pub xi: Vec<f64>,
    pub xi_plus: Vec<f64>,
    pub w_plus: Vec<f64>,
    pub gamma: f64,
}

/// Checks the surrogate for quasi-stationarity at `(w, ξ₊)`:
///
/// * `prox_optimality`: `ξ₊` is the proximal point, the premise;
/// * `surrogate_bound`: `max(‖∇_W𝒦(w, ξ₊)‖, dist(−∇_𝕏𝒦(w, ξ₊), N_𝕏(ξ₊)))`
///   is at most `L(γc)^ν + L_ψc` with `c² = ‖G‖² + ‖∇_W𝒦(w, ξ₊)‖²`;
/// * `surrogate_stopping` (with `eps`): after stopping on `‖ξ₊ − ξ‖ ≤ εγ`,
///   the level at `c² = ‖G‖² + ‖∇_W𝒦(w₊, ξ₊)‖²` is at most `L(γε)^ν + L_ψε`.
///
/// `L_ψ` is the largest weight of `∇²ψ`, which is `μ` for the Euclidean
/// geometry. `(l, nu)` is the Hölder pair of `∇_𝕏𝒦(w, ·)`.
pub fn surrogate_certificate(
    model: &dyn EnergyModel,
    geometry: &Geometry,
    step: &SurrogateStep,
    l: f64,
    nu: f64,
    eps: Option<f64>,
    tol: Tolerance,
) -> Result<Vec<CertificateEntry>> {
    let dom = model.domain();
    let w = DVector::from_column_slice(&step.w);
    let grad = model.grad_nonlinear(&w, &step.xi)?;
    let residual = geometry.prox_optimality_residual(dom, &step.xi, grad.as_slice(), step.gamma, &step.xi_plus);
    let scale = step.gamma * grad.norm() + norm(&step.xi);
    let mut out = vec![CertificateEntry::compare(
        "prox_optimality",
        "dist(−γ∇_𝕏𝒦(w, ξ) − ∇ψ(ξ₊) + ∇ψ(ξ), N_𝕏(ξ₊)) = 0",
        residual,
        0.0,
        Tolerance {
            abs: tol.abs * scale.max(1.0),
            rel: 0.0,
        },
    )];

    let l_psi = geometry.weights(step.xi.len()).into_iter().fold(0.0f64, f64::max);
    let g = norm(&gradient_mapping(&step.xi, &step.xi_plus, step.gamma));
    let sys = model.assemble(&step.xi_plus)?;
    let gw = sys.grad_w(&w).norm();
    let c = (g * g + gw * gw).sqrt();
    let gx = model.grad_nonlinear(&w, &step.xi_plus)?;
    let neg: Vec<f64> = gx.iter().map(|v| -v).collect();
    let bnd_scale = dom.lo().iter().chain(dom.hi()).fold(1.0f64, |m, b| m.max(b.abs()));
    let active = dom.active_set(&step.xi_plus, 1e-10 * bnd_scale);
    let stat = norm(&dom.project_tangent(&neg, &active));
    out.push(
        CertificateEntry::compare(
            "surrogate_bound",
            "max(‖∇_W𝒦‖, dist(−∇_𝕏𝒦, N_𝕏)) ≤ L(γc)^ν + μc",
            gw.max(stat),
            quasi_stationarity_level(l, nu, step.gamma, l_psi, c),
            tol,
        )
        .with_detail(format!("c = {c:e}")),
    );

    if let Some(eps) = eps {
        let w_plus = DVector::from_column_slice(&step.w_plus);
        let gw_plus = sys.grad_w(&w_plus).norm();
        let c_stop = (g * g + gw_plus * gw_plus).sqrt();
        out.push(
            CertificateEntry::compare(
                "surrogate_stopping",
                "L(γc)^ν + μc ≤ L(γε)^ν + με after stopping at ‖ξ₊ − ξ‖ ≤ εγ",
                quasi_stationarity_level(l, nu, step.gamma, l_psi, c_stop),
                quasi_stationarity_level(l, nu, step.gamma, l_psi, eps),
                tol,
            )
            .with_detail(format!("c = {c_stop:e}")),
        );
    }
    Ok(out)
}

/// [`surrogate_certificate`] on the last step of a run.
///
/// The stopping entry is asserted only when the run ended on the rule
/// `‖ξ₊ − ξ‖ ≤ εγ`.
pub fn surrogate_from_record(
    model: &dyn EnergyModel,
    geometry: &Geometry,
    record: &RunRecord,
    stopping: &StoppingCriteria,
    l: f64,
    nu: f64,
    tol: Tolerance,
) -> Result<Vec<CertificateEntry>> {
    let n = record.rows.len();
    if n < 2 {
        return Ok(vec![CertificateEntry::skipped(
            "surrogate_bound",
            "",
            Status::Inconclusive,
            "no nonlinear step recorded",
        )]);
    }
    let (prev, last) = (&record.rows[n - 2], &record.rows[n - 1]);
    let step = SurrogateStep {
        w: prev.w.clone(),
        xi: prev.xi.clone(),
        xi_plus: last.xi.clone(),
        w_plus: last.w.clone(),
        gamma: last.gamma.expect("rows after the first carry a step size"),
    };
    let stopped = record.termination == Termination::ParameterStabilised && stopping.scale_by_gamma;
    let eps = if stopped { stopping.eps_x } else { None };
    let mut out = surrogate_certificate(model, geometry, &step, l, nu, eps, tol)?;
    if eps.is_none() {
        out.push(CertificateEntry::skipped(
            "surrogate_stopping",
            "L(γc)^ν + μc ≤ L(γε)^ν + με after stopping at ‖ξ₊ − ξ‖ ≤ εγ",
            Status::NotAsserted,
            "run did not stop on the scaled parameter rule",
        ));
    }
    Ok(out)
}
