//! Parametric basis families `ξ ↦ φ(ξ) ∈ U^{n_L}`.

use super::domain::NonlinearDomain;
use crate::error::{Error, Result};
use crate::variational::{Field, PointValue, Regularity};
use serde::{Deserialize, Serialize};

/// The available families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    /// `φ_k(x) = exp(−(x − ξ_k)² / (2 s_k²))`, one bump per center.
    GaussianBumps { widths: Vec<f64> },
    /// Piecewise-linear hats on the grid `Ω.lo < ξ_1 < … < ξ_m < Ω.hi`.
    /// With `dirichlet` only interior hats are kept.
    FreeKnotHats { dirichlet: bool },
    /// `(χ_(a,b), χ_(b,c))` with `ξ = (a, b, c)`.
    IndicatorPair,
}

/// How `∂φ/∂ξ` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ParamGradMode {
    Analytic,
    FiniteDifference { h: f64 },
}

/// A basis family together with its parameter domain and the interval `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisFamily {
    kind: FamilyKind,
    domain: NonlinearDomain,
    omega: (f64, f64),
    grad_mode: ParamGradMode,
}

/// `∂φ_k/∂ξ_i` at one point, stored row-major (`n_NL × n_L`).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamJacobian {
    n_nl: usize,
    n_l: usize,
    entries: Vec<PointValue>,
}

impl ParamJacobian {
    pub fn zeros(n_nl: usize, n_l: usize) -> Self {
        Self {
            n_nl,
            n_l,
            entries: vec![PointValue::ZERO; n_nl * n_l],
        }
    }

    pub fn get(&self, i: usize, k: usize) -> PointValue {
        self.entries[i * self.n_l + k]
    }

    pub fn set(&mut self, i: usize, k: usize, v: PointValue) {
        self.entries[i * self.n_l + k] = v;
    }

    pub fn n_nonlinear(&self) -> usize {
        self.n_nl
    }

    pub fn n_linear(&self) -> usize {
        self.n_l
    }

    /// Row `i` contracted with weights: `Σ_k w_k ∂_i φ_k`.
    pub fn contract_row(&self, i: usize, w: &[f64]) -> PointValue {
        let mut out = PointValue::ZERO;
        for (k, wk) in w.iter().enumerate() {
            let e = self.get(i, k);
            out.value += wk * e.value;
            out.deriv += wk * e.deriv;
        }
        out
    }
}

impl BasisFamily {
    pub fn new(kind: FamilyKind, domain: NonlinearDomain, omega: (f64, f64), grad_mode: ParamGradMode) -> Result<Self> {
        let (olo, ohi) = omega;
        if !(olo.is_finite() && ohi.is_finite() && olo < ohi) {
            return Err(Error::InvalidArgument(format!("invalid interval ({olo}, {ohi})")));
        }
        let n = domain.dim();
        match &kind {
            FamilyKind::GaussianBumps { widths } => {
                if widths.len() != n {
                    return Err(Error::InvalidArgument(format!(
                        "{} widths for {n} centers",
                        widths.len()
                    )));
                }
                if widths.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                    return Err(Error::InvalidArgument("widths must be positive".into()));
                }
            }
            FamilyKind::FreeKnotHats { .. } => {
                let full: Vec<usize> = (0..n).collect();
                let chained = n == 1 || domain.chains().contains(&full);
                if !chained || (n > 1 && domain.gap() <= 0.0) {
                    return Err(Error::InvalidDomain(
                        "free knots need one chain over all knots in index order with a positive gap".into(),
                    ));
                }
                let inside = (0..n).all(|i| domain.lo()[i] > olo && domain.hi()[i] < ohi);
                if !inside {
                    return Err(Error::InvalidDomain(
                        "knot boxes must lie strictly inside the interval".into(),
                    ));
                }
            }
            FamilyKind::IndicatorPair => {
                let ordered = domain.chains().iter().any(|c| *c == vec![0, 1, 2]);
                if n != 3 || !ordered {
                    return Err(Error::InvalidDomain(
                        "indicator pair needs three parameters chained as a ≤ b ≤ c".into(),
                    ));
                }
                if let ParamGradMode::FiniteDifference { .. } = grad_mode {
                    // Difference quotients of indicators do not converge in L².
                    return Err(Error::UnsupportedGradientMode(
                        "indicator basis has no parameter derivative; use the closed-form energy gradient".into(),
                    ));
                }
            }
        }
        if let ParamGradMode::FiniteDifference { h } = grad_mode {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidArgument(format!("finite-difference step {h}")));
            }
        }
        Ok(Self {
            kind,
            domain,
            omega,
            grad_mode,
        })
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn domain(&self) -> &NonlinearDomain {
        &self.domain
    }

    pub fn omega(&self) -> (f64, f64) {
        self.omega
    }

    pub fn grad_mode(&self) -> ParamGradMode {
        self.grad_mode
    }

    /// Same family with a different parameter-gradient mode.
    pub fn with_grad_mode(&self, grad_mode: ParamGradMode) -> Result<Self> {
        Self::new(self.kind.clone(), self.domain.clone(), self.omega, grad_mode)
    }

    pub fn n_nonlinear(&self) -> usize {
        self.domain.dim()
    }

    pub fn n_linear(&self) -> usize {
        let m = self.domain.dim();
        match &self.kind {
            FamilyKind::GaussianBumps { .. } => m,
            FamilyKind::FreeKnotHats { dirichlet: true } => m,
            FamilyKind::FreeKnotHats { dirichlet: false } => m + 2,
            FamilyKind::IndicatorPair => 2,
        }
    }

    /// Regularity of the basis functions themselves.
    pub fn regularity(&self) -> Regularity {
        match self.kind {
            FamilyKind::IndicatorPair => Regularity::L2,
            _ => Regularity::H1,
        }
    }

    /// Whether every basis function vanishes at both ends of `Ω`.
    pub fn vanishes_on_boundary(&self) -> bool {
        matches!(self.kind, FamilyKind::FreeKnotHats { dirichlet: true })
    }

    /// Whether `∂φ/∂ξ` exists as an H¹ field (needed for forms with
    /// derivatives).
    pub fn param_derivative_in_h1(&self) -> bool {
        matches!(self.kind, FamilyKind::GaussianBumps { .. })
    }

    /// Points in `Ω` where basis functions or their parameter derivatives
    /// are not smooth.
    pub fn breakpoints(&self, xi: &[f64]) -> Vec<f64> {
        match &self.kind {
            FamilyKind::GaussianBumps { .. } => Vec::new(),
            FamilyKind::FreeKnotHats { .. } | FamilyKind::IndicatorPair => xi.to_vec(),
        }
    }

    /// Knot vector `(Ω.lo, ξ…, Ω.hi)` for hats.
    fn knots(&self, xi: &[f64]) -> Vec<f64> {
        let mut t = Vec::with_capacity(xi.len() + 2);
        t.push(self.omega.0);
        t.extend_from_slice(xi);
        t.push(self.omega.1);
        t
    }

    /// Index of the element `[t_e, t_{e+1}]` containing `x` (clamped to the
    /// first/last element outside `Ω`).
    fn element(t: &[f64], x: f64) -> usize {
        let m = t.len() - 1;
        let e = t.partition_point(|&tk| tk <= x);
        e.saturating_sub(1).min(m - 1)
    }

    /// Values and spatial derivatives of all basis functions at `x`.
    /// `ξ` is validated against the domain.
    pub fn eval(&self, xi: &[f64], x: f64) -> Result<Vec<PointValue>> {
        self.domain.validate(xi)?;
        let mut out = vec![PointValue::ZERO; self.n_linear()];
        self.eval_into(xi, x, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation into a buffer of length `n_L`.
    pub fn eval_into(&self, xi: &[f64], x: f64, out: &mut [PointValue]) {
        match &self.kind {
            FamilyKind::GaussianBumps { widths } => {
                for (k, (&c, &s)) in xi.iter().zip(widths).enumerate() {
                    let r = (x - c) / s;
                    let v = (-0.5 * r * r).exp();
                    out[k] = PointValue::new(v, -r / s * v);
                }
            }
            FamilyKind::FreeKnotHats { dirichlet } => {
                out.iter_mut().for_each(|o| *o = PointValue::ZERO);
                let t = self.knots(xi);
                let e = Self::element(&t, x);
                let h = t[e + 1] - t[e];
                let na = PointValue::new((t[e + 1] - x) / h, -1.0 / h);
                let nb = PointValue::new((x - t[e]) / h, 1.0 / h);
                // Hat j sits at knot t_j; Dirichlet drops j = 0 and j = m+1.
                let shift = usize::from(*dirichlet);
                let n_l = out.len();
                let mut put = |j: usize, v: PointValue| {
                    if j >= shift && j - shift < n_l {
                        out[j - shift] = v;
                    }
                };
                put(e, na);
                put(e + 1, nb);
            }
            FamilyKind::IndicatorPair => {
                let (a, b, c) = (xi[0], xi[1], xi[2]);
                let ind = |lo: f64, hi: f64| if x > lo && x < hi { 1.0 } else { 0.0 };
                out[0] = PointValue::new(ind(a, b), 0.0);
                out[1] = PointValue::new(ind(b, c), 0.0);
            }
        }
    }

    /// `∂φ_k/∂ξ_i` at `x`.
    pub fn eval_dparam(&self, xi: &[f64], x: f64) -> Result<ParamJacobian> {
        self.domain.validate(xi)?;
        let mut jac = ParamJacobian::zeros(self.n_nonlinear(), self.n_linear());
        self.eval_dparam_into(xi, x, &mut jac)?;
        Ok(jac)
    }

    /// Unchecked parameter Jacobian into a preallocated buffer.
    pub fn eval_dparam_into(&self, xi: &[f64], x: f64, jac: &mut ParamJacobian) -> Result<()> {
        match self.grad_mode {
            ParamGradMode::Analytic => self.analytic_dparam(xi, x, jac),
            ParamGradMode::FiniteDifference { h } => {
                self.fd_dparam(xi, x, h, jac);
                Ok(())
            }
        }
    }

    fn analytic_dparam(&self, xi: &[f64], x: f64, jac: &mut ParamJacobian) -> Result<()> {
        jac.entries.iter_mut().for_each(|e| *e = PointValue::ZERO);
        match &self.kind {
            FamilyKind::GaussianBumps { widths } => {
                for (k, (&c, &s)) in xi.iter().zip(widths).enumerate() {
                    let r = (x - c) / s;
                    let v = (-0.5 * r * r).exp();
                    jac.set(k, k, PointValue::new(r / s * v, (1.0 - r * r) / (s * s) * v));
                }
                Ok(())
            }
            FamilyKind::FreeKnotHats { dirichlet } => {
                let t = self.knots(xi);
                let e = Self::element(&t, x);
                let h = t[e + 1] - t[e];
                let na = (t[e + 1] - x) / h;
                let nb = (x - t[e]) / h;
                let shift = usize::from(*dirichlet);
                let n_l = jac.n_l;
                // Knot t_a (a = e) is ξ_{e−1}; knot t_b (b = e+1) is ξ_e.
                let mut put = |knot: usize, hat: usize, v: PointValue| {
                    let interior = knot >= 1 && knot <= xi.len();
                    if interior && hat >= shift && hat - shift < n_l {
                        jac.set(knot - 1, hat - shift, v);
                    }
                };
                let (a, b) = (e, e + 1);
                let h2 = h * h;
                put(a, a, PointValue::new(na / h, -1.0 / h2));
                put(b, a, PointValue::new(nb / h, 1.0 / h2));
                put(a, b, PointValue::new(-na / h, 1.0 / h2));
                put(b, b, PointValue::new(-nb / h, -1.0 / h2));
                Ok(())
            }
            FamilyKind::IndicatorPair => Err(Error::UnsupportedGradientMode(
                "indicator basis is not differentiable in its parameters".into(),
            )),
        }
    }

    fn fd_dparam(&self, xi: &[f64], x: f64, h: f64, jac: &mut ParamJacobian) {
        let n_l = self.n_linear();
        let mut plus = vec![PointValue::ZERO; n_l];
        let mut minus = vec![PointValue::ZERO; n_l];
        let mut p = xi.to_vec();
        for i in 0..xi.len() {
            p[i] = xi[i] + h;
            self.eval_into(&p, x, &mut plus);
            p[i] = xi[i] - h;
            self.eval_into(&p, x, &mut minus);
            p[i] = xi[i];
            for k in 0..n_l {
                jac.set(
                    i,
                    k,
                    PointValue::new(
                        (plus[k].value - minus[k].value) / (2.0 * h),
                        (plus[k].deriv - minus[k].deriv) / (2.0 * h),
                    ),
                );
            }
        }
    }
}

/// The realisation `ℛ(w, ξ) = Σ_k w_k φ_k(ξ)` as a field.
pub struct Realisation<'a> {
    family: &'a BasisFamily,
    xi: &'a [f64],
    w: &'a [f64],
}

impl<'a> Realisation<'a> {
    pub fn new(family: &'a BasisFamily, xi: &'a [f64], w: &'a [f64]) -> Result<Self> {
        family.domain().validate(xi)?;
        if w.len() != family.n_linear() {
            return Err(Error::InvalidArgument(format!(
                "expected {} linear parameters, got {}",
                family.n_linear(),
                w.len()
            )));
        }
        Ok(Self { family, xi, w })
    }
}

impl Field for Realisation<'_> {
    fn eval(&self, x: f64) -> PointValue {
        let mut buf = vec![PointValue::ZERO; self.w.len()];
        self.family.eval_into(self.xi, x, &mut buf);
        let mut out = PointValue::ZERO;
        for (wk, p) in self.w.iter().zip(&buf) {
            out.value += wk * p.value;
            out.deriv += wk * p.deriv;
        }
        out
    }

    fn regularity(&self) -> Regularity {
        self.family.regularity()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.family.breakpoints(self.xi)
    }
}

/// A single basis function `φ_k(ξ)` as a field.
pub struct BasisFunction<'a> {
    family: &'a BasisFamily,
    xi: &'a [f64],
    k: usize,
}

impl<'a> BasisFunction<'a> {
    pub fn new(family: &'a BasisFamily, xi: &'a [f64], k: usize) -> Self {
        Self { family, xi, k }
    }
}

impl Field for BasisFunction<'_> {
    fn eval(&self, x: f64) -> PointValue {
        let mut buf = vec![PointValue::ZERO; self.family.n_linear()];
        self.family.eval_into(self.xi, x, &mut buf);
        buf[self.k]
    }

    fn regularity(&self) -> Regularity {
        self.family.regularity()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.family.breakpoints(self.xi)
    }
}
