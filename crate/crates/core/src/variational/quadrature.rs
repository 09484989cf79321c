//! Composite Gauss-Legendre quadrature on a 1D interval.

use crate::error::{Error, Result};

/// Breakpoints closer than this (relative to the interval length) are merged.
const MERGE_TOL: f64 = 1e-14;

/// Gauss-Legendre nodes and weights on the reference interval `[-1, 1]`.
///
/// Newton iteration on the three-term recurrence, started from the
/// Chebyshev-like asymptotic guess. Accurate to machine precision for the
/// orders used here (≤ 64).
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A composite Gauss-Legendre rule over panels of `(x_lo, x_hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    breakpoints: Vec<f64>,
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Builds a rule from explicit panel breakpoints.
    pub fn new(breakpoints: Vec<f64>, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidQuadrature("order must be positive".into()));
        }
        if breakpoints.len() < 2 {
            return Err(Error::InvalidQuadrature("need at least two breakpoints".into()));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidQuadrature("non-finite breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidQuadrature(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let (ref_nodes, ref_weights) = gauss_legendre(order);
        let panels = breakpoints.len() - 1;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for w in breakpoints.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            let mid = 0.5 * (w[1] + w[0]);
            for (z, wt) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(mid + half * z);
                weights.push(half * wt);
            }
        }
        Ok(Self {
            breakpoints,
            order,
            nodes,
            weights,
        })
    }

    /// `panels` equal panels on `(lo, hi)`.
    pub fn uniform(lo: f64, hi: f64, panels: usize, order: usize) -> Result<Self> {
        if panels == 0 {
            return Err(Error::InvalidQuadrature("panels must be positive".into()));
        }
        if lo.is_nan() || hi.is_nan() || hi <= lo {
            return Err(Error::InvalidQuadrature(format!("empty interval ({lo}, {hi})")));
        }
        let h = (hi - lo) / panels as f64;
        let mut bps: Vec<f64> = (0..panels).map(|i| lo + i as f64 * h).collect();
        bps.push(hi);
        Self::new(bps, order)
    }

    /// Returns a rule with the same order whose panels are also split at every
    /// point of `extra` that lies strictly inside the interval.
    pub fn refined(&self, extra: &[f64]) -> QuadratureRule {
        let lo = self.lo();
        let hi = self.hi();
        let tol = MERGE_TOL * (hi - lo);
        let inside: Vec<f64> = extra
            .iter()
            .copied()
            .filter(|&p| p.is_finite() && p > lo + tol && p < hi - tol)
            .collect();
        if inside.is_empty() {
            return self.clone();
        }
        let mut all = self.breakpoints.clone();
        all.extend(inside);
        all.sort_by(|a, b| a.total_cmp(b));
        let mut merged: Vec<f64> = Vec::with_capacity(all.len());
        for p in all {
            match merged.last() {
                Some(&last) if p - last <= tol => {}
                _ => merged.push(p),
            }
        }
        QuadratureRule::new(merged, self.order).expect("refinement of a valid rule is valid")
    }

    pub fn lo(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn hi(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn panels(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Iterator over `(node, weight)` pairs in panel order.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Composite quadrature of `g`. Fails on the first non-finite evaluation.
pub fn integrate<G: Fn(f64) -> f64>(g: G, rule: &QuadratureRule) -> Result<f64> {
    let mut sum = 0.0;
    for (x, w) in rule.points() {
        let v = g(x);
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand { node: x, value: v });
        }
        sum += w * v;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_length() {
        for order in 1..=20 {
            let rule = QuadratureRule::uniform(-0.3, 2.2, 7, order).unwrap();
            let s: f64 = rule.weights().iter().sum();
            assert!((s - 2.5).abs() <= 1e-12 * 2.5, "order {order}: {s}");
        }
    }

    #[test]
    fn monomial_exactness() {
        for order in 1..=12 {
            let rule = QuadratureRule::uniform(0.0, 1.0, 1, order).unwrap();
            for deg in 0..(2 * order) {
                let got = integrate(|x| x.powi(deg as i32), &rule).unwrap();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!(
                    (got - exact).abs() <= 1e-13,
                    "order {order} degree {deg}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn constant_and_square() {
        let rule = QuadratureRule::uniform(0.0, 1.0, 3, 2).unwrap();
        assert!((integrate(|_| 1.0, &rule).unwrap() - 1.0).abs() < 1e-15);
        assert!((integrate(|x| x * x, &rule).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exponential_against_antiderivative() {
        let rule = QuadratureRule::uniform(0.0, 1.0, 8, 5).unwrap();
        let got = integrate(f64::exp, &rule).unwrap();
        assert!((got - (std::f64::consts::E - 1.0)).abs() <= 1e-12);
    }

    #[test]
    fn non_finite_reports_node() {
        let rule = QuadratureRule::uniform(0.0, 1.0, 1, 3).unwrap();
        let err = integrate(|x| if x > 0.5 { f64::NAN } else { 1.0 }, &rule).unwrap_err();
        match err {
            Error::NonFiniteIntegrand { node, .. } => assert!(node > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn refinement_splits_and_keeps_endpoints() {
        let rule = QuadratureRule::uniform(0.0, 1.0, 2, 4).unwrap();
        let r = rule.refined(&[0.25, 0.5, 1.0, -1.0, 0.25 + 1e-17]);
        assert_eq!(r.breakpoints(), &[0.0, 0.25, 0.5, 1.0]);
        // Piecewise integrand with a kink at 0.3 becomes exact once split there.
        let r = rule.refined(&[0.3]);
        let got = integrate(|x: f64| (x - 0.3).abs(), &r).unwrap();
        let exact = 0.5 * 0.3 * 0.3 + 0.5 * 0.7 * 0.7;
        assert!((got - exact).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(QuadratureRule::new(vec![0.0, 0.0, 1.0], 2).is_err());
        assert!(QuadratureRule::new(vec![0.0], 2).is_err());
        assert!(QuadratureRule::new(vec![0.0, 1.0], 0).is_err());
    }

    #[test]
    fn panel_doubling_is_stable_for_smooth_integrands() {
        let integrands: [fn(f64) -> f64; 3] = [
            f64::exp,
            |x| (3.0 * x).sin() * x,
            |x| (-(x - 0.5) * (x - 0.5) / 0.02).exp(),
        ];
        for g in integrands {
            let coarse = QuadratureRule::uniform(0.0, 1.0, 16, 8).unwrap();
            let fine = QuadratureRule::uniform(0.0, 1.0, 32, 8).unwrap();
            let a = integrate(g, &coarse).unwrap();
            let b = integrate(g, &fine).unwrap();
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300));
        }
    }
}
