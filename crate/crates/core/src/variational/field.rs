//! Members of the Hilbert space `U`, represented by pointwise evaluators.

use std::fmt;
use std::sync::Arc;

/// A real function of one variable, shareable across threads.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Wraps a closure as a [`ScalarFn`].
pub fn scalar_fn<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> ScalarFn {
    Arc::new(f)
}

/// Value and first spatial derivative at a point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointValue {
    pub value: f64,
    pub deriv: f64,
}

impl PointValue {
    pub const ZERO: PointValue = PointValue { value: 0.0, deriv: 0.0 };

    pub fn new(value: f64, deriv: f64) -> Self {
        Self { value, deriv }
    }
}

/// Whether a field only lives in L² or carries a square-integrable derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    L2,
    H1,
}

/// A function on Ω that can be evaluated at quadrature nodes.
///
/// `eval` returns the derivative slot as well; for [`Regularity::L2`] fields
/// its content is meaningless and consumers must not use it.
pub trait Field: Sync {
    fn eval(&self, x: f64) -> PointValue;

    fn regularity(&self) -> Regularity;

    /// Points where the field or its derivative may jump. Quadrature panels
    /// are split there.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// A field defined by closures.
#[derive(Clone)]
pub struct FnField {
    value: ScalarFn,
    deriv: Option<ScalarFn>,
    breakpoints: Vec<f64>,
}

impl FnField {
    pub fn l2(value: ScalarFn) -> Self {
        Self {
            value,
            deriv: None,
            breakpoints: Vec::new(),
        }
    }

    pub fn h1(value: ScalarFn, deriv: ScalarFn) -> Self {
        Self {
            value,
            deriv: Some(deriv),
            breakpoints: Vec::new(),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::h1(scalar_fn(move |_| c), scalar_fn(|_| 0.0))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField")
            .field("h1", &self.deriv.is_some())
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl Field for FnField {
    fn eval(&self, x: f64) -> PointValue {
        PointValue {
            value: (self.value)(x),
            deriv: self.deriv.as_ref().map_or(0.0, |d| d(x)),
        }
    }

    fn regularity(&self) -> Regularity {
        if self.deriv.is_some() {
            Regularity::H1
        } else {
            Regularity::L2
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

/// Indicator function of the open interval `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indicator {
    pub lo: f64,
    pub hi: f64,
}

impl Field for Indicator {
    fn eval(&self, x: f64) -> PointValue {
        let inside = x > self.lo && x < self.hi;
        PointValue::new(if inside { 1.0 } else { 0.0 }, 0.0)
    }

    fn regularity(&self) -> Regularity {
        Regularity::L2
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.lo, self.hi]
    }
}

/// `Σ c_i f_i` over borrowed fields.
pub struct Combination<'a> {
    terms: Vec<(f64, &'a dyn Field)>,
}

impl<'a> Combination<'a> {
    pub fn new(terms: Vec<(f64, &'a dyn Field)>) -> Self {
        Self { terms }
    }

    /// `u - v`.
    pub fn difference(u: &'a dyn Field, v: &'a dyn Field) -> Self {
        Self::new(vec![(1.0, u), (-1.0, v)])
    }
}

impl Field for Combination<'_> {
    fn eval(&self, x: f64) -> PointValue {
        let mut out = PointValue::ZERO;
        for (c, f) in &self.terms {
            let p = f.eval(x);
            out.value += c * p.value;
            out.deriv += c * p.deriv;
        }
        out
    }

    fn regularity(&self) -> Regularity {
        if self.terms.iter().all(|(_, f)| f.regularity() == Regularity::H1) {
            Regularity::H1
        } else {
            Regularity::L2
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.terms.iter().flat_map(|(_, f)| f.breakpoints()).collect()
    }
}

/// A field sampled once on the nodes of a fixed rule; used to freeze
/// expensive realisations before repeated quadrature.
#[derive(Debug, Clone)]
pub struct NodalField {
    nodes: Vec<f64>,
    values: Vec<PointValue>,
    regularity: Regularity,
}

impl NodalField {
    pub fn sample(field: &dyn Field, nodes: &[f64]) -> Self {
        Self {
            nodes: nodes.to_vec(),
            values: nodes.iter().map(|&x| field.eval(x)).collect(),
            regularity: field.regularity(),
        }
    }

    pub fn values(&self) -> &[PointValue] {
        &self.values
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }
}
