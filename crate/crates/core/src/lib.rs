//! Alternating minimisation of quadratic energies over parameter-dependent
//! approximation spaces, with numerical certificates for its convergence
//! guarantees.
//!
//! The pieces, bottom-up:
//!
//! * [`variational`]: forms `a`, `ℓ`, the energy and quadrature on an interval.
//! * [`basis`]: parametric basis families and the nonlinear-parameter domain.
//! * [`assembly`]: stiffness, load and Gram matrices with spectral data.
//! * [`updates`]: linear updates, Bregman geometry and the proximal step.
//! * [`optimizer`]: the alternating driver and its scheduling constants.
//! * [`certify`]: checks of every convergence inequality on recorded runs.

pub mod assembly;
pub mod basis;
pub mod certify;
pub mod error;
pub mod optimizer;
pub mod updates;
pub mod variational;

pub use error::{Error, Result};
