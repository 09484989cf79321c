//! Updates of both parameter groups: linear solves and steps for `w`,
//! Bregman proximal steps for `ξ`, and the energy gradients they consume.

mod bregman;
mod linear;
mod oracle;

pub use bregman::{gradient_mapping, Geometry};
pub use linear::{
    conjugate_gradient, decrease_check, decrease_upper_bound, steepest_descent_step, update_linear, CgOutcome,
    DecreasePair, LinearRule,
};
pub use oracle::{DiscreteEnergy, EnergyModel, GradientMode};
