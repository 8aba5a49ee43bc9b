//! Shared numerical machinery: quadrature, ODE stepping, local optimizers.

pub mod ode;
pub mod optim;
pub mod quad;
