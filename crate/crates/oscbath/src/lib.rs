//! Surrogate damped-oscillator environments for open quantum systems.
//!
//! The library turns a Gaussian environment — a spectral density J(ω) plus a
//! temperature — into a small chain of interacting damped harmonic
//! oscillators whose Lindblad dynamics reproduces the environment's
//! two-time correlation function, then simulates arbitrary finite systems
//! coupled to that surrogate environment.
//!
//! Pipeline:
//! 1. [`spectral`]: exact correlation functions C(t), C(ω) from J(ω) and β.
//! 2. [`expfit`]: fit C(t) with N damped complex exponentials.
//! 3. [`surrogate`]: invert the fit into chain parameters {Ω_n, g_n, Γ_n, c_n}
//!    (random-coupling sampling + inverse-eigenvalue solves + weight
//!    matching), with exact closed forms for N ≤ 3.
//! 4. [`lindblad`]: assemble and integrate the system ⊗ chain Lindblad model
//!    (direct master equation, quantum-jump trajectories, two-time
//!    correlation functions).
//! 5. [`models`]: the worked physical models (dephasing spin-boson, vibronic
//!    dimer with absorption spectra, polymer chain) and their analytic
//!    references.

pub mod error;
pub mod expfit;
pub mod fixtures;
pub mod lindblad;
pub mod models;
pub mod numerics;
pub mod spectral;
pub mod surrogate;

pub use error::{Error, Result};
