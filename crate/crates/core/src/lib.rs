//! Extinction-time bounds for stochastic fast-diffusion and SOC equations
//! `dX + LΨ(X)dt ∋ B(X)dW` with `L = (−Δ)^α` on a box, and a spectral
//! Galerkin Monte Carlo engine to test them.

pub mod bounds;
pub mod config;
pub mod error;
pub mod noise;
pub mod nonlinearity;
pub mod par;
pub mod quadrature;
pub mod report;
pub mod sde;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
