//! Invariant measures of one-dimensional Lévy-type operators.
//!
//! The crate assembles and solves a Volterra-Fredholm integral equation
//! characterizing infinitesimally invariant measures of operators
//!
//! ```text
//! Af(x) = a(x)f'(x) + ½b(x)f''(x)
//!       + ∫ (f(x+y) - f(x) - f'(x)y·1{|y|<1}) Π(x,dy),
//! ```
//!
//! verifies candidate measures through generator residuals against a family
//! of smooth bump test functions, and cross-validates solutions by Monte
//! Carlo simulation of the associated jump-diffusion SDEs.

pub mod cli;
pub mod exec;
pub mod expr;
pub mod levy;
pub mod operator;
pub mod quad;
pub mod scenario;
pub mod sde;
pub mod vfie;
