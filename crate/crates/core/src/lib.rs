//! Numerical construction and verification of Lagrangian mean curvature flow
//! solitons in ℂⁿ built from curves and quadrics.
//!
//! A soliton here is the image of (x, s) ↦ (x₁w₁(s), …, xₙwₙ(s)) for x on a
//! centred quadric Σλ_j x_j² = C, or a graph-like analogue over a paraboloid
//! for translators. The curve w(s) solves an ODE with a first integral; the
//! modules below build the curve (numerically or in closed form), sample the
//! resulting submanifold, and check the soliton equations independently with
//! finite differences.

pub mod error;
pub mod expander;
pub mod export;
pub mod geometry;
pub mod ode;
pub mod params;
pub mod periodic;
pub mod quad;
pub mod rational;
pub mod reduced_ode;
pub mod translator;

pub use error::{Error, Result};
