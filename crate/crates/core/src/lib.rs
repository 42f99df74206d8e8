//! Numerical laboratory for multi-bubble approximate solutions of the
//! asymptotically critical Lane-Emden system on model manifolds.

pub mod cache;
pub mod config;
pub mod constants;
pub mod error;
pub mod expansion;
pub mod format;
pub mod ground_state;
pub mod hyperbola;
pub mod manifold;
pub mod numerics;
pub mod pipeline;
pub mod potential;
pub mod reduced_energy;
pub mod ode;

pub use error::{Error, Result};
