//! RIS phase optimization against the closed-form sum SE.

pub mod baselines;
pub mod buffer;
pub mod env;
pub mod nn;
pub mod sac;
