//! Maximal Lyapunov exponents of one-dimensional FPU-type chains.

pub mod chain;
pub mod fit;
pub mod harness;
pub mod integrator;
pub mod lyapunov;
pub mod model;
pub mod sampler;
pub mod theory;
pub mod toda;
