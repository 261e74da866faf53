//! Lagrangian vortex-blob laboratory for axisymmetric Euler flow without
//! swirl: kernels, particle clouds, velocity summation, time stepping and the
//! diagnostics of thin-ring dynamics.

pub mod cli;
pub mod cloud;
pub mod compare;
pub mod config;
pub mod diagnostics;
pub mod integrator;
pub mod io;
pub mod kernels;
pub mod oracle;
pub mod summation;
pub mod velocity;
