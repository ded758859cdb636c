//! Trajectory optimization for Lagrangian mechanical systems using global
//! polynomial (pseudo-spectral) discretizations that preserve the geometric
//! structure of the continuous dynamics.
//!
//! The crate is organized around five subsystems:
//!
//! * [`polybasis`] — orthogonal-polynomial infrastructure: Gauss quadrature
//!   rules, collocation grids, differentiation matrices, barycentric
//!   interpolation, and the exact `L²` metric tensor pulled back onto an
//!   arbitrary grid.
//! * [`mechsys`] — Lagrangian models (chain pendulums, point mass), their
//!   analytic partial derivatives, forward dynamics, and a high-accuracy
//!   reference integrator used as an independent oracle.
//! * [`scheme`] — the three discretizations of the controlled Euler-Lagrange
//!   dynamics (weak variational form, strong form, first-order ODE form) as
//!   residual functions over grid-valued trajectories.
//! * [`nlp`] — assembly of a discretized problem into a dense nonlinear
//!   program and an embedded SQP solver with multistart support.
//! * [`geomcheck`] — numerical certification of symplecticity, momentum
//!   conservation, and spectral convergence of the discretizations.
//!
//! Data-parallel inner loops (finite-difference Jacobian columns, multistart
//! solves, flow-map probes) run on rayon when the `parallel` feature is
//! enabled (the default) and fall back to sequential iteration otherwise;
//! see [`exec`].

pub mod exec;
pub mod geomcheck;
pub mod mechsys;
pub mod nlp;
pub mod polybasis;
pub mod scheme;

pub use exec::ExecMode;
