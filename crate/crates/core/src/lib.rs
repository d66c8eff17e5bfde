//! Verification toolkit for nonlinear quantum thermodynamic equations of
//! motion: density-matrix primitives, maximum-entropy equilibria,
//! steepest-entropy-ascent dissipators, adaptive propagation and a
//! ten-condition compliance suite.

pub mod cli;
pub mod compliance;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod integrator;
pub mod json;
pub mod linalg;
pub mod random;
pub mod scenario;
pub mod state;

pub use dynamics::{DynamicsKind, DynamicsSpec, MotionTerms};
pub use equilibrium::{gibbs_density, nd_solution, nd_state, solve_gibbs, GibbsSolution};
pub use error::{Error, Result};
pub use integrator::{propagate, IntegratorConfig, RepairMode, Trajectory};
pub use scenario::Scenario;
pub use state::{Constants, Observable, QuantumState, Subsystem, SystemModel};
