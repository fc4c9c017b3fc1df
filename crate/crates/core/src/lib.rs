//! Parallel-in-time solution of 2D eddy-current problems.
//!
//! The space-discrete problem `M_σ a' = −K_ν a + X_s i(t)` is a DAE because
//! the conductivity vanishes outside the core. The crate provides
//!
//! - [`model`]: assembly on a structured grid, the conducting /
//!   non-conducting partition and the Schur-complement reduction,
//! - [`excitation`]: PWM drive current and its fundamental sine,
//! - [`integrators`]: implicit Euler on the DAE, explicit Euler on the
//!   reduced ODE and the explicit stability bound,
//! - [`parareal`]: the Parareal iteration combining an explicit fine and an
//!   implicit coarse propagator.

pub mod error;
pub mod excitation;
pub mod grid;
pub mod integrators;
pub mod linalg;
pub mod model;
pub mod parareal;

pub use error::{Error, Result};
