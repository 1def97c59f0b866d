//! Online approximate optimal control with state-following (StaF) kernels.
//!
//! The value function is approximated only in a moving neighborhood of the
//! current state, by a handful of exponential kernels whose centers follow
//! the state. A critic learns the kernel weights from Bellman errors
//! evaluated on the trajectory and at extrapolated points nearby; an actor
//! tracks the critic while the control is applied.
//!
//! Module map:
//! - [`kernel`]: kernels, centers, gradients
//! - [`dynamics`]: plants, costs, the analytic benchmark, tracking transform
//! - [`adp`]: Bellman errors and the critic / actor / gain-matrix laws
//! - [`excitation`]: extrapolation sampling and excitation diagnostics
//! - [`sysid`], [`savgol`]: concurrent-learning drift identification
//! - [`ode`], [`sim`]: integration and the two experiments
//! - [`report`]: CSV serialization of trajectories

pub mod adp;
pub mod dynamics;
pub mod error;
pub mod excitation;
pub mod kernel;
pub mod ode;
pub mod report;
pub mod savgol;
pub mod sim;
pub mod sysid;

pub use error::{Result, StafError};
