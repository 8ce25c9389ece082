//! Absorptive optical bistability of Λ-type atoms in a unidirectional ring
//! cavity with two feedback loops.
//!
//! The crate is organised bottom-up:
//!
//! * [`atom`]: stationary density matrix, susceptibilities, absorption factors
//!   and the two-level closed forms;
//! * [`medium`]: intensity-dependent absorption seen by the cavity;
//! * [`feedback`]: operating points, stability and the round-trip map;
//! * [`domain`]: bistability maps over the input-intensity plane;
//! * [`sweep`]: quasi-static hysteresis sweeps.

pub mod atom;
pub mod domain;
pub mod error;
pub mod feedback;
mod linalg;
pub mod medium;
pub mod sweep;

pub use atom::{AtomParams, CoherenceDamping, DensityMatrix, DriveParams, Mode, OpticalConstants};

pub use error::{DomainError, FeedbackError, ModelError, SweepError};
pub use feedback::{CavityParams, InputPoint, OperatingPoint, SolverConfig, Stability};
pub use linalg::Mat2;
pub use medium::{ExactMedium, LinearMedium, Medium, TwoLevelMedium};

