//! Simulation and control toolkit for a tendon-driven soft continuum wrist.
//!
//! The wrist is modeled as a chain of planar constant-curvature segments.
//! Each segment is kinematically equivalent to a four-joint rigid chain
//! (revolute–prismatic–prismatic–revolute) carrying a point mass at the
//! middle of its chord; projecting that augmented model through the mapping
//! Jacobian yields an n-coordinate dynamic model that the controllers act on.
//!
//! Modules:
//! - [`kinematics`] — segment transforms, forward kinematics, the 4-element
//!   augmented configuration map and its Jacobians
//! - [`dynamics`] — augmented and mapped dynamics, forward dynamics, tendon
//!   force resolution
//! - [`control`] — sliding-mode controller and the PID baseline
//! - [`neural`] — dataset generation and an MLP trained to invert the tip
//!   kinematics
//! - [`tuning`] — particle swarm search over the sliding-mode gains
//! - [`sim`] — closed-loop episode runner, metrics, trace CSV I/O
//! - [`config`] — TOML run configuration shared by the CLI and tests
//! - [`reference`] — stored reference metrics printed by the reproduce command

pub mod config;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod kinematics;
pub mod neural;
pub mod reference;
pub mod sim;
pub mod tuning;

pub use error::{Error, Result};
