//! Local drivable-space estimation for automated driving.
//!
//! The pipeline ingests fused object observations into a sliding-window
//! factor graph ([`world`]), optimizes it with a Levenberg-Marquardt backend
//! that understands an implicit-function factor over line features
//! ([`slam`], [`implicit`]), converts the optimized nodes into an artificial
//! potential field of drivability ([`drivability`]), and plans over that
//! field with an MPC trajectory planner on a kinematic bicycle model
//! ([`planner`]). The [`harness`] module provides deterministic scenarios,
//! noise injection, and the experiment runners behind the CLI.

pub mod drivability;
pub mod implicit;
pub mod slam;
pub mod se2;
pub mod world;
