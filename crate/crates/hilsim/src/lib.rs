//! Hybrid simulator for robot emulation.
//!
//! A rigid "emulating" arm is torque-controlled so that, while touching a real
//! (here: simulated) environment, it reproduces the contact dynamics of a
//! different "target" robot — typically a flexible-joint or redundant arm whose
//! model runs in a real-time simulator. Two interconnection schemes are
//! provided:
//!
//! * **Scheme A** — the target model is rheonomically constrained to the
//!   emulating robot's measured pose (a DAE); the controller drives the
//!   physical contact force to match the constraint's Lagrange multiplier.
//! * **Scheme B** — the target model runs unconstrained (an ODE) driven by the
//!   measured contact force; the controller matches the pose trajectories.
//!
//! The crate also ships the supporting toolkit: manipulator models and a
//! deterministic RK4 integrator ([`dynamics`], [`integrate`]), constrained
//! dynamics and null-space reduction ([`constraint`]), Newton-Raphson and
//! closed-loop inverse kinematics with an ultimate-boundedness certificate
//! ([`ik`]), the emulation control laws ([`control`]), full simulation runs and
//! parameter sweeps ([`sim`]), and a frequency-domain stability/fidelity
//! analysis ([`freq`]).
//!
//! Start from the `examples/` directory — there is one runnable example per
//! major capability — or from [`scenario::ScenarioConfig`] and the `hilsim`
//! command-line tool.

pub mod cli;
pub mod constraint;
pub mod control;
pub mod dynamics;
pub mod environment;
pub mod error;
pub mod freq;
pub mod ik;
pub mod integrate;
pub mod scenario;
pub mod sim;
pub mod target_ctrl;
pub mod trace;

pub use error::{HilError, Result};
