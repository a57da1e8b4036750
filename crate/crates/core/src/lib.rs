//! Free-energy equilibrium feedback gains for multi-channel linear systems.
//!
//! The crate is organized bottom-up:
//!
//! - [`sysflow`]: the plant, closed-loop flows and transition-matrix factors;
//! - [`thermo`]: Ulam discretization, invariant measures, entropy and pressure;
//! - [`game`]: best-response search for equilibrium feedback gains;
//! - [`perturb`]: stochastic perturbation and relative-entropy resilience;
//! - [`config`] and [`commands`]: TOML experiment files and the CLI drivers.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod game;
pub mod perturb;
pub mod sysflow;
pub mod thermo;

pub use error::{Error, Result};
