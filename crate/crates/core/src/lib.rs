//! Mirror-Langevin and Newton-Langevin sampling for log-concave targets.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: dense SPD factorisation and finite-difference oracles.
//! - [`potentials`] and [`mirror`]: target potentials and mirror maps.
//! - [`conjugate`]: Newton inversion of gradient maps.
//! - [`samplers`]: ULA, TULA, NLA, MLA, PLA and MALA kernels and chain drivers.
//! - [`fokker_planck`]: a 1-D finite-volume solver for the mirror-Langevin
//!   Fokker-Planck equation.
//! - [`diagnostics`]: moment errors, optimal transport, divergences and
//!   inequality checks.
//! - [`harness`]: presets, configuration, experiment runs and CSV output.

pub mod conjugate;
pub mod diagnostics;
pub mod error;
pub mod fokker_planck;
pub mod geometry;
pub mod harness;
pub mod mirror;
pub mod potentials;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
pub use geometry::{Matrix, Point};
pub use mirror::Mirror;
pub use potentials::Potential;
