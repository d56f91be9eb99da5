//! Two-mode Bose-Josephson junction under phase, number, tunneling and loss
//! noise: exact sectored master equation, truncated-Wigner ensembles, linearized
//! rate predictions, double-well trap extraction and chip noise models.

pub mod bosonic;
pub mod cli;
pub mod config;
pub mod constants;
pub mod error;
pub mod lindblad;
pub mod model;
pub mod noise;
pub mod ode;
pub mod semiclassical;
pub mod trap;
pub mod tridiag;

pub use error::{Error, Result};
