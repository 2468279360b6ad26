//! Controllability certificates and control synthesis for bilinear
//! Schrödinger systems `dpsi/dt = (A + u(t) B) psi` with discrete spectrum.

pub mod certification;
pub mod control;
pub mod error;
pub mod linalg;
pub mod models;
pub mod simulation;
pub mod synthesis;

pub use error::{Error, Result};
