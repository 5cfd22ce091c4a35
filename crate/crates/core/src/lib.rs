//! Variational reduction of the semiclassical nonlinear Schrodinger equation
//! `-Lap u + u + V(eps x) u = f(u)` on a periodic box.

pub mod config;
pub mod eigen;
pub mod error;
pub mod field;
pub mod galerkin;
pub mod ground_state;
pub mod krylov;
pub mod linearization;
pub mod model;
pub mod perturbation;
pub mod projection;
pub mod reports;

pub use error::{Error, Result};
