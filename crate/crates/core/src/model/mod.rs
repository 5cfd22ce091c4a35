//! Nonlinearity, potential, the energy functionals and hypothesis validation.

mod energy;
mod hypotheses;
mod nonlinearity;
mod potential;

pub use energy::{EnergyModel, ScaledEnergy};
pub use hypotheses::{validate_hypotheses, HypothesisCheck, HypothesisReport};
pub use nonlinearity::{Nonlinearity, PowerTerm};
pub use potential::{Monomial, Polynomial, Potential, RemainderTerm};
