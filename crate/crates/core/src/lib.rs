//! Variational formulas for the free energy of vector spin glasses.

pub mod error;
pub mod finiten;
pub mod functional;
pub mod model;
pub mod optim;
pub mod paths;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod symcone;
pub mod varforms;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SymMatrix64 = symcone::SymMatrix<f64>;
pub type SymMatrix32 = symcone::SymMatrix<f32>;
pub type PsdMatrix64 = symcone::PsdMatrix<f64>;
pub type PsdMatrix32 = symcone::PsdMatrix<f32>;
pub type StepPath64 = paths::StepPath<f64>;
pub type StepPath32 = paths::StepPath<f32>;
pub type MixtureModel64 = model::MixtureModel<f64>;
pub type MixtureModel32 = model::MixtureModel<f32>;
pub type SpinMeasure64 = model::SpinMeasure<f64>;
pub type SpinMeasure32 = model::SpinMeasure<f32>;
