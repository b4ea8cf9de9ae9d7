//! Gauge-invariant, non-local optical response of few-level molecular models.

pub mod config;
pub mod error;
pub mod fields;
pub mod generator;
pub mod grid;
pub mod io;
pub mod liouville;
pub mod matrix;
pub mod model;
pub mod oracle;
pub mod response;
pub mod run;
pub mod scalar;
pub mod signals;
pub mod spectral;
pub mod units;

pub use error::{Error, Result};

pub type Grid = grid::Grid3D<f64>;
pub type ScalarField = grid::ScalarFieldG<f64>;
pub type VectorField = grid::VectorFieldG<f64>;
pub type Model = model::MolecularModel<f64>;
