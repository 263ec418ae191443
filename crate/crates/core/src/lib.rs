//! Conservative discretization and explicit volume-preserving integration of
//! the barotropic quasi-geostrophic vorticity equation on a periodic grid.

pub mod arakawa;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod operators;
pub mod ordering;
pub mod prediction;
pub mod splitting;
pub mod verify;

pub use arakawa::{build_template, coefficient_entry, eval_direct, CoefficientTemplate, Scheme, State};
pub use diagnostics::{estimate_mu, invariants, AveragingAccumulator, DiagnosticsRecord};
pub use error::{QgError, Result};
pub use experiment::{resume, run, RunConfig, RunReport};
pub use grid::{build_grid, GridSpec};
pub use operators::{build_operators, OperatorSet};
pub use ordering::{bw_order, commutation_weights, mincom_order, plain_order, OrderingKind, ShearOrdering};
pub use prediction::{generate_initial, predict_mu, topography, PredictionInput, PredictionOutput};
pub use splitting::{Order, Stepper, StepperConfig};
