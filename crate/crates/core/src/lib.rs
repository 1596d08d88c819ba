//! Perturbation sweeps that probe image classifiers along six Gestalt
//! principles: closure, proximity, continuation, similarity, figure/ground
//! and symmetry.
//!
//! A sweep generates a perturbed copy of a labelled validation set for each
//! value of a principle's parameter, measures classifier accuracy on it, and
//! reports the drop relative to the unperturbed set.

pub mod cli;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod perturb;
pub mod protocol;
pub mod raster;
pub mod report;

pub use error::{Error, Result};
