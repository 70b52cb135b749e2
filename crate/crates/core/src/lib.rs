//! Concept-based analysis of trained classifiers: quantifying relations
//! between concepts and task classes, probing hidden layers for concepts,
//! and explaining classes with trees of concepts.

pub mod baselines;
pub mod datagen;
pub mod error;
pub mod hierarchy;
pub mod io;
pub mod nnet;
pub mod predictions;
pub mod quantify;
pub mod ranking;
pub mod report;

pub use error::{Error, Result};
pub use predictions::PredictionMatrix;
pub use quantify::{ProbVector, Relation, RelationScores};
