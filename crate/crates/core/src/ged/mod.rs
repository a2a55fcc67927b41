//! Incremental grammatical error detection.

pub mod data;
pub mod features;
pub mod labels;
pub mod logreg;
pub mod model;

pub use labels::{label_alignment, GedLabel, Labeling};
pub use model::{GedCritic, GedExample, GedModel, OracleGed};
