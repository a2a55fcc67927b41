pub mod adapter;
pub mod align;
pub mod bridge;
pub mod channel;
pub mod corpus;
pub mod critic;
pub mod decoder;
pub mod dist;
pub mod error;
pub mod eval;
pub mod exec;
pub mod experiment;
pub mod ged;
pub mod lm;
pub mod model_file;
pub mod scorer;
pub mod synth;
pub mod table;
pub mod vocab;
