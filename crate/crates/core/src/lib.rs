//! Job title mapping: maps noisy, free-text job titles onto a fixed taxonomy
//! of standard titles by combining a hyperbolic embedding of the career
//! transition graph, a semantic text vector and character n-gram similarity.

pub mod coattention;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod poincare;
pub mod reasoning;
pub mod semantic;
pub mod syntactic;
pub mod text;
pub mod tsv;

pub use error::{Error, ErrorKind, Result};
