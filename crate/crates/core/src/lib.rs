//! Social-signal prediction for triadic conversations: data model, scene
//! files and preprocessing, a synthetic scene generator, the three
//! prediction tasks and their evaluation.

pub mod container;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod synth;
pub mod tasks;

pub use error::{CoreError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
