//! Exact computational engine for representations up to homotopy of Lie
//! algebroids and Lie groupoids.
//!
//! Everything is computed over the rationals: structure equations on both
//! the algebroid and the groupoid side, cohomology of the associated
//! complexes, and the differentiation (van Est) operators realized through
//! nilpotent-jet arithmetic on polynomial models.

pub mod algebroid;
pub mod combi;
pub mod error;
pub mod examples_gen;
pub mod graded;
pub mod groupoid;
pub mod jet;
pub mod poly;
pub mod polyops;
pub mod report;
pub mod samples;
pub mod schema;
pub mod scalar;
pub mod sparse;
pub mod van_est;

pub use error::{EngineError, Result};
pub use scalar::Rat;
