//! Temporary migration statistics from call detail records.

pub mod aggregation;
pub mod calendar;
pub mod error;
pub mod ingest;
pub mod io;
pub mod location;
pub mod network;
pub mod pipeline;
pub mod profile;
pub mod scalar;
pub mod segmentation;
pub mod synth;
pub mod weighting;

pub use calendar::{Day, HalfMonth, Month, Window};
pub use error::{Error, Result};
pub use network::{CellId, LocationNetwork};
pub use scalar::{Exact, Scalar};

/// Migration table in `f64`, the type written to disk.
pub type MigrationTableF64 = aggregation::MigrationTable<f64>;
pub type WeightTableF64 = weighting::WeightTable<f64>;
