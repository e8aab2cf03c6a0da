pub mod eikonal;
pub mod error;
pub mod graph;
pub mod grid;
pub mod io;
pub mod landmarks;
pub mod lift;
pub mod metric;
pub mod pipeline;
pub mod raster;
pub mod render;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use grid::{angular_distance, GridSpec, LiftedField};
