//! Hot-spot detection in count tensors indexed by location, category and
//! period. Counts are modelled as Poisson with a log-rate split into a
//! smooth B-spline background and a sparse hot-spot component; a CUSUM chart
//! on the projected residuals raises the alarm and the hot-spot slice at the
//! alarm period localizes the affected cells.

pub mod basis;
pub mod config;
pub mod error;
pub mod evalkit;
pub mod io;
pub mod linalg;
pub mod localize;
pub mod manifest;
pub mod model;
pub mod monitor;
pub mod pipeline;
pub mod rng;
pub mod simgen;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
