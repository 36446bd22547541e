pub mod data;
pub mod error;
pub mod experiment;
pub mod filters;
pub mod learners;
pub mod metrics;
pub mod optimize;
pub mod params;
pub mod preprocess;
pub mod stats;
pub mod synth;
pub mod util;

pub use error::{Error, Result};
