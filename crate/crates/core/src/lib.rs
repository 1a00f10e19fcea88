pub mod data;
pub mod error;
pub mod linalg;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
pub mod baseline;
pub mod experiment;
pub mod learner;
pub mod metrics;
pub mod pipeline;
pub mod propensity;
pub mod selection;
pub mod twin;
