pub mod cv_data;
pub mod error;
pub mod fraccalc;
pub mod memfract;
pub mod polyfit;
pub mod score;
pub mod spikes;
pub mod synth;

pub use error::{Error, Result};
