pub mod embed;
pub mod error;
pub mod genmodel;
pub mod harness;
pub mod measure;
pub mod recover;
pub mod rng;
mod serde_vec;

pub use error::{Error, Result};
