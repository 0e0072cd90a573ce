pub mod annotation;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod filtering;
pub mod fixtures;
pub mod fsutil;
pub mod models;
pub mod pipeline;
pub mod porter;
pub mod preprocess;
#[cfg(feature = "server")]
pub mod service;
pub mod synth;

pub use error::{Error, Result};
