pub mod annotation;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod instruct;
pub mod jsonl;
pub mod mask;
pub mod metrics;
pub mod model;
pub mod template;

pub use error::{Error, Result};
