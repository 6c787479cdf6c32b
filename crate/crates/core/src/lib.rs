pub mod channel;
pub mod codebook;
pub mod error;
pub mod experiment;
pub mod info;
pub mod oracle;
pub mod protocol;
pub mod random_coding;
pub mod seed;
pub mod training;
pub mod types;

pub use error::{Error, Result};
