pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod optim;
pub mod stream;
pub mod unlearn;

pub use error::{Error, Result};
