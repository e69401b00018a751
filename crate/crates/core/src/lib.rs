pub mod breaker;
pub mod circuit;
pub mod config;
pub mod error;
pub mod grid;
pub mod network;
pub mod protection;
pub mod report;
pub mod scenario;

pub use error::{Result, SimError};
