pub mod adorp;
pub mod bounds;
pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod geometry;
pub mod knowledge;
pub mod netsim;
pub mod qtable;
pub mod quadrature;
pub mod rng;
pub mod schemes;
pub mod special;
pub mod validation;

pub use error::{Error, Result};
