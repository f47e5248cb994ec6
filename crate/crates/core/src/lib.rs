//! Joint valence classification and intensity regression for tweets with a
//! shared BiGRU and CNN encoder.

pub mod config;
pub mod corpus;
pub mod embed;
pub mod container;
mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod normalize;
pub mod pipeline;
pub mod shallow;
pub mod synthetic;

pub use error::{Error, Result};
