pub mod advgen;
pub mod classify;
pub mod data;
pub mod error;
pub mod experiment;
pub mod grassmann;
pub mod linalg;
pub mod ot;
pub mod representation;
pub mod srot;

pub use error::{Error, Result};
