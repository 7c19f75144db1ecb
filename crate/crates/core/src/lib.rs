//! Coupled continuous-time Glauber dynamics on random regular graphs.
//!
//! The crate is organised bottom-up: [`graph`] builds and audits the
//! underlying graphs, [`coupling`] produces the shared event stream,
//! [`dynamics`] runs coupled chains, [`spacetime`] tracks minus clusters and
//! [`analysis`] holds exact oracles. [`harness`] ties them into experiments.

pub mod analysis;
pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod harness;
pub mod spacetime;

pub use error::{Error, Result};
