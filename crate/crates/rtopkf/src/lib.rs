//! Experiment harness for online learning to rank with top-k feedback.
//!
//! Builds on `rtopkf-core` with the parts that need `std`: LETOR parsing and
//! synthetic query streams ([`data`]), the counterexample file format
//! ([`fixture`]), experiment configs ([`config`]), CSV-producing experiment
//! runners ([`experiment`]), and the verification suites ([`verify`]).

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod fixture;
pub mod verify;

pub use error::{Error, Result};
