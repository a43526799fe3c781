//! Distributed optimal load-frequency control for multi-area power systems.
//!
//! The crate models a lossless transmission network with swing and
//! turbine-governor dynamics, a peer-to-peer controller that restores
//! frequency and scheduled tie-line flows at minimum cost, a conventional
//! AGC baseline, and independent dispatch oracles to check optimality.

pub mod config;
pub mod controller;
pub mod error;
pub mod network;
pub mod oracle;
pub mod output;
pub mod plant;
pub mod scenario;
pub mod simulator;

pub use error::{Error, Result};
