//! Distributed frequency controller, gain certification and the AGC baseline.

pub mod agc;
pub mod consensus;
pub mod cost;
pub mod gains;
pub mod law;
pub mod matrix;

pub use agc::AgcConfig;
pub use consensus::{max_consensus, MaxConsensus};
pub use cost::{CostModel, QuadraticCost};
pub use gains::{certify_gains, rho_star, BusKind, ControllerGains, GainBounds, GainCertificate};
pub use law::{bus_controllers, controller_rhs, BusController, ControlMode, ControllerState, PeerMessage};
pub use matrix::controller_rhs_matrix;
