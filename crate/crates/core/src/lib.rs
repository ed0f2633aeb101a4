//! Robust linear transceiver design for multi-hop amplify-and-forward MIMO
//! relay chains under Gaussian channel-estimation errors.
//!
//! The crate jointly designs the source precoder, the relay forwarding
//! matrices and the destination LMMSE equalizer for four objectives
//! (weighted MSE, capacity, MAX-MSE, weighted sum-rate), and validates the
//! designs by seeded Monte Carlo link-level simulation:
//!
//! - [`linalg`] — complex decompositions with fixed ordering and phase
//!   conventions, plus Kronecker-structured Gaussian sampling;
//! - [`model`] — the multi-hop signal model: covariance recursion, MSE
//!   matrices, LMMSE equalizer and scalar metrics;
//! - [`objectives`] — the four design objectives, their scalar reductions
//!   and objective-dependent rotations;
//! - [`designer`] — effective per-hop channels, iterative water-filling and
//!   assembly of the optimal precoder chain;
//! - [`sim`] — seeded scenario generation, QPSK trials and parameter sweeps;
//! - [`verify`] — self-contained property suites and brute-force oracles.
//!
//! All randomness flows from explicit 64-bit seeds; identical inputs produce
//! bit-identical designs and simulation output regardless of thread count.

pub mod designer;
pub mod error;
pub mod linalg;
pub mod model;
pub mod objectives;
pub mod sim;
pub mod verify;

pub use designer::{design, nonrobust_design, Allocation, DesignOptions, Transceiver};
pub use error::{Error, Result};
pub use linalg::CMat;
pub use model::{HopModel, NetworkModel};
pub use objectives::Objective;
pub use sim::{sweep, SimConfig, SweepAxis};
