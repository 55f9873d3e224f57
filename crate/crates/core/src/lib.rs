//! Pilot assignment for cell-free massive MIMO.
//!
//! The crate bundles the closed-form downlink throughput model, a set of
//! model-based pilot assigners (random, greedy, master-AP, location-based and
//! exhaustive search), a small statevector/density-matrix quantum simulator,
//! and a hybrid quantum-classical convolutional network that learns pilot
//! assignments from large-scale fading coefficients.

pub mod baselines;
pub mod error;
pub mod hqcnn;
pub mod lab;
pub mod qsim;
pub mod scenario;
pub mod throughput;

pub use error::{Error, Result};
pub use scenario::{ChannelStats, LsfMatrix, SystemConfig, Topology};
pub use throughput::{PilotAssignment, RateReport, SoftAssignment};
