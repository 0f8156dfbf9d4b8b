//! Average entanglement of two-qubit quantum trajectories.
//!
//! Quantum-jump and diffusive (homodyne/heterodyne) unravelings of two-qubit
//! Lindblad dynamics, a master-equation baseline with the Wootters mixed-state
//! concurrence, and the closed-form disentanglement rates of the
//! trajectory-averaged concurrence.

pub mod error;
pub mod linalg;
pub mod state;
pub mod entanglement;
pub mod model;
pub mod sim;
pub mod qj;
pub mod lindblad;
pub mod qsd;
pub mod analytics;
pub mod stats;
pub mod ensemble;
pub mod config;

pub use error::{Error, Result};
pub use state::QubitPairState;
