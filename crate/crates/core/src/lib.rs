//! Simulator for a generic blockchain sharding framework.
//!
//! A base protocol's transaction space is split across `m` shards by a
//! conflict-preserving [`partition`]; after every round each shard pulls the
//! remote support it needs through [`sync`], and nodes are assigned to shards
//! by the VRF-style [`membership`] scheme. The [`framework`] module runs the
//! round loop with safety monitors, and [`analysis`] holds the
//! balls-into-bins bounds and Monte Carlo machinery used to check the
//! honest-majority guarantee.

pub mod analysis;
pub mod error;
pub mod framework;
pub mod golden;
pub mod hash;
pub mod keys;
pub mod ledger;
pub mod membership;
pub mod partition;
pub mod rng;
pub mod sync;

pub use error::Error;
pub use framework::{RunConfig, Simulation};
pub use hash::UnitValue;
pub use keys::{KeyPair, PublicKey};

/// Bound record in double precision, the default for reports.
pub type FailureBound = analysis::bounds::FailureBound<f64>;
/// Single-precision bound record; use the log fields where values underflow.
pub type FailureBoundF32 = analysis::bounds::FailureBound<f32>;
