//! Probabilistic analysis of shard compromise: analytic bounds, static
//! balls-into-bins Monte Carlo, and the iterated process under an adaptive
//! adversary.

pub mod adversary;
pub mod bins;
pub mod bounds;
pub mod iterated;
pub mod stats;
