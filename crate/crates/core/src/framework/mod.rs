//! The sharding framework: bootstrap, the two-phase round loop with
//! certificate-filtered shard rounds, safety monitors, and the unsharded
//! oracle used to check equivalence.
//!
//! Intra-shard consensus is idealised. A shard with at least two thirds
//! honest members outputs the greedy admissible block over its pool in id
//! order; a shard below that threshold hands the choice to the adversary.

mod config;
mod oracle;
mod shard;
mod sim;
mod world;

pub use config::{NegativeMode, RunConfig, WorkloadConfig};
pub use oracle::{compare_with_oracle, Comparison, Divergence, UnshardedOracle};
pub use shard::{greedy_admissible, prune_pool, shard_round, Message, Pending, Pool, ShardInstance, ShardOutcome};
pub use sim::{bootstrap, make_partition, Bootstrap, Breach, RoundReport, RunSummary, ShardEvent, Simulation};
pub use world::{Workload, World};
