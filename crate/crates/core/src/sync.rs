//! Remote-support collection run by every shard after a global block.

use serde::{Deserialize, Serialize};

use crate::ledger::{Block, GlobalBlock};
use crate::partition::Partition;

/// Transactions shard `shard` ingests from other shards' sub-blocks of
/// round `round`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteSupport {
    pub shard: u32,
    pub round: u64,
    pub txs: Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyncVariant {
    /// Every remote transaction; local contexts replicate the global state.
    Eager,
    /// Remote transactions paying at least one of the shard's clients.
    Lazy,
}

impl std::str::FromStr for SyncVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eager" => Ok(SyncVariant::Eager),
            "lazy" => Ok(SyncVariant::Lazy),
            other => Err(format!("unknown sync variant `{other}`")),
        }
    }
}

/// Everything in the global block that was not routed to shard `i`.
pub fn eager_collect_support(
    global: &GlobalBlock,
    i: u32,
    round: u64,
    partition: &dyn Partition,
) -> RemoteSupport {
    let txs = global
        .iter()
        .filter(|tx| partition.which_part(tx) != i)
        .cloned()
        .collect();
    RemoteSupport { shard: i, round, txs }
}

/// Remote transactions with an output to one of shard `i`'s clients. A
/// transaction paying several shards is delivered whole to each of them.
pub fn lazy_collect_support(
    global: &GlobalBlock,
    i: u32,
    round: u64,
    partition: &dyn Partition,
) -> RemoteSupport {
    let txs = global
        .iter()
        .filter(|tx| {
            partition.which_part(tx) != i
                && tx.outputs().iter().any(|o| partition.key_shard(&o.to) == i)
        })
        .cloned()
        .collect();
    RemoteSupport { shard: i, round, txs }
}

pub fn collect_support(
    variant: SyncVariant,
    global: &GlobalBlock,
    i: u32,
    round: u64,
    partition: &dyn Partition,
) -> RemoteSupport {
    match variant {
        SyncVariant::Eager => eager_collect_support(global, i, round, partition),
        SyncVariant::Lazy => lazy_collect_support(global, i, round, partition),
    }
}
