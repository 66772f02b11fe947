//! Conflict-preserving partition of the transaction space.
//!
//! [`PartitionSpec`] splits the key space `(0, 1]` into `m` equal intervals
//! `((i-1)/m, i/m]` and routes a transaction by its sender, so every pair of
//! competing transactions (which always share a sender) lands in one shard.

use crate::keys::PublicKey;
use crate::ledger::{Block, Transaction};
use crate::Error;

/// Splits transactions into `m` pools and names the shard owning a key.
pub trait Partition: Send + Sync {
    fn shard_count(&self) -> u32;

    /// Shard (1-based) whose pool holds `tx`.
    fn which_part(&self, tx: &Transaction) -> u32;

    /// Shard (1-based) whose clients include `pk`.
    fn key_shard(&self, pk: &PublicKey) -> u32;

    /// `m` pairwise disjoint blocks whose union is `txs`.
    fn part(&self, txs: &Block) -> Vec<Block> {
        let mut parts = vec![Block::empty(); self.shard_count() as usize];
        for tx in txs.iter() {
            let i = self.which_part(tx);
            parts[(i - 1) as usize]
                .insert(tx.clone())
                .expect("input block has unique ids");
        }
        parts
    }
}

/// The interval partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionSpec {
    m: u32,
}

impl PartitionSpec {
    pub fn new(m: u32) -> Result<Self, Error> {
        if m == 0 {
            return Err(Error::InvalidConfig("shard count m must be at least 1".into()));
        }
        Ok(PartitionSpec { m })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn interval(&self, i: u32) -> KeyInterval {
        assert!((1..=self.m).contains(&i), "shard index out of range");
        KeyInterval { index: i, m: self.m }
    }
}

impl Partition for PartitionSpec {
    fn shard_count(&self) -> u32 {
        self.m
    }

    /// `⌈position(tx.from) · m⌉`.
    fn which_part(&self, tx: &Transaction) -> u32 {
        tx.from().shard(self.m)
    }

    fn key_shard(&self, pk: &PublicKey) -> u32 {
        pk.shard(self.m)
    }
}

/// Key interval `((index-1)/m, index/m]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyInterval {
    pub index: u32,
    pub m: u32,
}

impl KeyInterval {
    pub fn contains(&self, pk: &PublicKey) -> bool {
        pk.shard(self.m) == self.index
    }

    /// The whole key space.
    pub fn all() -> Self {
        KeyInterval { index: 1, m: 1 }
    }
}

/// Routes by transaction id instead of sender. Not conflict preserving:
/// two transactions of one sender can land in different shards. Exists only
/// to drive the negative tests of the safety monitors.
#[derive(Debug, Clone, Copy)]
pub struct TxIdPartition {
    m: u32,
}

impl TxIdPartition {
    pub fn new(m: u32) -> Result<Self, Error> {
        if m == 0 {
            return Err(Error::InvalidConfig("shard count m must be at least 1".into()));
        }
        Ok(TxIdPartition { m })
    }
}

impl Partition for TxIdPartition {
    fn shard_count(&self) -> u32 {
        self.m
    }

    fn which_part(&self, tx: &Transaction) -> u32 {
        crate::hash::UnitValue::from_digest(&tx.id().0).bucket(self.m)
    }

    fn key_shard(&self, pk: &PublicKey) -> u32 {
        pk.shard(self.m)
    }
}
