//! The unsharded reference run and the sharded-versus-oracle comparison.

use std::sync::Arc;

use serde::Serialize;

use super::config::RunConfig;
use super::shard::{Pending, Pool};
use super::sim::Simulation;
use super::world::{Workload, World};
use crate::keys::KeyRegistry;
use crate::ledger::{verify_funds, Block, EntryKind, LedgerContext};
use crate::Error;

/// A single all-honest instance of the base protocol over the full
/// transaction space, fed the same arrivals as the sharded run.
pub struct UnshardedOracle {
    workload: Workload,
    registry: Arc<KeyRegistry>,
    context: LedgerContext,
    pool: Pool,
    ttl: u64,
    rounds: u64,
    round: u64,
}

impl UnshardedOracle {
    pub fn new(cfg: &RunConfig) -> Result<Self, Error> {
        let world = World::build(cfg)?;
        let mut context = LedgerContext::new(world.allocation.clone());
        context.append(0, EntryKind::Global, world.genesis.clone());
        Ok(UnshardedOracle {
            workload: Workload::new(cfg, &world.accounts),
            registry: world.registry.clone(),
            context,
            pool: Pool::new(),
            ttl: cfg.workload.pending_ttl,
            rounds: cfg.rounds,
            round: 0,
        })
    }

    pub fn context(&self) -> &LedgerContext {
        &self.context
    }

    /// Next block: walk the pool in id order, tentatively add each validly
    /// signed transaction and keep it only if the whole block still passes
    /// the replay and funds rules.
    pub fn step(&mut self) -> Option<Block> {
        if self.round >= self.rounds {
            return None;
        }
        let r = self.round + 1;
        let expires = r + self.ttl - 1;
        for tx in self.workload.arrivals(r) {
            self.pool.insert(tx.id(), Pending { tx, expires });
        }
        let mut block = Block::empty();
        for (id, p) in &self.pool {
            if !p.tx.is_valid(self.registry.as_ref()) {
                continue;
            }
            block.insert(p.tx.clone()).expect("pool ids are unique");
            if !verify_funds(&block, &self.context) {
                block.remove(id);
            }
        }
        self.context.append(r, EntryKind::Global, block.clone());
        let ctx = &self.context;
        self.pool.retain(|id, p| p.expires > r && !ctx.contains_tx(id));
        self.round = r;
        Some(block)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub round: u64,
    /// Transactions only the sharded run approved.
    pub sharded_only: usize,
    /// Transactions only the oracle approved.
    pub oracle_only: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Comparison {
    pub seed: u64,
    pub m: u32,
    pub rounds_compared: u64,
    pub approved_txs: u64,
    pub first_divergence: Option<Divergence>,
}

impl Comparison {
    pub fn equal(&self) -> bool {
        self.first_divergence.is_none()
    }
}

/// Runs the sharded simulation and the oracle in lock step, comparing each
/// round's global block with the oracle block as sets. Stops at the first
/// divergence. Monitors keep running but never halt the sharded side.
pub fn compare_with_oracle(cfg: &RunConfig) -> Result<Comparison, Error> {
    let sharded_cfg = RunConfig {
        halt_on_breach: false,
        ..cfg.clone()
    };
    let mut sim = Simulation::new(sharded_cfg)?;
    let mut oracle = UnshardedOracle::new(cfg)?;
    let mut out = Comparison {
        seed: cfg.seed,
        m: cfg.m,
        rounds_compared: 0,
        approved_txs: 0,
        first_divergence: None,
    };
    while let (Some(report), Some(expected)) = (sim.step(), oracle.step()) {
        let got = report.global_block.union();
        out.rounds_compared = report.round;
        if got != expected {
            out.first_divergence = Some(Divergence {
                round: report.round,
                sharded_only: got.difference(&expected).len(),
                oracle_only: expected.difference(&got).len(),
            });
            break;
        }
        out.approved_txs += got.len() as u64;
    }
    Ok(out)
}
