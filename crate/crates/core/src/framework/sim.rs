//! Bootstrap and the two-phase round loop.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{NegativeMode, RunConfig};
use super::shard::{prune_pool, shard_round, Message, Pending, ShardInstance, ShardOutcome};
use super::world::{Workload, World};
use crate::analysis::adversary::{plan_attack, AdversaryState};
use crate::hash::unit_hash;
use crate::keys::{KeyPair, PublicKey};
use crate::ledger::{verify, Block, EntryKind, GlobalBlock, LedgerContext, Output, Transaction};
use crate::membership::{evolve_shard_seed, Membership, MembershipCertificate, SeedState};
use crate::partition::{Partition, PartitionSpec, TxIdPartition};
use crate::rng::{stream, SimRng};
use crate::sync::{collect_support, SyncVariant};
use crate::Error;

/// Safety monitor violations. Any of them halts a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Breach {
    #[error("shard {shard} lost its honest majority ({byzantine} of {members} members Byzantine)")]
    HonestMajority { shard: u32, members: usize, byzantine: usize },
    #[error("shard {shard} approved a sub-block that fails verification against its local context")]
    Illegal { shard: u32 },
    #[error("global block fails verification against the global state")]
    GlobalInadmissible,
    #[error("shard {shard}: {disagreements} candidate blocks verify differently against local and global state")]
    SelfContainment { shard: u32, disagreements: usize },
    #[error("shard {shard}: eager local context differs from the global state")]
    Replication { shard: u32 },
}

impl Breach {
    pub fn code(&self) -> &'static str {
        match self {
            Breach::HonestMajority { .. } => "honest-majority",
            Breach::Illegal { .. } => "illegal-sub-block",
            Breach::GlobalInadmissible => "global-inadmissible",
            Breach::SelfContainment { .. } => "self-containment",
            Breach::Replication { .. } => "replication",
        }
    }
}

/// One line of the per-round event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShardEvent {
    pub round: u64,
    pub shard: u32,
    pub sub_block_size: usize,
    pub member_count: usize,
    pub byzantine_count: usize,
    pub discarded_messages: usize,
    pub local_state_size: usize,
    pub global_state_size: usize,
    pub monitor_status: String,
}

#[derive(Debug, Clone)]
pub struct RoundReport {
    pub round: u64,
    pub global_block: GlobalBlock,
    pub outcomes: Vec<ShardOutcome>,
    pub events: Vec<ShardEvent>,
    pub breaches: Vec<(u64, Breach)>,
    pub candidates_checked: usize,
    pub disagreements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub n: usize,
    pub m: u32,
    pub sync: SyncVariant,
    pub rounds_requested: u64,
    pub rounds_completed: u64,
    pub halted: bool,
    pub breach_round: Option<u64>,
    pub breaches: Vec<String>,
    pub approved_txs: u64,
    pub throughput: f64,
    pub global_state_size: usize,
    pub local_state_sizes: Vec<usize>,
    /// Mean over shards of local / global non-genesis transaction counts.
    pub local_state_fraction: f64,
    pub candidates_checked: u64,
    pub disagreements: u64,
    pub honest_discarded: u64,
    pub compromised_shard_rounds: u64,
}

/// Output of the bootstrap step.
pub struct Bootstrap {
    pub shards: Vec<ShardInstance>,
    pub genesis: GlobalBlock,
    pub seeds: SeedState,
    pub membership: Membership,
    pub certificates: Vec<MembershipCertificate>,
}

/// Splits the genesis block across shards, delivers round-0 remote support
/// and draws the initial membership.
pub fn bootstrap(
    cfg: &RunConfig,
    world: &World,
    partition: &dyn Partition,
) -> Result<Bootstrap, Error> {
    let empty = LedgerContext::new(world.allocation.clone());
    if !verify(&world.genesis, &empty, world.registry.as_ref()) {
        return Err(Error::InvalidGenesis("genesis block fails verification".into()));
    }
    let genesis = GlobalBlock::new(partition.part(&world.genesis));
    let shards = (1..=cfg.m)
        .map(|i| {
            let own = genesis.sub_block(i).clone();
            let remote = remote_support(cfg, &genesis, i, 0, partition);
            let mut context = LedgerContext::new(world.allocation.clone());
            context.append(0, EntryKind::Local, own);
            context.append(0, EntryKind::Remote, remote);
            ShardInstance {
                index: i,
                genesis_txs: context.tx_count(),
                context,
                pool: Default::default(),
                members: Vec::new(),
            }
        })
        .collect();
    let (membership, certificates) =
        Membership::init(cfg.m, &world.nodes, cfg.genesis_seed.as_bytes(), cfg.t_lease)?;
    Ok(Bootstrap {
        shards,
        genesis,
        seeds: membership.current_seed().clone(),
        membership,
        certificates,
    })
}

fn remote_support(cfg: &RunConfig, global: &GlobalBlock, i: u32, round: u64, partition: &dyn Partition) -> Block {
    if cfg.negative_mode == NegativeMode::BrokenSync {
        return Block::empty();
    }
    collect_support(cfg.sync, global, i, round, partition).txs
}

pub fn make_partition(cfg: &RunConfig) -> Result<Box<dyn Partition>, Error> {
    Ok(match cfg.negative_mode {
        NegativeMode::ConflictPartition => Box::new(TxIdPartition::new(cfg.m)?),
        _ => Box::new(PartitionSpec::new(cfg.m)?),
    })
}

pub struct Simulation {
    cfg: RunConfig,
    world: World,
    workload: Workload,
    partition: Box<dyn Partition>,
    shards: Vec<ShardInstance>,
    global: LedgerContext,
    genesis_count: usize,
    membership: Membership,
    certificates: Vec<MembershipCertificate>,
    previous: Vec<Option<MembershipCertificate>>,
    node_index: HashMap<PublicKey, usize>,
    adversary: AdversaryState,
    attack_batch: usize,
    adversary_rng: SimRng,
    round: u64,
    candidate_nonce: u64,
    stats: Stats,
    halted: bool,
}

#[derive(Default)]
struct Stats {
    approved: u64,
    candidates: u64,
    disagreements: u64,
    honest_discarded: u64,
    compromised: u64,
    breaches: Vec<(u64, Breach)>,
}

impl Simulation {
    pub fn new(cfg: RunConfig) -> Result<Self, Error> {
        let world = World::build(&cfg)?;
        let partition = make_partition(&cfg)?;
        let boot = bootstrap(&cfg, &world, partition.as_ref())?;
        let mut global = LedgerContext::new(world.allocation.clone());
        global.append(0, EntryKind::Global, world.genesis.clone());
        let byz = cfg.byzantine_nodes();
        let t_takeover = if cfg.adversary.is_adaptive() { cfg.t_takeover } else { None };
        let adversary = AdversaryState::new(cfg.n, byz, t_takeover, 0..byz as u32)?;
        let attack_batch = t_takeover.map_or(0, |t| (byz / t as usize).max(1));
        let node_index = world.nodes.iter().enumerate().map(|(i, k)| (*k.public(), i)).collect();
        Ok(Simulation {
            workload: Workload::new(&cfg, &world.accounts),
            genesis_count: world.genesis.len(),
            previous: vec![None; cfg.n],
            adversary_rng: stream(cfg.seed, "adversary", 0),
            cfg,
            world,
            partition,
            shards: boot.shards,
            global,
            membership: boot.membership,
            certificates: boot.certificates,
            node_index,
            adversary,
            attack_batch,
            round: 0,
            candidate_nonce: 1 << 62,
            stats: Stats::default(),
            halted: false,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn shards(&self) -> &[ShardInstance] {
        &self.shards
    }

    pub fn global_context(&self) -> &LedgerContext {
        &self.global
    }

    pub fn membership(&self) -> &Membership {
        &self.membership
    }

    pub fn certificates(&self) -> &[MembershipCertificate] {
        &self.certificates
    }

    pub fn adversary(&self) -> &AdversaryState {
        &self.adversary
    }

    pub fn rounds_completed(&self) -> u64 {
        self.round
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    fn is_red(&self, pk: &PublicKey) -> bool {
        self.node_index.get(pk).is_some_and(|&i| self.adversary.is_red(i as u32))
    }

    fn messages(&self, round: u64) -> Vec<Vec<Message>> {
        let m = self.cfg.m;
        let mut out = vec![Vec::new(); m as usize];
        for (j, cert) in self.certificates.iter().enumerate() {
            let msg = Message { pk: cert.pk, sigma: cert.sigma, shard: cert.shard, round };
            out[(cert.shard - 1) as usize].push(msg);
            if !self.adversary.is_red(j as u32) {
                continue;
            }
            // Byzantine nodes also try to join other shards and replay stale proofs.
            if m > 1 {
                let other = cert.shard % m + 1;
                out[(other - 1) as usize].push(Message { shard: other, ..msg });
            }
            if let Some(old) = self.previous[j].filter(|old| old.sigma != cert.sigma) {
                let stale = Message { pk: old.pk, sigma: old.sigma, shard: old.shard, round };
                out[(old.shard - 1) as usize].push(stale);
            }
        }
        out
    }

    /// Runs one round. Returns `None` once the configured rounds are done or
    /// the run has halted.
    pub fn step(&mut self) -> Option<RoundReport> {
        if self.halted || self.round >= self.cfg.rounds {
            return None;
        }
        let r = self.round + 1;
        let expires = r + self.cfg.workload.pending_ttl - 1;
        for tx in self.workload.arrivals(r) {
            let i = self.partition.which_part(&tx);
            self.shards[(i - 1) as usize]
                .pool
                .insert(tx.id(), Pending { tx, expires });
        }

        // phase 1
        let messages = self.messages(r);
        let membership = &self.membership;
        let sigs = self.world.registry.as_ref();
        let red = |pk: &PublicKey| self.is_red(pk);
        let outcomes: Vec<ShardOutcome> = self
            .shards
            .par_iter()
            .zip(messages.par_iter())
            .map(|(shard, msgs)| shard_round(shard, msgs, r, membership, sigs, &red))
            .collect();

        let global_block = GlobalBlock::new(outcomes.iter().map(|o| o.block.clone()).collect());
        let mut breaches = Vec::new();
        for (k, o) in outcomes.iter().enumerate() {
            let shard = k as u32 + 1;
            if o.compromised {
                breaches.push(Breach::HonestMajority { shard, members: o.members, byzantine: o.byzantine });
            }
            if !o.legal {
                breaches.push(Breach::Illegal { shard });
            }
            self.stats.honest_discarded += o.honest_discarded as u64;
            self.stats.compromised += o.compromised as u64;
        }
        let all = global_block.union();
        if !verify(&all, &self.global, sigs) {
            breaches.push(Breach::GlobalInadmissible);
        }

        // phase 2
        for shard in &mut self.shards {
            let i = shard.index;
            let remote = remote_support(&self.cfg, &global_block, i, r, self.partition.as_ref());
            shard.context.append(r, EntryKind::Local, global_block.sub_block(i).clone());
            shard.context.append(r, EntryKind::Remote, remote);
            shard.members = outcomes[(i - 1) as usize].member_keys.clone();
        }
        self.stats.approved += all.len() as u64;
        self.global.append(r, EntryKind::Global, all);
        for shard in &mut self.shards {
            prune_pool(&mut shard.pool, &shard.context, r);
        }

        if self.cfg.sync == SyncVariant::Eager && self.cfg.check_replication {
            for shard in &self.shards {
                if !shard.context.same_tx_set(&self.global) {
                    breaches.push(Breach::Replication { shard: shard.index });
                }
            }
        }
        let (checked, disagreements) = self.check_self_containment(r, &global_block, &mut breaches);
        self.stats.candidates += checked as u64;
        self.stats.disagreements += disagreements as u64;

        self.adjust_membership(r, &global_block);

        let global_size = self.global.tx_count() - self.genesis_count;
        let events = outcomes
            .iter()
            .zip(&self.shards)
            .map(|(o, s)| {
                let status: Vec<&str> = breaches
                    .iter()
                    .filter(|b| breach_shard(b).is_none_or(|sh| sh == s.index))
                    .map(Breach::code)
                    .collect();
                ShardEvent {
                    round: r,
                    shard: s.index,
                    sub_block_size: o.block.len(),
                    member_count: o.members,
                    byzantine_count: o.byzantine,
                    discarded_messages: o.discarded,
                    local_state_size: s.local_state_size(),
                    global_state_size: global_size,
                    monitor_status: if status.is_empty() { "ok".into() } else { status.join(";") },
                }
            })
            .collect();

        self.round = r;
        let breaches: Vec<(u64, Breach)> = breaches.into_iter().map(|b| (r, b)).collect();
        self.stats.breaches.extend(breaches.iter().cloned());
        if !breaches.is_empty() && self.cfg.halt_on_breach {
            self.halted = true;
        }
        Some(RoundReport {
            round: r,
            global_block,
            outcomes,
            events,
            breaches,
            candidates_checked: checked,
            disagreements,
        })
    }

    /// Samples candidate blocks `X ⊆ TX_i` and compares `verify(X, C_i)` with
    /// `verify(X, C)` for every shard.
    fn check_self_containment(
        &mut self,
        round: u64,
        global_block: &GlobalBlock,
        breaches: &mut Vec<Breach>,
    ) -> (usize, usize) {
        let samples = self.cfg.monitor_samples;
        if samples == 0 {
            return (0, 0);
        }
        let mut rng = stream(self.cfg.seed, "monitor", round);
        let registry = self.world.registry.clone();
        let sigs = registry.as_ref();
        let (mut checked, mut total_bad) = (0, 0);
        for k in 0..self.shards.len() {
            let i = k as u32 + 1;
            let mut bad = 0;
            for _ in 0..samples {
                let Some(x) = self.candidate_block(&mut rng, i, global_block) else {
                    continue;
                };
                checked += 1;
                if verify(&x, &self.shards[k].context, sigs) != verify(&x, &self.global, sigs) {
                    bad += 1;
                }
            }
            if bad > 0 {
                breaches.push(Breach::SelfContainment { shard: i, disagreements: bad });
            }
            total_bad += bad;
        }
        (checked, total_bad)
    }

    fn candidate_block(&mut self, rng: &mut SimRng, i: u32, global_block: &GlobalBlock) -> Option<Block> {
        let accounts = self.world.accounts.len();
        let size = rng.random_range(1..=3);
        let mut x = Block::empty();
        let mut sender: Option<usize> = None;
        for _ in 0..size {
            let own = global_block.sub_block(i);
            let tx = if !own.is_empty() && rng.random_bool(0.2) {
                let pick = rng.random_range(0..own.len());
                own.iter().nth(pick).cloned()
            } else {
                // reuse the sender half the time so blocks test cumulative spend
                let reuse = sender.filter(|_| rng.random_bool(0.5));
                let mut found = None;
                for _ in 0..64 {
                    let s = reuse.unwrap_or_else(|| rng.random_range(0..accounts));
                    let tx = self.fresh_candidate(rng, s);
                    if self.partition.which_part(&tx) == i {
                        sender = Some(s);
                        found = Some(tx);
                        break;
                    }
                }
                found
            };
            if let Some(tx) = tx {
                let _ = x.insert(tx);
            }
        }
        (!x.is_empty()).then_some(x)
    }

    fn fresh_candidate(&mut self, rng: &mut SimRng, sender: usize) -> Arc<Transaction> {
        let kp: &KeyPair = &self.world.accounts[sender];
        let balance = self.global.balance(kp.public()).max(0) as u64;
        let amount = rng.random_range(balance / 2..=balance + balance / 2 + 1).max(1);
        let mut to = rng.random_range(0..self.world.accounts.len() - 1);
        if to >= sender {
            to += 1;
        }
        let out = Output::new(*self.world.accounts[to].public(), amount);
        let nonce = self.candidate_nonce;
        self.candidate_nonce += 1;
        Arc::new(Transaction::signed(kp, nonce, vec![out]).expect("one output"))
    }

    fn adjust_membership(&mut self, r: u64, global_block: &GlobalBlock) {
        let m = self.cfg.m;
        // the accepted member with the smallest proof hash leads
        let leaders: Vec<Option<usize>> = self
            .shards
            .iter()
            .map(|s| {
                s.members
                    .iter()
                    .map(|pk| self.node_index[pk])
                    .min_by_key(|&j| (unit_hash(self.certificates[j].sigma.as_bytes()).bits(), j))
            })
            .collect();
        let current = self.membership.current_seed().clone();
        let new_seeds = (1..=m)
            .map(|i| {
                let k = (i - 1) as usize;
                let empty = global_block.sub_block(i).is_empty();
                let leader = leaders[k].map(|j| &self.world.nodes[j]);
                evolve_shard_seed(current.shard_seed(i), r, empty, leader)
                    .expect("a leader exists for every non-empty sub-block")
            })
            .collect();
        let (_, redraw) = self
            .membership
            .end_of_round(r, new_seeds)
            .expect("round bookkeeping is consistent");
        for pk in redraw {
            let j = self.node_index[&pk];
            let cert = self
                .membership
                .get_membership(&self.world.nodes[j], r + 1)
                .expect("redrawn nodes are eligible");
            self.previous[j] = Some(self.certificates[j]);
            self.certificates[j] = cert;
        }
        for cert in &mut self.certificates {
            cert.round = r + 1;
        }

        if self.cfg.adversary.is_adaptive() {
            self.adversary.complete_due(r);
            let bins: Vec<u32> = self.certificates.iter().map(|c| c.shard - 1).collect();
            if let Some((targets, release)) = plan_attack(
                self.cfg.adversary,
                &self.adversary,
                &bins,
                m,
                self.attack_batch,
                &mut self.adversary_rng,
            ) {
                self.adversary
                    .launch(targets, release, r)
                    .expect("planned attacks are valid");
            }
        }
    }

    /// Runs to completion or halt, calling `on_round` after every round.
    pub fn run_with(&mut self, mut on_round: impl FnMut(&RoundReport)) -> RunSummary {
        while let Some(report) = self.step() {
            on_round(&report);
        }
        self.summary()
    }

    pub fn run(&mut self) -> RunSummary {
        self.run_with(|_| {})
    }

    pub fn summary(&self) -> RunSummary {
        let global_size = self.global.tx_count() - self.genesis_count;
        let local: Vec<usize> = self.shards.iter().map(ShardInstance::local_state_size).collect();
        let fraction = if global_size == 0 {
            0.0
        } else {
            local.iter().map(|&l| l as f64 / global_size as f64).sum::<f64>() / local.len() as f64
        };
        RunSummary {
            seed: self.cfg.seed,
            n: self.cfg.n,
            m: self.cfg.m,
            sync: self.cfg.sync,
            rounds_requested: self.cfg.rounds,
            rounds_completed: self.round,
            halted: self.halted,
            breach_round: self.stats.breaches.first().map(|(r, _)| *r),
            breaches: self.stats.breaches.iter().map(|(r, b)| format!("round {r}: {b}")).collect(),
            approved_txs: self.stats.approved,
            throughput: if self.round == 0 { 0.0 } else { self.stats.approved as f64 / self.round as f64 },
            global_state_size: global_size,
            local_state_sizes: local,
            local_state_fraction: fraction,
            candidates_checked: self.stats.candidates,
            disagreements: self.stats.disagreements,
            honest_discarded: self.stats.honest_discarded,
            compromised_shard_rounds: self.stats.compromised,
        }
    }
}

fn breach_shard(b: &Breach) -> Option<u32> {
    match b {
        Breach::HonestMajority { shard, .. }
        | Breach::Illegal { shard }
        | Breach::SelfContainment { shard, .. }
        | Breach::Replication { shard } => Some(*shard),
        Breach::GlobalInadmissible => None,
    }
}
