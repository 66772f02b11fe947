use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::Serialize;

use crate::keys::{PublicKey, Signature, SignatureScheme};
use crate::ledger::{verify, Balance, Block, LedgerContext, Transaction, TxId};
use crate::membership::Membership;

/// A consensus message tagged with the sender's membership proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub pk: PublicKey,
    pub sigma: Signature,
    pub shard: u32,
    pub round: u64,
}

#[derive(Debug, Clone)]
pub struct Pending {
    pub tx: Arc<Transaction>,
    /// Last round in which the transaction may be approved.
    pub expires: u64,
}

/// Pending transactions in canonical (id) order.
pub type Pool = BTreeMap<TxId, Pending>;

/// Drops approved and expired transactions after round `round`.
pub fn prune_pool(pool: &mut Pool, ctx: &LedgerContext, round: u64) {
    pool.retain(|id, p| p.expires > round && !ctx.contains_tx(id));
}

pub struct ShardInstance {
    pub index: u32,
    pub context: LedgerContext,
    pub pool: Pool,
    /// Members whose certificates were accepted in the last round.
    pub members: Vec<PublicKey>,
    /// Genesis transactions held in the local context.
    pub genesis_txs: usize,
}

impl ShardInstance {
    /// Transactions in the local context beyond genesis.
    pub fn local_state_size(&self) -> usize {
        self.context.tx_count() - self.genesis_txs
    }
}

/// The deterministic greedy block: walk `pool` in id order and keep a
/// transaction whenever the growing block still verifies against `ctx`.
pub fn greedy_admissible(pool: &Pool, ctx: &LedgerContext, sigs: &dyn SignatureScheme) -> Block {
    let mut spent: HashMap<PublicKey, u128> = HashMap::new();
    let mut block = Block::empty();
    for (id, p) in pool {
        let tx = &p.tx;
        if ctx.contains_tx(id) || !tx.is_well_formed() || !tx.is_valid(sigs) {
            continue;
        }
        let total = spent.get(tx.from()).copied().unwrap_or(0) + tx.total_out();
        if total as Balance <= ctx.balance(tx.from()) {
            spent.insert(*tx.from(), total);
            block.insert(tx.clone()).expect("pool ids are unique");
        }
    }
    block
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShardOutcome {
    #[serde(skip)]
    pub block: Block,
    #[serde(skip)]
    pub member_keys: Vec<PublicKey>,
    pub members: usize,
    pub byzantine: usize,
    pub discarded: usize,
    /// Messages from honest nodes that failed verification. Always 0 unless
    /// membership is broken.
    pub honest_discarded: usize,
    pub compromised: bool,
    /// `verify(block, local context)`.
    pub legal: bool,
}

/// One shard's round: filter messages by certificate, then run the idealised
/// consensus. An honest-majority shard (at least two thirds honest members)
/// outputs [`greedy_admissible`]; otherwise the adversary proposes the whole
/// pool, admissible or not. A shard without members decides the empty block.
pub fn shard_round(
    shard: &ShardInstance,
    messages: &[Message],
    round: u64,
    membership: &Membership,
    sigs: &dyn SignatureScheme,
    is_byzantine: &(dyn Fn(&PublicKey) -> bool + Sync),
) -> ShardOutcome {
    let mut members = BTreeSet::new();
    let mut discarded = 0;
    let mut honest_discarded = 0;
    for msg in messages {
        let ok = msg.shard == shard.index
            && msg.round == round
            && membership.verify_member(&msg.pk, &msg.sigma, shard.index, round, sigs);
        if ok {
            members.insert(msg.pk);
        } else {
            discarded += 1;
            honest_discarded += !is_byzantine(&msg.pk) as usize;
        }
    }
    let byzantine = members.iter().filter(|pk| is_byzantine(pk)).count();
    let honest = members.len() - byzantine;
    let compromised = !members.is_empty() && 3 * honest < 2 * members.len();
    let block = if members.is_empty() {
        Block::empty()
    } else if compromised {
        shard.pool.values().map(|p| p.tx.clone()).collect()
    } else {
        greedy_admissible(&shard.pool, &shard.context, sigs)
    };
    let legal = verify(&block, &shard.context, sigs);
    ShardOutcome {
        block,
        members: members.len(),
        member_keys: members.into_iter().collect(),
        byzantine,
        discarded,
        honest_discarded,
        compromised,
        legal,
    }
}
