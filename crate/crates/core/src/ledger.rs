//! Account-balance ledger: transactions, blocks, contexts and `Verify`.
//!
//! A transaction has exactly one sender and one or more outputs. Its
//! identifier is bound to the sender, `tx_id = H("txid" ∘ from ∘ nonce)`, so
//! a replayed identifier always belongs to a transaction of the same sender.
//!
//! Funds received inside a block are never spendable within that block: each
//! sender's budget is read from the context alone, which makes [`verify`]
//! independent of iteration order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::hash::hash_concat;
use crate::keys::{KeyPair, PublicKey, Signature, SignatureScheme};
use crate::Error;

/// Currency amount in smallest units.
pub type Amount = u64;

/// Signed balance. Valid states never go negative, but a context that has
/// absorbed an adversarial block can.
pub type Balance = i128;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TxId(pub [u8; 32]);

impl TxId {
    pub fn derive(from: &PublicKey, nonce: u64) -> Self {
        TxId(hash_concat(&[b"txid", from.id(), &nonce.to_be_bytes()]))
    }
}

impl fmt::Debug for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tx({})", hex::encode(&self.0[..6]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Output {
    pub to: PublicKey,
    pub amount: Amount,
}

impl Output {
    pub fn new(to: PublicKey, amount: Amount) -> Self {
        Output { to, amount }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transaction {
    id: TxId,
    from: PublicKey,
    nonce: u64,
    outputs: Vec<Output>,
    sig: Signature,
}

impl Transaction {
    /// Builds and signs a transaction from `kp`.
    pub fn signed(kp: &KeyPair, nonce: u64, outputs: Vec<Output>) -> Result<Self, Error> {
        if outputs.is_empty() {
            return Err(Error::NoOutputs);
        }
        let from = *kp.public();
        let mut tx = Transaction {
            id: TxId::derive(&from, nonce),
            from,
            nonce,
            outputs,
            sig: Signature([0; 32]),
        };
        tx.outputs.sort();
        tx.sig = kp.sign(&tx.signing_bytes());
        Ok(tx)
    }

    /// Assembles a transaction without checking anything. Used to model
    /// malformed or forged input.
    pub fn from_parts(
        id: TxId,
        from: PublicKey,
        nonce: u64,
        mut outputs: Vec<Output>,
        sig: Signature,
    ) -> Self {
        outputs.sort();
        Transaction {
            id,
            from,
            nonce,
            outputs,
            sig,
        }
    }

    pub fn id(&self) -> TxId {
        self.id
    }

    pub fn from(&self) -> &PublicKey {
        &self.from
    }

    pub fn nonce(&self) -> u64 {
        self.nonce
    }

    pub fn outputs(&self) -> &[Output] {
        &self.outputs
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn total_out(&self) -> u128 {
        self.outputs.iter().map(|o| o.amount as u128).sum()
    }

    pub fn pays(&self, pk: &PublicKey) -> bool {
        self.outputs.iter().any(|o| o.to == *pk)
    }

    /// Canonical serialization covered by the signature.
    ///
    /// Every field is written as a 4-byte big-endian length followed by its
    /// bytes, in the order `tx_id, from, nonce, output_count` and then
    /// `recipient, amount` per output, outputs sorted by recipient id.
    /// Integers are big-endian.
    pub fn signing_bytes(&self) -> Vec<u8> {
        fn field(buf: &mut Vec<u8>, bytes: &[u8]) {
            buf.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
            buf.extend_from_slice(bytes);
        }
        let mut buf = Vec::with_capacity(96 + self.outputs.len() * 48);
        field(&mut buf, &self.id.0);
        field(&mut buf, self.from.id());
        field(&mut buf, &self.nonce.to_be_bytes());
        field(&mut buf, &(self.outputs.len() as u32).to_be_bytes());
        for out in &self.outputs {
            field(&mut buf, out.to.id());
            field(&mut buf, &out.amount.to_be_bytes());
        }
        buf
    }

    /// Member of the transaction space: syntactically valid and signed by
    /// its sender.
    pub fn is_valid(&self, sigs: &dyn SignatureScheme) -> bool {
        self.is_well_formed() && sigs.verify(&self.from, &self.signing_bytes(), &self.sig)
    }

    pub fn is_well_formed(&self) -> bool {
        !self.outputs.is_empty() && self.id == TxId::derive(&self.from, self.nonce)
    }
}

/// An unordered set of transactions, keyed (and iterated) by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Block {
    txs: BTreeMap<TxId, Arc<Transaction>>,
}

impl Block {
    /// The empty block `⊥`.
    pub fn empty() -> Self {
        Block::default()
    }

    pub fn from_txs<I>(txs: I) -> Result<Self, Error>
    where
        I: IntoIterator<Item = Arc<Transaction>>,
    {
        let mut block = Block::empty();
        for tx in txs {
            block.insert(tx)?;
        }
        Ok(block)
    }

    pub fn insert(&mut self, tx: Arc<Transaction>) -> Result<(), Error> {
        let id = tx.id();
        if self.txs.contains_key(&id) {
            return Err(Error::DuplicateTx(id));
        }
        self.txs.insert(id, tx);
        Ok(())
    }

    pub fn remove(&mut self, id: &TxId) -> Option<Arc<Transaction>> {
        self.txs.remove(id)
    }

    pub fn contains(&self, id: &TxId) -> bool {
        self.txs.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    /// Iterates in canonical (lexicographic tx id) order.
    pub fn iter(&self) -> impl Iterator<Item = &Arc<Transaction>> + '_ {
        self.txs.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &TxId> + '_ {
        self.txs.keys()
    }

    pub fn union(&self, other: &Block) -> Block {
        let mut out = self.clone();
        for (id, tx) in &other.txs {
            out.txs.entry(*id).or_insert_with(|| tx.clone());
        }
        out
    }

    pub fn difference(&self, other: &Block) -> Block {
        Block {
            txs: self
                .txs
                .iter()
                .filter(|(id, _)| !other.txs.contains_key(id))
                .map(|(id, tx)| (*id, tx.clone()))
                .collect(),
        }
    }

    pub fn filter(&self, mut keep: impl FnMut(&Transaction) -> bool) -> Block {
        Block {
            txs: self
                .txs
                .iter()
                .filter(|(_, tx)| keep(tx))
                .map(|(id, tx)| (*id, tx.clone()))
                .collect(),
        }
    }
}

impl FromIterator<Arc<Transaction>> for Block {
    /// Later duplicates of an id are ignored.
    fn from_iter<I: IntoIterator<Item = Arc<Transaction>>>(iter: I) -> Self {
        let mut txs = BTreeMap::new();
        for tx in iter {
            txs.entry(tx.id()).or_insert(tx);
        }
        Block { txs }
    }
}

/// The round's global block: one sub-block per shard, shard 1 first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalBlock {
    sub_blocks: Vec<Block>,
}

impl GlobalBlock {
    pub fn new(sub_blocks: Vec<Block>) -> Self {
        GlobalBlock { sub_blocks }
    }

    pub fn empty(m: u32) -> Self {
        GlobalBlock {
            sub_blocks: vec![Block::empty(); m as usize],
        }
    }

    pub fn shard_count(&self) -> u32 {
        self.sub_blocks.len() as u32
    }

    /// Sub-block of shard `i` (1-based).
    pub fn sub_block(&self, i: u32) -> &Block {
        &self.sub_blocks[(i - 1) as usize]
    }

    pub fn sub_blocks(&self) -> &[Block] {
        &self.sub_blocks
    }

    /// Flattened union of all sub-blocks.
    pub fn union(&self) -> Block {
        self.iter().cloned().collect()
    }

    /// Every transaction, sub-block by sub-block.
    pub fn iter(&self) -> impl Iterator<Item = &Arc<Transaction>> + '_ {
        self.sub_blocks.iter().flat_map(|b| b.iter())
    }

    pub fn len(&self) -> usize {
        self.sub_blocks.iter().map(Block::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sub_blocks.iter().all(Block::is_empty)
    }

    /// Sub-blocks pairwise disjoint by id.
    pub fn is_disjoint(&self) -> bool {
        let mut seen = HashSet::new();
        self.iter().all(|tx| seen.insert(tx.id()))
    }
}

/// Genesis allocation: balances that exist before any block.
pub type Allocation = BTreeMap<PublicKey, Amount>;

/// Where a context entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntryKind {
    /// A full block of the unsharded ledger or a global block.
    Global,
    /// A shard's own sub-block `B_i^r`.
    Local,
    /// Remote support `RS_i^r` ingested during sync.
    Remote,
}

#[derive(Debug, Clone)]
pub struct ContextEntry {
    pub round: u64,
    pub kind: EntryKind,
    pub block: Block,
}

/// An ordered, append-only list of approved blocks plus derived state.
#[derive(Debug, Clone)]
pub struct LedgerContext {
    allocation: Arc<Allocation>,
    entries: Vec<ContextEntry>,
    balances: HashMap<PublicKey, Balance>,
    seen: HashSet<TxId>,
}

impl LedgerContext {
    /// `C^0 = ⊥` on top of a genesis allocation.
    pub fn new(allocation: Arc<Allocation>) -> Self {
        let balances = allocation
            .iter()
            .map(|(pk, amount)| (*pk, *amount as Balance))
            .collect();
        LedgerContext {
            allocation,
            entries: Vec::new(),
            balances,
            seen: HashSet::new(),
        }
    }

    pub fn allocation(&self) -> &Arc<Allocation> {
        &self.allocation
    }

    pub fn entries(&self) -> &[ContextEntry] {
        &self.entries
    }

    /// `C ∘ B`. Applies every transaction as given; admissibility is the
    /// caller's business.
    pub fn append(&mut self, round: u64, kind: EntryKind, block: Block) {
        for tx in block.iter() {
            apply(&mut self.balances, tx);
            self.seen.insert(tx.id());
        }
        self.entries.push(ContextEntry { round, kind, block });
    }

    /// Genesis allocation plus received minus sent; unknown keys hold 0.
    pub fn balance(&self, pk: &PublicKey) -> Balance {
        self.balances.get(pk).copied().unwrap_or(0)
    }

    pub fn contains_tx(&self, id: &TxId) -> bool {
        self.seen.contains(id)
    }

    pub fn tx_ids(&self) -> &HashSet<TxId> {
        &self.seen
    }

    pub fn tx_count(&self) -> usize {
        self.seen.len()
    }

    pub fn transactions(&self) -> impl Iterator<Item = &Arc<Transaction>> + '_ {
        self.entries.iter().flat_map(|e| e.block.iter())
    }

    /// Same transaction set, regardless of how entries are split.
    pub fn same_tx_set(&self, other: &LedgerContext) -> bool {
        self.seen.len() == other.seen.len() && self.seen.iter().all(|id| other.seen.contains(id))
    }

    /// Balances recomputed from the allocation and entries.
    pub fn replayed_balances(&self) -> HashMap<PublicKey, Balance> {
        let mut balances: HashMap<PublicKey, Balance> = self
            .allocation
            .iter()
            .map(|(pk, amount)| (*pk, *amount as Balance))
            .collect();
        for tx in self.transactions() {
            apply(&mut balances, tx);
        }
        balances
    }

    /// Derived maps agree with a from-scratch replay of the entries.
    pub fn is_consistent(&self) -> bool {
        let replayed = self.replayed_balances();
        let keys: HashSet<&PublicKey> = replayed.keys().chain(self.balances.keys()).collect();
        let same_balances = keys.into_iter().all(|pk| {
            replayed.get(pk).copied().unwrap_or(0) == self.balances.get(pk).copied().unwrap_or(0)
        });
        let ids: HashSet<TxId> = self.transactions().map(|tx| tx.id()).collect();
        same_balances && ids == self.seen
    }

    /// The context keeping only transactions accepted by `keep`, with the
    /// same genesis allocation and round structure.
    pub fn restricted(&self, mut keep: impl FnMut(&Transaction) -> bool) -> LedgerContext {
        let mut ctx = LedgerContext::new(self.allocation.clone());
        for entry in &self.entries {
            ctx.append(entry.round, entry.kind, entry.block.filter(&mut keep));
        }
        ctx
    }

    /// `HIST_pk(C)`: transactions sent by or paid to `pk`.
    pub fn history_of(&self, pk: &PublicKey) -> LedgerContext {
        self.restricted(|tx| tx.from() == pk || tx.pays(pk))
    }
}

fn apply(balances: &mut HashMap<PublicKey, Balance>, tx: &Transaction) {
    *balances.entry(*tx.from()).or_insert(0) -= tx.total_out() as Balance;
    for out in tx.outputs() {
        *balances.entry(out.to).or_insert(0) += out.amount as Balance;
    }
}

/// `Verify(block, ctx)`: every transaction valid and signed, no identifier
/// already in the context, and every sender's total outgoing amount covered
/// by its balance in `ctx`.
pub fn verify(block: &Block, ctx: &LedgerContext, sigs: &dyn SignatureScheme) -> bool {
    block.iter().all(|tx| tx.is_valid(sigs)) && verify_funds(block, ctx)
}

/// `Verify` without the signature check: replay and balance rules only.
pub fn verify_funds(block: &Block, ctx: &LedgerContext) -> bool {
    let mut spend: HashMap<&PublicKey, u128> = HashMap::new();
    for tx in block.iter() {
        if !tx.is_well_formed() || ctx.contains_tx(&tx.id()) {
            return false;
        }
        *spend.entry(tx.from()).or_insert(0) += tx.total_out();
    }
    spend
        .into_iter()
        .all(|(pk, total)| (total as Balance) <= ctx.balance(pk))
}

/// `Verify` over an unordered collection that may contain repeated ids.
/// Repeats make the collection inadmissible.
pub fn verify_txs<'a, I>(txs: I, ctx: &LedgerContext, sigs: &dyn SignatureScheme) -> bool
where
    I: IntoIterator<Item = &'a Arc<Transaction>>,
{
    let mut block = Block::empty();
    for tx in txs {
        if block.insert(tx.clone()).is_err() {
            return false;
        }
    }
    verify(&block, ctx, sigs)
}

/// `tx1` and `tx2` are each admissible next to `background` but not together.
pub fn is_competing(
    tx1: &Arc<Transaction>,
    tx2: &Arc<Transaction>,
    ctx: &LedgerContext,
    background: &Block,
    sigs: &dyn SignatureScheme,
) -> bool {
    let with = |txs: &[&Arc<Transaction>]| {
        let mut b = background.clone();
        for tx in txs {
            if b.insert((*tx).clone()).is_err() {
                return false;
            }
        }
        verify(&b, ctx, sigs)
    };
    with(&[tx1]) && with(&[tx2]) && !with(&[tx1, tx2])
}

/// `Supp'`: context transactions sent from, or paying to, a key accepted by
/// `in_interval`. Sufficient to decide `Verify` for any block whose senders
/// all satisfy `in_interval`.
pub fn support(
    ctx: &LedgerContext,
    mut in_interval: impl FnMut(&PublicKey) -> bool,
) -> Vec<Arc<Transaction>> {
    ctx.transactions()
        .filter(|tx| in_interval(tx.from()) || tx.outputs().iter().any(|o| in_interval(&o.to)))
        .cloned()
        .collect()
}

/// [`support`] as a context with the original round structure.
pub fn support_context(
    ctx: &LedgerContext,
    mut in_interval: impl FnMut(&PublicKey) -> bool,
) -> LedgerContext {
    ctx.restricted(|tx| in_interval(tx.from()) || tx.outputs().iter().any(|o| in_interval(&o.to)))
}
