use std::sync::Arc;

use proptest::prelude::*;
use proptest::sample::subsequence;

use shardsim::keys::{KeyPair, KeyRegistry};
use shardsim::ledger::{
    is_competing, support_context, verify, verify_txs, Allocation, Block, EntryKind, LedgerContext, Output,
    Transaction,
};
use shardsim::partition::{Partition, PartitionSpec};

const KEYS: u64 = 6;

fn keys() -> Vec<KeyPair> {
    (0..KEYS).map(|i| KeyPair::derive(b"ledger-prop", i)).collect()
}

fn registry(keys: &[KeyPair]) -> KeyRegistry {
    let mut reg = KeyRegistry::new();
    for k in keys {
        reg.register(k).unwrap();
    }
    reg
}

/// (sender, recipient, amount) triples; nonces are assigned by position.
fn payments(max_len: usize) -> impl Strategy<Value = Vec<(usize, usize, u64)>> {
    prop::collection::vec((0..KEYS as usize, 0..KEYS as usize, 1u64..80), 0..max_len)
}

fn build(keys: &[KeyPair], spec: &[(usize, usize, u64)], nonce_base: u64) -> Vec<Arc<Transaction>> {
    spec.iter()
        .enumerate()
        .map(|(k, &(f, t, a))| {
            Arc::new(Transaction::signed(&keys[f], nonce_base + k as u64, vec![Output::new(*keys[t].public(), a)]).unwrap())
        })
        .collect()
}

fn context(keys: &[KeyPair], balances: &[u64]) -> LedgerContext {
    let alloc: Allocation = keys.iter().zip(balances).map(|(k, &b)| (*k.public(), b)).collect();
    LedgerContext::new(Arc::new(alloc))
}

/// The largest admissible prefix-greedy subset, so properties see admissible
/// blocks often.
fn admissible_subset(txs: &[Arc<Transaction>], ctx: &LedgerContext, reg: &KeyRegistry) -> Block {
    let mut block = Block::empty();
    for tx in txs {
        block.insert(tx.clone()).unwrap();
        if !verify(&block, ctx, reg) {
            block.remove(&tx.id());
        }
    }
    block
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn subsets_of_admissible_blocks_are_admissible(
        balances in prop::collection::vec(0u64..200, KEYS as usize),
        spec in payments(12),
        mask in prop::collection::vec(any::<bool>(), 12),
    ) {
        let keys = keys();
        let reg = registry(&keys);
        let ctx = context(&keys, &balances);
        let block = admissible_subset(&build(&keys, &spec, 0), &ctx, &reg);
        prop_assert!(verify(&block, &ctx, &reg));
        let sub: Block = block.iter().zip(&mask).filter(|(_, &k)| k).map(|(t, _)| t.clone()).collect();
        prop_assert!(verify(&sub, &ctx, &reg));
    }

    #[test]
    fn verify_ignores_order(
        balances in prop::collection::vec(0u64..200, KEYS as usize),
        spec in payments(10),
        seed in any::<u64>(),
    ) {
        let keys = keys();
        let reg = registry(&keys);
        let ctx = context(&keys, &balances);
        let txs = build(&keys, &spec, 0);
        let mut shuffled = txs.clone();
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(verify_txs(&txs, &ctx, &reg), verify_txs(&shuffled, &ctx, &reg));
    }

    #[test]
    fn remainder_stays_admissible_after_a_prefix(
        balances in prop::collection::vec(0u64..200, KEYS as usize),
        spec in payments(12),
        mask in prop::collection::vec(any::<bool>(), 12),
    ) {
        let keys = keys();
        let reg = registry(&keys);
        let ctx = context(&keys, &balances);
        let block = admissible_subset(&build(&keys, &spec, 0), &ctx, &reg);
        let first: Block = block.iter().zip(&mask).filter(|(_, &k)| k).map(|(t, _)| t.clone()).collect();
        let rest = block.difference(&first);
        let mut after = ctx.clone();
        after.append(1, EntryKind::Global, first);
        prop_assert!(verify(&rest, &after, &reg));
    }

    #[test]
    fn derived_balances_match_replay(
        balances in prop::collection::vec(0u64..200, KEYS as usize),
        rounds in prop::collection::vec(payments(6), 1..6),
    ) {
        let keys = keys();
        let mut ctx = context(&keys, &balances);
        for (r, spec) in rounds.iter().enumerate() {
            // appends apply whatever they are given, admissible or not
            let block: Block = build(&keys, spec, 100 * r as u64).into_iter().collect();
            ctx.append(r as u64 + 1, EntryKind::Global, block);
            prop_assert!(ctx.is_consistent());
        }
    }

    #[test]
    fn competing_transactions_share_a_sender_and_a_shard(
        balances in prop::collection::vec(0u64..150, KEYS as usize),
        background in payments(4),
        pair in subsequence((0..KEYS as usize).collect::<Vec<_>>(), 1..=2),
        to in 0..KEYS as usize,
        amounts in (1u64..150, 1u64..150),
        m in 1u32..12,
    ) {
        let keys = keys();
        let reg = registry(&keys);
        let ctx = context(&keys, &balances);
        let bg: Block = build(&keys, &background, 0).into_iter().collect();
        let (a, b) = (pair[0], *pair.last().unwrap());
        let tx1 = Arc::new(Transaction::signed(&keys[a], 1000, vec![Output::new(*keys[to].public(), amounts.0)]).unwrap());
        let tx2 = Arc::new(Transaction::signed(&keys[b], 1001, vec![Output::new(*keys[to].public(), amounts.1)]).unwrap());
        if is_competing(&tx1, &tx2, &ctx, &bg, &reg) {
            prop_assert_eq!(tx1.from(), tx2.from());
            let p = PartitionSpec::new(m).unwrap();
            prop_assert_eq!(p.which_part(&tx1), p.which_part(&tx2));
        }
    }

    #[test]
    fn sender_or_recipient_support_decides_verify(
        balances in prop::collection::vec(0u64..200, KEYS as usize),
        history in payments(16),
        candidate in payments(4),
        m in 1u32..5,
    ) {
        let keys = keys();
        let reg = registry(&keys);
        let mut ctx = context(&keys, &balances);
        ctx.append(1, EntryKind::Global, build(&keys, &history, 0).into_iter().collect());
        let p = PartitionSpec::new(m).unwrap();
        for i in 1..=m {
            let interval = p.interval(i);
            let local = support_context(&ctx, |pk| interval.contains(pk));
            let x: Block = build(&keys, &candidate, 500)
                .into_iter()
                .filter(|t| interval.contains(t.from()))
                .collect();
            prop_assert_eq!(verify(&x, &local, &reg), verify(&x, &ctx, &reg));
            // replays of history are caught locally as well
            let replay: Block = build(&keys, &history, 0)
                .into_iter()
                .filter(|t| interval.contains(t.from()))
                .take(1)
                .collect();
            prop_assert_eq!(verify(&replay, &local, &reg), verify(&replay, &ctx, &reg));
        }
    }
}
