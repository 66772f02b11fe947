//! Deterministic keys, genesis block and payment stream shared by the sharded
//! run and the unsharded oracle.

use std::sync::Arc;

use rand::Rng;

use super::config::RunConfig;
use crate::keys::{KeyPair, KeyRegistry, PublicKey};
use crate::ledger::{Allocation, Amount, Block, Output, Transaction};
use crate::rng::stream;
use crate::Error;

/// Key material for one run.
pub struct World {
    pub nodes: Vec<KeyPair>,
    pub accounts: Vec<KeyPair>,
    pub mint: KeyPair,
    pub registry: Arc<KeyRegistry>,
    pub allocation: Arc<Allocation>,
    /// One grant from the mint to every account.
    pub genesis: Block,
}

impl World {
    pub fn build(cfg: &RunConfig) -> Result<Self, Error> {
        cfg.validate()?;
        let nodes: Vec<KeyPair> = (0..cfg.n as u64).map(|i| KeyPair::derive(b"node", i)).collect();
        let accounts: Vec<KeyPair> = (0..cfg.accounts() as u64)
            .map(|i| KeyPair::derive(b"account", i))
            .collect();
        let mint = KeyPair::derive(b"mint", 0);
        let mut registry = KeyRegistry::new();
        registry.register(&mint)?;
        for kp in nodes.iter().chain(&accounts) {
            registry.register(kp)?;
        }
        let grant = cfg.workload.genesis_balance;
        let supply = grant
            .checked_mul(accounts.len() as u64)
            .ok_or_else(|| Error::InvalidGenesis("genesis supply overflows".into()))?;
        let allocation: Allocation = [(*mint.public(), supply)].into_iter().collect();
        let genesis = accounts
            .iter()
            .enumerate()
            .map(|(i, kp)| {
                Transaction::signed(&mint, i as u64, vec![Output::new(*kp.public(), grant)]).map(Arc::new)
            })
            .collect::<Result<Block, _>>()?;
        Ok(World {
            nodes,
            accounts,
            mint,
            registry: Arc::new(registry),
            allocation: Arc::new(allocation),
            genesis,
        })
    }
}

/// Round-indexed payment stream. Independent of ledger state, so the sharded
/// run and the oracle see identical arrivals.
pub struct Workload {
    seed: u64,
    accounts: Vec<KeyPair>,
    nonces: Vec<u64>,
    tx_per_round: usize,
    max_amount: Amount,
    max_outputs: usize,
    genesis_balance: Amount,
    conflict_rate: f64,
}

impl Workload {
    pub fn new(cfg: &RunConfig, accounts: &[KeyPair]) -> Self {
        let w = &cfg.workload;
        Workload {
            seed: cfg.seed,
            accounts: accounts.to_vec(),
            nonces: vec![0; accounts.len()],
            tx_per_round: w.tx_per_round,
            max_amount: w.max_amount,
            max_outputs: w.max_outputs,
            genesis_balance: w.genesis_balance,
            conflict_rate: w.conflict_rate,
        }
    }

    fn next_nonce(&mut self, sender: usize) -> u64 {
        let n = self.nonces[sender];
        self.nonces[sender] += 1;
        n
    }

    fn recipients<R: Rng>(&self, rng: &mut R, sender: usize, count: usize) -> Vec<PublicKey> {
        let mut picked: Vec<usize> = Vec::with_capacity(count);
        while picked.len() < count {
            let j = rng.random_range(0..self.accounts.len());
            if j != sender && !picked.contains(&j) {
                picked.push(j);
            }
        }
        picked.into_iter().map(|j| *self.accounts[j].public()).collect()
    }

    /// Arrivals for `round`. Must be called for rounds in increasing order.
    pub fn arrivals(&mut self, round: u64) -> Vec<Arc<Transaction>> {
        let mut rng = stream(self.seed, "workload", round);
        let mut txs = Vec::with_capacity(self.tx_per_round + 8);
        for _ in 0..self.tx_per_round {
            let sender = rng.random_range(0..self.accounts.len());
            if rng.random_bool(self.conflict_rate) {
                let big = self.genesis_balance / 2 + 1..=self.genesis_balance.max(self.genesis_balance / 2 + 1);
                for _ in 0..2 {
                    let to = self.recipients(&mut rng, sender, 1);
                    let amount = rng.random_range(big.clone());
                    let nonce = self.next_nonce(sender);
                    txs.push(self.sign(sender, nonce, to.into_iter().map(|pk| Output::new(pk, amount)).collect()));
                }
            } else {
                let outs = rng.random_range(1..=self.max_outputs);
                let to = self.recipients(&mut rng, sender, outs);
                let outputs = to
                    .into_iter()
                    .map(|pk| Output::new(pk, rng.random_range(1..=self.max_amount)))
                    .collect();
                let nonce = self.next_nonce(sender);
                txs.push(self.sign(sender, nonce, outputs));
            }
        }
        txs
    }

    fn sign(&self, sender: usize, nonce: u64, outputs: Vec<Output>) -> Arc<Transaction> {
        Arc::new(Transaction::signed(&self.accounts[sender], nonce, outputs).expect("outputs are non-empty"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{verify, LedgerContext};

    fn small() -> RunConfig {
        RunConfig {
            n: 20,
            m: 2,
            ..RunConfig::default()
        }
    }

    #[test]
    fn genesis_is_valid_under_empty_context() {
        let w = World::build(&small()).unwrap();
        let ctx = LedgerContext::new(w.allocation.clone());
        assert_eq!(w.genesis.len(), 20);
        assert!(verify(&w.genesis, &ctx, w.registry.as_ref()));
    }

    #[test]
    fn workload_is_reproducible() {
        let cfg = small();
        let w = World::build(&cfg).unwrap();
        let mut a = Workload::new(&cfg, &w.accounts);
        let mut b = Workload::new(&cfg, &w.accounts);
        for r in 1..5 {
            let xa: Vec<_> = a.arrivals(r).iter().map(|t| t.id()).collect();
            let xb: Vec<_> = b.arrivals(r).iter().map(|t| t.id()).collect();
            assert_eq!(xa, xb);
            assert!(xa.len() >= cfg.workload.tx_per_round);
        }
    }

    #[test]
    fn payments_never_pay_the_sender() {
        let cfg = RunConfig {
            workload: crate::framework::WorkloadConfig {
                max_outputs: 3,
                ..Default::default()
            },
            ..small()
        };
        let w = World::build(&cfg).unwrap();
        let mut wl = Workload::new(&cfg, &w.accounts);
        for tx in wl.arrivals(1) {
            assert!(!tx.pays(tx.from()));
            let mut to: Vec<_> = tx.outputs().iter().map(|o| o.to).collect();
            to.dedup();
            assert_eq!(to.len(), tx.outputs().len());
        }
    }
}
