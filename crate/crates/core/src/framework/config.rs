use serde::{Deserialize, Serialize};

use crate::analysis::adversary::{validate_lease, AdversaryStrategy};
use crate::sync::SyncVariant;
use crate::Error;

/// Deliberate invariant breaches used to show the monitors fire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeMode {
    #[default]
    None,
    /// Route transactions by id instead of sender.
    ConflictPartition,
    /// Shards never ingest remote support.
    BrokenSync,
}

impl std::str::FromStr for NegativeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(NegativeMode::None),
            "conflict-partition" => Ok(NegativeMode::ConflictPartition),
            "broken-sync" => Ok(NegativeMode::BrokenSync),
            other => Err(format!("unknown negative mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    /// Client accounts; 0 means one per node.
    pub accounts: usize,
    pub tx_per_round: usize,
    /// Payment amounts are uniform in `1..=max_amount`.
    pub max_amount: u64,
    /// Outputs per payment are uniform in `1..=max_outputs`.
    pub max_outputs: usize,
    pub genesis_balance: u64,
    /// Probability that a payment is replaced by a pair of large payments
    /// from the same sender, which usually compete.
    pub conflict_rate: f64,
    /// Rounds a transaction waits in the pool before it is dropped.
    pub pending_ttl: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            accounts: 0,
            tx_per_round: 50,
            max_amount: 50,
            max_outputs: 1,
            genesis_balance: 1000,
            conflict_rate: 0.1,
            pending_ttl: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Nodes.
    pub n: usize,
    /// Shards.
    pub m: u32,
    pub byzantine_fraction: f64,
    pub t_lease: u64,
    /// `None` for an adversary that never completes a corruption.
    pub t_takeover: Option<u64>,
    pub rounds: u64,
    pub seed: u64,
    pub genesis_seed: String,
    pub sync: SyncVariant,
    pub adversary: AdversaryStrategy,
    /// Candidate blocks per shard per round for the self-containment check.
    pub monitor_samples: usize,
    /// Compare every eager local context with the global state each round.
    pub check_replication: bool,
    pub halt_on_breach: bool,
    pub negative_mode: NegativeMode,
    pub workload: WorkloadConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 400,
            m: 4,
            byzantine_fraction: 0.0,
            t_lease: 1,
            t_takeover: None,
            rounds: 100,
            seed: 0,
            genesis_seed: "shardsim-genesis".into(),
            sync: SyncVariant::Lazy,
            adversary: AdversaryStrategy::None,
            monitor_samples: 20,
            check_replication: true,
            halt_on_breach: true,
            negative_mode: NegativeMode::None,
            workload: WorkloadConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.byzantine_fraction) {
            return bad(format!("byzantine_fraction {} outside [0, 1)", self.byzantine_fraction));
        }
        if self.t_lease == 0 {
            return bad("t_lease must be at least 1".into());
        }
        validate_lease(self.adversary, self.t_lease, self.t_takeover)?;
        let w = &self.workload;
        if self.accounts() < 2 {
            return bad("the workload needs at least two accounts".into());
        }
        if w.max_amount == 0 || w.max_outputs == 0 || w.genesis_balance == 0 {
            return bad("max_amount, max_outputs and genesis_balance must be positive".into());
        }
        if w.max_outputs >= self.accounts() {
            return bad("max_outputs must be below the account count".into());
        }
        if !(0.0..=1.0).contains(&w.conflict_rate) {
            return bad("conflict_rate must lie in [0, 1]".into());
        }
        if w.pending_ttl == 0 {
            return bad("pending_ttl must be at least 1".into());
        }
        Ok(())
    }

    pub fn accounts(&self) -> usize {
        if self.workload.accounts == 0 {
            self.n
        } else {
            self.workload.accounts
        }
    }

    /// Initially Byzantine nodes, `⌊b·n⌋`, none without an adversary.
    pub fn byzantine_nodes(&self) -> usize {
        if self.adversary == AdversaryStrategy::None {
            0
        } else {
            (self.n as f64 * self.byzantine_fraction).floor() as usize
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_parameters() {
        let base = RunConfig::default();
        let cases = [
            RunConfig { m: 0, ..base.clone() },
            RunConfig { byzantine_fraction: 1.0, ..base.clone() },
            RunConfig { t_lease: 0, ..base.clone() },
            RunConfig {
                adversary: AdversaryStrategy::AdaptiveGreedy,
                t_lease: 11,
                t_takeover: Some(10),
                ..base.clone()
            },
            RunConfig {
                adversary: AdversaryStrategy::AdaptiveRandom,
                t_takeover: None,
                ..base.clone()
            },
        ];
        for c in cases {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn byzantine_count_floors() {
        let c = RunConfig {
            n: 10,
            byzantine_fraction: 0.25,
            adversary: AdversaryStrategy::Static,
            ..RunConfig::default()
        };
        assert_eq!(c.byzantine_nodes(), 2);
        assert_eq!(RunConfig { adversary: AdversaryStrategy::None, ..c }.byzantine_nodes(), 0);
    }

    #[test]
    fn parses_from_toml_like_json() {
        let c: RunConfig = serde_json::from_str(r#"{"n": 40, "m": 2, "sync": "eager", "adversary": "adaptive-greedy", "t_takeover": 5}"#).unwrap();
        assert_eq!((c.n, c.m, c.sync, c.t_takeover), (40, 2, SyncVariant::Eager, Some(5)));
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
