//! Reference membership vectors: a fixed genesis seed and key set, the seed
//! chain under empty sub-blocks, and every key's certificate per round.

use serde::{Deserialize, Serialize};

use crate::keys::KeyPair;
use crate::membership::{evolve_shard_seed, Membership, MembershipCertificate};
use crate::Error;

pub const GOLDEN_GENESIS_SEED: &[u8] = b"shardsim-golden-vectors";
pub const GOLDEN_KEYS: u64 = 16;
pub const GOLDEN_SHARDS: u32 = 4;
pub const GOLDEN_LEASES: [u64; 2] = [1, 5];
pub const GOLDEN_ROUNDS: u64 = 10;

pub fn golden_keys() -> Vec<KeyPair> {
    (0..GOLDEN_KEYS).map(|i| KeyPair::derive(b"golden", i)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenRound {
    pub round: u64,
    pub global_seed: String,
    pub certificates: Vec<MembershipCertificate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenCase {
    pub t_lease: u64,
    pub rounds: Vec<GoldenRound>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenVectors {
    pub genesis_seed: String,
    pub m: u32,
    pub public_keys: Vec<String>,
    pub cases: Vec<GoldenCase>,
}

/// Drives a membership instance through `rounds` rounds of empty sub-blocks,
/// calling `visit` at the start of every round.
pub fn for_each_round(
    m: u32,
    keys: &[KeyPair],
    genesis_seed: &[u8],
    t_lease: u64,
    rounds: u64,
    mut visit: impl FnMut(u64, &Membership) -> Result<(), Error>,
) -> Result<(), Error> {
    let (mut membership, _) = Membership::init(m, keys, genesis_seed, t_lease)?;
    for r in 1..=rounds {
        visit(r, &membership)?;
        let seeds = (1..=m)
            .map(|i| evolve_shard_seed(membership.current_seed().shard_seed(i), r, true, None))
            .collect::<Result<Vec<_>, _>>()?;
        membership.end_of_round(r, seeds)?;
    }
    Ok(())
}

pub fn generate(
    m: u32,
    keys: &[KeyPair],
    genesis_seed: &[u8],
    leases: &[u64],
    rounds: u64,
) -> Result<GoldenVectors, Error> {
    let mut cases = Vec::new();
    for &t_lease in leases {
        let mut out = Vec::new();
        for_each_round(m, keys, genesis_seed, t_lease, rounds, |r, ms| {
            let certificates = keys
                .iter()
                .map(|kp| ms.get_membership(kp, r))
                .collect::<Result<_, _>>()?;
            out.push(GoldenRound {
                round: r,
                global_seed: hex::encode(ms.current_seed().global_seed()),
                certificates,
            });
            Ok(())
        })?;
        cases.push(GoldenCase { t_lease, rounds: out });
    }
    Ok(GoldenVectors {
        genesis_seed: hex::encode(genesis_seed),
        m,
        public_keys: keys.iter().map(|k| k.public().to_hex()).collect(),
        cases,
    })
}

/// The standard vector set.
pub fn standard() -> Result<GoldenVectors, Error> {
    generate(
        GOLDEN_SHARDS,
        &golden_keys(),
        GOLDEN_GENESIS_SEED,
        &GOLDEN_LEASES,
        GOLDEN_ROUNDS,
    )
}

impl GoldenVectors {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("vectors serialize");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, Error> {
        serde_json::from_str(s).map_err(|e| Error::Decode(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape() {
        let g = standard().unwrap();
        assert_eq!(g.cases.len(), 2);
        for c in &g.cases {
            assert_eq!(c.rounds.len(), GOLDEN_ROUNDS as usize);
            for r in &c.rounds {
                assert_eq!(r.certificates.len(), GOLDEN_KEYS as usize);
                assert!(r.certificates.iter().all(|c| (1..=4).contains(&c.shard)));
            }
        }
        assert_eq!(GoldenVectors::from_json(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn single_round_lease_redraws_every_round() {
        let g = standard().unwrap();
        let case = &g.cases[0];
        for r in &case.rounds {
            assert!(r.certificates.iter().all(|c| c.seed_round == r.round));
        }
        let lease5 = &g.cases[1];
        for r in &lease5.rounds {
            assert!(r.certificates.iter().all(|c| c.seed_round <= r.round && c.seed_round + 5 > r.round));
        }
    }
}
