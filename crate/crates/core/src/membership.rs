//! Tamper-proof shard assignment with leased, slot-staggered reshuffling.
//!
//! A node's certificate is `σ = sign(sk, seed^{r'})` and its shard is
//! `⌈.H(σ) · m⌉`. With a lease of `t_lease` rounds each node owns a public
//! slot `t_shuffle ∈ [0, t_lease)`; its certificate for round `r` signs the
//! global seed of the most recent round `r' ≤ r` with
//! `r' ≡ t_shuffle (mod t_lease)`. A lease of one round re-draws every node
//! every round.
//!
//! Byte conventions:
//! * `seed_i^1 = H(genesis_seed ∘ be64(i))`, shards numbered from 1;
//! * `seed^r = H(seed_1^r ∘ … ∘ seed_m^r)`;
//! * `seed_i^{r+1} = H(seed_i^r ∘ be64(r+1))` after an empty sub-block, and
//!   `H(sign(sk_leader, seed_i^r ∘ be64(r+1)))` otherwise;
//! * `t_shuffle = be64(H(pk ∘ seed)[..8]) mod t_lease`.
//!
//! Genesis nodes hold their first certificate from round 1 and sign `seed^1`
//! until their first slot comes up. A node registered in round `t_join > 0`
//! is benched until round `t_join + t_lease`, when its slot is drawn from
//! that round's seed; its first certificate signs that same seed.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::hash::{hash, hash_concat, leading_u64, unit_hash, Digest};
use crate::keys::{KeyPair, PublicKey, Signature, SignatureScheme};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedState {
    round: u64,
    #[serde(with = "hex_digests")]
    shard_seeds: Vec<Digest>,
    #[serde(with = "hex_digest")]
    global_seed: Digest,
}

impl SeedState {
    /// Round-1 seeds derived from the configured genesis seed.
    pub fn genesis(genesis_seed: &[u8], m: u32) -> Self {
        let shard_seeds = (1..=m as u64)
            .map(|i| hash_concat(&[genesis_seed, &i.to_be_bytes()]))
            .collect();
        SeedState::from_shard_seeds(1, shard_seeds)
    }

    pub fn from_shard_seeds(round: u64, shard_seeds: Vec<Digest>) -> Self {
        let global_seed = combine(&shard_seeds);
        SeedState {
            round,
            shard_seeds,
            global_seed,
        }
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn shard_seeds(&self) -> &[Digest] {
        &self.shard_seeds
    }

    /// Seed of shard `i` (1-based).
    pub fn shard_seed(&self, i: u32) -> &Digest {
        &self.shard_seeds[(i - 1) as usize]
    }

    pub fn global_seed(&self) -> &Digest {
        &self.global_seed
    }
}

fn combine(shard_seeds: &[Digest]) -> Digest {
    let parts: Vec<&[u8]> = shard_seeds.iter().map(|s| s.as_slice()).collect();
    hash_concat(&parts)
}

/// Next-round seed of one shard.
pub fn evolve_shard_seed(
    seed: &Digest,
    round: u64,
    sub_block_empty: bool,
    leader: Option<&KeyPair>,
) -> Result<Digest, Error> {
    let next = (round + 1).to_be_bytes();
    if sub_block_empty {
        return Ok(hash_concat(&[seed, &next]));
    }
    let leader = leader.ok_or(Error::MissingLeader)?;
    let mut msg = Vec::with_capacity(40);
    msg.extend_from_slice(seed);
    msg.extend_from_slice(&next);
    Ok(hash(leader.sign(&msg).as_bytes()))
}

/// `H(pk ∘ seed) mod t_lease`.
pub fn shuffle_slot(pk: &PublicKey, seed: &Digest, t_lease: u64) -> u64 {
    leading_u64(&hash_concat(&[pk.id(), seed])) % t_lease
}

/// Shard a signature binds to: `⌈.H(σ) · m⌉`, zero mapped to shard 1.
pub fn shard_of_signature(sigma: &Signature, m: u32) -> u32 {
    unit_hash(sigma.as_bytes()).bucket(m)
}

/// Public bookkeeping for one participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub pk: PublicKey,
    pub t_join: u64,
    /// Unset while the node is benched.
    pub t_shuffle: Option<u64>,
}

impl NodeRecord {
    /// First round the node may hold a certificate.
    pub fn first_round(&self, t_lease: u64) -> u64 {
        if self.t_join == 0 {
            1
        } else {
            self.t_join + t_lease
        }
    }

    pub fn is_eligible(&self, round: u64, t_lease: u64) -> bool {
        self.t_shuffle.is_some() && round >= self.first_round(t_lease)
    }

    /// Round whose seed the node's round-`round` certificate signs.
    pub fn seed_round(&self, round: u64, t_lease: u64) -> Option<u64> {
        let t_shuffle = self.t_shuffle?;
        if round < self.first_round(t_lease) {
            return None;
        }
        let slot = round % t_lease;
        let diff = (slot + t_lease - t_shuffle) % t_lease;
        Some(round.saturating_sub(diff).max(self.first_round(t_lease)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipCertificate {
    pub pk: PublicKey,
    pub shard: u32,
    pub sigma: Signature,
    pub round: u64,
    pub seed_round: u64,
}

/// Seeds, records and the lease schedule.
#[derive(Debug, Clone)]
pub struct Membership {
    m: u32,
    t_lease: u64,
    records: BTreeMap<PublicKey, NodeRecord>,
    /// The last `t_lease` seed states, newest at the back.
    seeds: VecDeque<SeedState>,
}

impl Membership {
    /// Seeds round 1, records every genesis key with `t_join = 0`, and draws
    /// the initial assignment.
    pub fn init(
        m: u32,
        keys: &[KeyPair],
        genesis_seed: &[u8],
        t_lease: u64,
    ) -> Result<(Self, Vec<MembershipCertificate>), Error> {
        if m == 0 {
            return Err(Error::InvalidConfig("shard count m must be at least 1".into()));
        }
        if t_lease == 0 {
            return Err(Error::InvalidConfig("t_lease must be at least 1".into()));
        }
        let seed1 = SeedState::genesis(genesis_seed, m);
        let mut records = BTreeMap::new();
        for kp in keys {
            let pk = *kp.public();
            let record = NodeRecord {
                pk,
                t_join: 0,
                t_shuffle: Some(shuffle_slot(&pk, seed1.global_seed(), t_lease)),
            };
            if records.insert(pk, record).is_some() {
                return Err(Error::DuplicateKey(pk));
            }
        }
        let membership = Membership {
            m,
            t_lease,
            records,
            seeds: VecDeque::from([seed1]),
        };
        let assignment = keys
            .iter()
            .map(|kp| membership.get_membership(kp, 1))
            .collect::<Result<_, _>>()?;
        Ok((membership, assignment))
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn t_lease(&self) -> u64 {
        self.t_lease
    }

    pub fn current_round(&self) -> u64 {
        self.current_seed().round()
    }

    pub fn current_seed(&self) -> &SeedState {
        self.seeds.back().expect("at least one seed state is retained")
    }

    pub fn seed_at(&self, round: u64) -> Result<&SeedState, Error> {
        let oldest = self.seeds.front().map(SeedState::round).unwrap_or(0);
        if round < oldest || round > self.current_round() {
            return Err(Error::MissingSeed(round));
        }
        Ok(&self.seeds[(round - oldest) as usize])
    }

    pub fn record(&self, pk: &PublicKey) -> Option<&NodeRecord> {
        self.records.get(pk)
    }

    pub fn records(&self) -> impl Iterator<Item = &NodeRecord> + '_ {
        self.records.values()
    }

    /// The certificate `kp` holds in round `round`. Identical for every
    /// round of one personal epoch.
    pub fn get_membership(&self, kp: &KeyPair, round: u64) -> Result<MembershipCertificate, Error> {
        let pk = *kp.public();
        let record = self.records.get(&pk).ok_or(Error::UnknownKey(pk))?;
        let seed_round = record
            .seed_round(round, self.t_lease)
            .ok_or(Error::Ineligible { pk, round })?;
        let seed = self.seed_at(seed_round)?;
        let sigma = kp.sign(seed.global_seed());
        Ok(MembershipCertificate {
            pk,
            shard: shard_of_signature(&sigma, self.m),
            sigma,
            round,
            seed_round,
        })
    }

    /// Does `sigma` prove `pk`'s membership in shard `i` for round `round`?
    pub fn verify_member(
        &self,
        pk: &PublicKey,
        sigma: &Signature,
        i: u32,
        round: u64,
        sigs: &dyn SignatureScheme,
    ) -> bool {
        if shard_of_signature(sigma, self.m) != i {
            return false;
        }
        let Some(record) = self.records.get(pk) else {
            return false;
        };
        let Some(seed_round) = record.seed_round(round, self.t_lease) else {
            return false;
        };
        match self.seed_at(seed_round) {
            Ok(seed) => sigs.verify(pk, seed.global_seed(), sigma),
            Err(_) => false,
        }
    }

    pub fn verify_certificate(&self, cert: &MembershipCertificate, sigs: &dyn SignatureScheme) -> bool {
        self.verify_member(&cert.pk, &cert.sigma, cert.shard, cert.round, sigs)
    }

    /// Records keys arriving in the current round. Their slots are drawn
    /// when their bench ends.
    pub fn register_nodes(&mut self, keys: &[PublicKey]) -> Result<Vec<NodeRecord>, Error> {
        let round = self.current_round();
        let mut seen = std::collections::HashSet::new();
        for pk in keys {
            if self.records.contains_key(pk) || !seen.insert(*pk) {
                return Err(Error::DuplicateKey(*pk));
            }
        }
        let added: Vec<NodeRecord> = keys
            .iter()
            .map(|pk| NodeRecord {
                pk: *pk,
                t_join: round,
                t_shuffle: None,
            })
            .collect();
        for rec in &added {
            self.records.insert(rec.pk, *rec);
        }
        Ok(added)
    }

    /// Closes round `round`: publishes the round `round + 1` seeds, ends
    /// benches that expire, and returns the keys that must draw a new
    /// certificate for `round + 1`.
    pub fn end_of_round(
        &mut self,
        round: u64,
        new_shard_seeds: Vec<Digest>,
    ) -> Result<(SeedState, Vec<PublicKey>), Error> {
        if round != self.current_round() {
            return Err(Error::InvalidConfig(format!(
                "end_of_round({round}) called in round {}",
                self.current_round()
            )));
        }
        if new_shard_seeds.len() != self.m as usize {
            return Err(Error::InvalidConfig(format!(
                "expected {} shard seeds, got {}",
                self.m,
                new_shard_seeds.len()
            )));
        }
        let next = round + 1;
        let state = SeedState::from_shard_seeds(next, new_shard_seeds);
        self.seeds.push_back(state.clone());
        while self.seeds.len() as u64 > self.t_lease {
            self.seeds.pop_front();
        }
        let t_lease = self.t_lease;
        let mut redraw = Vec::new();
        for rec in self.records.values_mut() {
            if rec.t_shuffle.is_none() && rec.t_join + t_lease == next {
                rec.t_shuffle = Some(shuffle_slot(&rec.pk, state.global_seed(), t_lease));
                redraw.push(rec.pk);
            } else if rec.is_eligible(next, t_lease) && rec.t_shuffle == Some(next % t_lease) {
                redraw.push(rec.pk);
            }
        }
        Ok((state, redraw))
    }
}

mod hex_digest {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let v = hex::decode(s).map_err(serde::de::Error::custom)?;
        v.try_into()
            .map_err(|_| serde::de::Error::custom("digest must be 32 bytes"))
    }
}

mod hex_digests {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ds: &[[u8; 32]], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(ds.iter().map(hex::encode))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<[u8; 32]>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.into_iter()
            .map(|s| {
                let bytes = hex::decode(s).map_err(serde::de::Error::custom)?;
                bytes
                    .try_into()
                    .map_err(|_| serde::de::Error::custom("digest must be 32 bytes"))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keys::KeyRegistry;

    fn setup(n: u64, m: u32, t_lease: u64) -> (Vec<KeyPair>, KeyRegistry, Membership) {
        let keys: Vec<KeyPair> = (0..n).map(|i| KeyPair::derive(b"member", i)).collect();
        let mut reg = KeyRegistry::new();
        for k in &keys {
            reg.register(k).unwrap();
        }
        let (mem, _) = Membership::init(m, &keys, b"genesis", t_lease).unwrap();
        (keys, reg, mem)
    }

    /// Advances with empty sub-blocks everywhere.
    fn advance(mem: &mut Membership) -> Vec<PublicKey> {
        let r = mem.current_round();
        let next: Vec<Digest> = mem
            .current_seed()
            .shard_seeds()
            .iter()
            .map(|s| evolve_shard_seed(s, r, true, None).unwrap())
            .collect();
        mem.end_of_round(r, next).unwrap().1
    }

    #[test]
    fn global_seed_combines_shard_seeds() {
        let s = SeedState::genesis(b"g", 3);
        let mut cat = Vec::new();
        for i in 1..=3u64 {
            let si = hash_concat(&[b"g", &i.to_be_bytes()]);
            assert_eq!(s.shard_seed(i as u32), &si);
            cat.extend_from_slice(&si);
        }
        assert_eq!(s.global_seed(), &hash(&cat));
        assert_eq!(s.round(), 1);
    }

    #[test]
    fn single_shard_takes_everyone() {
        let keys: Vec<KeyPair> = (0..30).map(|i| KeyPair::derive(b"m1", i)).collect();
        let (_, certs) = Membership::init(1, &keys, b"g", 3).unwrap();
        assert!(certs.iter().all(|c| c.shard == 1));
    }

    #[test]
    fn init_is_deterministic() {
        let keys: Vec<KeyPair> = (0..10).map(|i| KeyPair::derive(b"det", i)).collect();
        let (a, ca) = Membership::init(4, &keys, b"g", 5).unwrap();
        let (b, cb) = Membership::init(4, &keys, b"g", 5).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.current_seed(), b.current_seed());
    }

    #[test]
    fn duplicate_genesis_keys_rejected() {
        let k = KeyPair::derive(b"dup", 0);
        assert!(matches!(
            Membership::init(2, &[k.clone(), k], b"g", 1),
            Err(Error::DuplicateKey(_))
        ));
    }

    #[test]
    fn lease_arithmetic() {
        let rec = NodeRecord {
            pk: *KeyPair::derive(b"x", 0).public(),
            t_join: 0,
            t_shuffle: Some(2),
        };
        // slot = 8 mod 5 = 3, diff = 1, r' = 7
        assert_eq!(rec.seed_round(8, 5), Some(7));
        assert_eq!(rec.seed_round(7, 5), Some(7));
        assert_eq!(rec.seed_round(12, 5), Some(12));
        // before the first slot a genesis node keeps seed 1
        assert_eq!(rec.seed_round(1, 5), Some(1));
        let eager = NodeRecord { t_shuffle: Some(0), ..rec };
        for r in 1..20 {
            assert_eq!(eager.seed_round(r, 1), Some(r));
        }
    }

    #[test]
    fn round_trip_and_bit_flip() {
        let (keys, reg, mut mem) = setup(20, 4, 5);
        for _ in 0..7 {
            let r = mem.current_round();
            for k in &keys {
                let cert = mem.get_membership(k, r).unwrap();
                assert!(mem.verify_certificate(&cert, &reg));
                let mut bad = cert;
                bad.sigma.0[31] ^= 1;
                assert!(!mem.verify_certificate(&bad, &reg));
                let other_shard = cert.shard % 4 + 1;
                assert!(!mem.verify_member(&cert.pk, &cert.sigma, other_shard, r, &reg));
            }
            advance(&mut mem);
        }
    }

    #[test]
    fn certificates_are_sticky_within_an_epoch() {
        let (keys, _, mut mem) = setup(12, 4, 5);
        let mut history: BTreeMap<PublicKey, Vec<MembershipCertificate>> = BTreeMap::new();
        for _ in 0..20 {
            let r = mem.current_round();
            for k in &keys {
                history.entry(*k.public()).or_default().push(mem.get_membership(k, r).unwrap());
            }
            advance(&mut mem);
        }
        for certs in history.values() {
            for w in certs.windows(2) {
                if w[0].seed_round == w[1].seed_round {
                    assert_eq!((w[0].shard, w[0].sigma), (w[1].shard, w[1].sigma));
                }
            }
        }
    }

    #[test]
    fn stale_epoch_certificate_rejected() {
        let (keys, reg, mut mem) = setup(8, 4, 1);
        let old: Vec<_> = keys.iter().map(|k| mem.get_membership(k, 1).unwrap()).collect();
        advance(&mut mem);
        for cert in old {
            assert!(!mem.verify_member(&cert.pk, &cert.sigma, cert.shard, 2, &reg));
        }
    }

    #[test]
    fn lazy_redraws_each_node_once_per_lease() {
        let (keys, _, mut mem) = setup(50, 4, 5);
        for _ in 0..3 {
            advance(&mut mem);
        }
        let mut counts: BTreeMap<PublicKey, usize> = BTreeMap::new();
        for _ in 0..5 {
            for pk in advance(&mut mem) {
                *counts.entry(pk).or_default() += 1;
            }
        }
        assert_eq!(counts.len(), keys.len());
        assert!(counts.values().all(|c| *c == 1));
    }

    #[test]
    fn eager_redraws_everyone() {
        let (keys, _, mut mem) = setup(30, 4, 1);
        for _ in 0..3 {
            assert_eq!(advance(&mut mem).len(), keys.len());
        }
    }

    #[test]
    fn benching_of_late_arrivals() {
        let (_, mut reg, mut mem) = setup(4, 4, 5);
        for _ in 0..9 {
            advance(&mut mem);
        }
        assert_eq!(mem.current_round(), 10);
        let late = KeyPair::derive(b"late", 0);
        reg.register(&late).unwrap();
        mem.register_nodes(&[*late.public()]).unwrap();
        assert!(mem.register_nodes(&[*late.public()]).is_err());
        for _ in 10..15 {
            assert!(matches!(
                mem.get_membership(&late, mem.current_round()),
                Err(Error::Ineligible { .. })
            ));
            let redraw = advance(&mut mem);
            if mem.current_round() < 15 {
                assert!(!redraw.contains(late.public()));
            } else {
                assert!(redraw.contains(late.public()));
            }
        }
        assert_eq!(mem.current_round(), 15);
        let rec = *mem.record(late.public()).unwrap();
        assert_eq!(
            rec.t_shuffle,
            Some(shuffle_slot(late.public(), mem.seed_at(15).unwrap().global_seed(), 5))
        );
        let cert = mem.get_membership(&late, 15).unwrap();
        assert_eq!(cert.seed_round, 15);
        assert!(mem.verify_certificate(&cert, &reg));
        // not valid before the bench ends
        assert!(!mem.verify_member(late.public(), &cert.sigma, cert.shard, 14, &reg));
    }

    #[test]
    fn eager_arrival_participates_next_round() {
        let (_, mut reg, mut mem) = setup(4, 2, 1);
        advance(&mut mem);
        let late = KeyPair::derive(b"late-eager", 0);
        reg.register(&late).unwrap();
        mem.register_nodes(&[*late.public()]).unwrap();
        assert!(mem.get_membership(&late, 2).is_err());
        assert!(advance(&mut mem).contains(late.public()));
        let cert = mem.get_membership(&late, 3).unwrap();
        assert!(mem.verify_certificate(&cert, &reg));
    }

    #[test]
    fn empty_sub_block_seed_ignores_leader() {
        let s = [3u8; 32];
        let a = KeyPair::derive(b"lead", 0);
        let b = KeyPair::derive(b"lead", 1);
        assert_eq!(
            evolve_shard_seed(&s, 4, true, Some(&a)).unwrap(),
            evolve_shard_seed(&s, 4, true, Some(&b)).unwrap()
        );
        assert_eq!(
            evolve_shard_seed(&s, 4, false, Some(&a)).unwrap(),
            evolve_shard_seed(&s, 4, false, Some(&a)).unwrap()
        );
        assert_ne!(
            evolve_shard_seed(&s, 4, false, Some(&a)).unwrap(),
            evolve_shard_seed(&s, 4, false, Some(&b)).unwrap()
        );
        assert!(matches!(evolve_shard_seed(&s, 4, false, None), Err(Error::MissingLeader)));
    }

    #[test]
    fn seeds_outside_window_are_missing() {
        let (keys, _, mut mem) = setup(3, 2, 3);
        for _ in 0..5 {
            advance(&mut mem);
        }
        assert!(mem.seed_at(6).is_ok());
        assert!(mem.seed_at(4).is_ok());
        assert!(matches!(mem.seed_at(3), Err(Error::MissingSeed(3))));
        assert!(matches!(mem.seed_at(7), Err(Error::MissingSeed(7))));
        assert!(mem.get_membership(&keys[0], 9).is_err());
    }
}
