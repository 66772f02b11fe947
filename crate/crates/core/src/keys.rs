//! Keys, the unique signature stand-in, and the key registry.
//!
//! The simulator models an ideal unique signature scheme: a secret key is 32
//! random bytes, `sign(sk, msg) = H(sk ∘ msg)`, and verification looks the
//! secret up in a simulator-trusted [`KeyRegistry`]. Signing is deterministic
//! and each `(key, message)` pair has exactly one valid signature. Anything
//! that needs to check signatures goes through [`SignatureScheme`], so a
//! publicly verifiable scheme can be dropped in later.

use std::collections::HashMap;
use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::hash::{hash, hash_concat, unit_hash, Digest, UnitValue};
use crate::Error;

/// A participant's public key. Its position in the unit interval is a pure
/// function of the identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey {
    id: [u8; 32],
}

impl PublicKey {
    pub const fn from_id(id: [u8; 32]) -> Self {
        PublicKey { id }
    }

    pub fn id(&self) -> &[u8; 32] {
        &self.id
    }

    /// `.H(id)`; the key's place in the public-key space.
    pub fn position(&self) -> UnitValue {
        unit_hash(&self.id)
    }

    /// Shard whose key interval `((i-1)/m, i/m]` contains this key.
    pub fn shard(&self, m: u32) -> u32 {
        self.position().bucket(m)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.id)
    }

    pub fn from_hex(s: &str) -> Result<Self, Error> {
        let bytes = hex::decode(s).map_err(|e| Error::Decode(e.to_string()))?;
        let id: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::Decode("public key must be 32 bytes".into()))?;
        Ok(PublicKey { id })
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PK({})", &self.to_hex()[..12])
    }
}

impl Serialize for PublicKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PublicKey::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SecretKey([u8; 32]);

impl SecretKey {
    pub const fn from_bytes(bytes: [u8; 32]) -> Self {
        SecretKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature(pub Digest);

impl Signature {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, Error> {
        let bytes = hex::decode(s).map_err(|e| Error::Decode(e.to_string()))?;
        let d: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::Decode("signature must be 32 bytes".into()))?;
        Ok(Signature(d))
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sig({})", &self.to_hex()[..12])
    }
}

impl Serialize for Signature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Signature::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pk: PublicKey,
    sk: SecretKey,
}

impl KeyPair {
    /// The public identifier is `H(sk)`.
    pub fn from_secret(sk: SecretKey) -> Self {
        KeyPair {
            pk: PublicKey::from_id(hash(sk.as_bytes())),
            sk,
        }
    }

    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        KeyPair::from_secret(SecretKey(bytes))
    }

    /// Deterministic key derivation, used for golden vectors and fixtures.
    pub fn derive(label: &[u8], index: u64) -> Self {
        KeyPair::from_secret(SecretKey(hash_concat(&[label, &index.to_be_bytes()])))
    }

    pub fn public(&self) -> &PublicKey {
        &self.pk
    }

    pub fn secret(&self) -> &SecretKey {
        &self.sk
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        sign(&self.sk, msg)
    }
}

pub fn sign(sk: &SecretKey, msg: &[u8]) -> Signature {
    Signature(hash_concat(&[sk.as_bytes(), msg]))
}

/// Signature verification as seen by protocol code.
pub trait SignatureScheme: Send + Sync {
    fn verify(&self, pk: &PublicKey, msg: &[u8], sig: &Signature) -> bool;
}

/// Simulator-trusted table from public keys to their secrets.
///
/// Registration rejects duplicate keys and keys whose unit-interval position
/// collides with an already registered key.
#[derive(Debug, Default, Clone)]
pub struct KeyRegistry {
    secrets: HashMap<PublicKey, SecretKey>,
    positions: HashMap<u64, PublicKey>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, kp: &KeyPair) -> Result<(), Error> {
        if self.secrets.contains_key(kp.public()) {
            return Err(Error::DuplicateKey(*kp.public()));
        }
        let pos = kp.public().position().bits();
        if let Some(other) = self.positions.get(&pos) {
            return Err(Error::PositionCollision(*kp.public(), *other));
        }
        self.positions.insert(pos, *kp.public());
        self.secrets.insert(*kp.public(), *kp.secret());
        Ok(())
    }

    pub fn contains(&self, pk: &PublicKey) -> bool {
        self.secrets.contains_key(pk)
    }

    pub fn len(&self) -> usize {
        self.secrets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.secrets.is_empty()
    }
}

impl SignatureScheme for KeyRegistry {
    fn verify(&self, pk: &PublicKey, msg: &[u8], sig: &Signature) -> bool {
        match self.secrets.get(pk) {
            Some(sk) => sign(sk, msg) == *sig,
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn signing_is_deterministic_and_unique() {
        let kp = KeyPair::derive(b"test", 1);
        let mut reg = KeyRegistry::new();
        reg.register(&kp).unwrap();
        let a = kp.sign(b"hello");
        assert_eq!(a, kp.sign(b"hello"));
        assert!(reg.verify(kp.public(), b"hello", &a));
        assert!(!reg.verify(kp.public(), b"hellp", &a));
        let mut flipped = a;
        flipped.0[5] ^= 1;
        assert!(!reg.verify(kp.public(), b"hello", &flipped));
    }

    #[test]
    fn unknown_key_never_verifies() {
        let kp = KeyPair::derive(b"test", 2);
        let reg = KeyRegistry::new();
        assert!(!reg.verify(kp.public(), b"m", &kp.sign(b"m")));
    }

    #[test]
    fn wrong_key_rejected() {
        let a = KeyPair::derive(b"test", 3);
        let b = KeyPair::derive(b"test", 4);
        let mut reg = KeyRegistry::new();
        reg.register(&a).unwrap();
        reg.register(&b).unwrap();
        assert!(!reg.verify(b.public(), b"m", &a.sign(b"m")));
    }

    #[test]
    fn duplicate_registration_is_an_error() {
        let kp = KeyPair::generate(&mut ChaCha8Rng::seed_from_u64(9));
        let mut reg = KeyRegistry::new();
        reg.register(&kp).unwrap();
        assert!(matches!(reg.register(&kp), Err(Error::DuplicateKey(_))));
    }

    #[test]
    fn position_is_pure_function_of_id() {
        let kp = KeyPair::derive(b"test", 5);
        let again = PublicKey::from_id(*kp.public().id());
        assert_eq!(kp.public().position(), again.position());
        assert_eq!(PublicKey::from_hex(&kp.public().to_hex()).unwrap(), *kp.public());
    }
}
