use thiserror::Error;

use crate::keys::PublicKey;
use crate::ledger::TxId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transaction must have at least one output")]
    NoOutputs,
    #[error("duplicate transaction {0:?} in block")]
    DuplicateTx(TxId),
    #[error("key {0:?} is already registered")]
    DuplicateKey(PublicKey),
    #[error("key {0:?} collides with {1:?} in the unit interval")]
    PositionCollision(PublicKey, PublicKey),
    #[error("unknown key {0:?}")]
    UnknownKey(PublicKey),
    #[error("key {pk:?} is not eligible in round {round}")]
    Ineligible { pk: PublicKey, round: u64 },
    #[error("seed for round {0} is not retained")]
    MissingSeed(u64),
    #[error("a leader key is required to evolve the seed of a non-empty sub-block")]
    MissingLeader,
    #[error("invalid genesis block: {0}")]
    InvalidGenesis(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
