//! Sharded Byzantine-fault-tolerant account ledger with one-shot consensus
//! instances for atomic swaps, off-chain certified assets, a commutative
//! state algebra and threshold-encrypted sealed-bid auctions, together with
//! the deterministic network simulator that hosts them.

pub mod accounts;
pub mod algebra;
pub mod assets;
pub mod auction;
pub mod authority;
pub mod client;
pub mod committee;
pub mod crypto;
pub mod encoding;
pub mod error;
pub mod ids;
pub mod protocol;
pub mod sim;
pub mod swap;
pub mod testkit;
pub mod tpke;
pub mod types;

pub use committee::{
    aggregate_certificate, check_certificate, Authenticated, AuthorityIndex, Certificate,
    Committee, CommitteeError, Signable, Vote,
};
pub use crypto::{Digest, KeyPair, PublicKey, Signature};
pub use encoding::{Decode, DecodeError, Encode};
pub use error::ProtocolError;
pub use ids::AccountId;
pub use types::{
    Decision, Operation, Proposal, Request, RequestKind, Role, RoundNumber, SequenceNumber,
};
