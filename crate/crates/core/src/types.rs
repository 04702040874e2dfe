//! Protocol values shared by the account, swap, asset and auction services.

use std::fmt;

use serde::Serialize;

use crate::auction::PriceRule;
use crate::committee::{Authenticated, Certificate, Signable};
use crate::crypto::{Digest, PublicKey};
use crate::ids::AccountId;
use crate::tpke::Ciphertext;

pub type SequenceNumber = u64;
pub type RoundNumber = u64;
pub type Amount = u64;

/// Role of an account inside a swap instance, encoded as `1` or `2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Role {
    First,
    Second,
}

crate::codec_enum!(Role {
    1 => First,
    2 => Second,
});

impl Role {
    pub const BOTH: [Role; 2] = [Role::First, Role::Second];

    pub fn other(self) -> Role {
        match self {
            Role::First => Role::Second,
            Role::Second => Role::First,
        }
    }

    /// Zero-based position, for indexing `[_; 2]` arrays.
    pub fn slot(self) -> usize {
        match self {
            Role::First => 0,
            Role::Second => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operation {
    OpenAccount {
        id: AccountId,
        owner: PublicKey,
    },
    Transfer {
        recipient: AccountId,
        amount: Amount,
    },
    ChangeKey {
        owner: PublicKey,
    },
    StartConsensusInstance {
        swid: AccountId,
        id1: AccountId,
        n1: SequenceNumber,
        id2: AccountId,
        n2: SequenceNumber,
    },
    /// Hands management of the account to `swid`; `key` authenticates the
    /// owner's proposals and becomes the owner key of the other account if
    /// the swap is confirmed.
    LockInto {
        swid: AccountId,
        role: Role,
        key: PublicKey,
    },
    /// Deactivates the account for good, committing to the parameters of the
    /// transmutation that consumes its assets.
    Spend {
        commitment: Digest,
    },
    /// Binds `data` to the account as an off-chain asset.
    BindAsset {
        data: Vec<u8>,
    },
    /// Puts this (item) account up for sale; the account is frozen until
    /// settlement hands it to the winner.
    CreateAuction {
        auction: AccountId,
        rule: PriceRule,
        proceeds: AccountId,
    },
    SubmitBid {
        auction: AccountId,
        deposit: Amount,
        ciphertext: Ciphertext,
        item_key: PublicKey,
    },
}

crate::codec_enum!(Operation {
    0 => OpenAccount { id, owner },
    1 => Transfer { recipient, amount },
    2 => ChangeKey { owner },
    3 => StartConsensusInstance { swid, id1, n1, id2, n2 },
    4 => LockInto { swid, role, key },
    5 => Spend { commitment },
    6 => BindAsset { data },
    7 => CreateAuction { auction, rule, proceeds },
    8 => SubmitBid { auction, deposit, ciphertext, item_key },
});

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::OpenAccount { .. } => "OpenAccount",
            Operation::Transfer { .. } => "Transfer",
            Operation::ChangeKey { .. } => "ChangeKey",
            Operation::StartConsensusInstance { .. } => "StartConsensusInstance",
            Operation::LockInto { .. } => "LockInto",
            Operation::Spend { .. } => "Spend",
            Operation::BindAsset { .. } => "BindAsset",
            Operation::CreateAuction { .. } => "CreateAuction",
            Operation::SubmitBid { .. } => "SubmitBid",
        }
    }

    pub fn is_locking(&self) -> bool {
        matches!(self, Operation::LockInto { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RequestKind {
    Execute,
    Lock,
}

crate::codec_enum!(RequestKind {
    0 => Execute,
    1 => Lock,
});

/// `Execute(id, n, O)` or `Lock(id, n, O)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub kind: RequestKind,
    pub id: AccountId,
    pub sequence: SequenceNumber,
    pub operation: Operation,
}

crate::codec_struct!(Request {
    kind,
    id,
    sequence,
    operation
});

impl Signable for Request {
    const DOMAIN: &'static str = "request";
}

impl Request {
    /// Builds the request with the kind implied by the operation.
    pub fn new(id: AccountId, sequence: SequenceNumber, operation: Operation) -> Self {
        let kind = if operation.is_locking() {
            RequestKind::Lock
        } else {
            RequestKind::Execute
        };
        Self {
            kind,
            id,
            sequence,
            operation,
        }
    }
}

pub type AuthenticatedRequest = Authenticated<Request>;
pub type RequestCertificate = Certificate<Request>;
/// A certificate over `Lock(id, n, LockInto(swid, i, pk))`.
pub type LockCertificate = Certificate<Request>;

/// The fields of a lock certificate that the swap instance cares about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockTerms<'a> {
    pub id: &'a AccountId,
    pub sequence: SequenceNumber,
    pub swid: &'a AccountId,
    pub role: Role,
    pub key: PublicKey,
}

pub fn lock_terms(cert: &LockCertificate) -> Option<LockTerms<'_>> {
    match (&cert.value.kind, &cert.value.operation) {
        (RequestKind::Lock, Operation::LockInto { swid, role, key }) => Some(LockTerms {
            id: &cert.value.id,
            sequence: cert.value.sequence,
            swid,
            role: *role,
            key: *key,
        }),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Decision {
    Confirm,
    Abort,
}

crate::codec_enum!(Decision {
    0 => Confirm,
    1 => Abort,
});

impl Decision {
    pub fn flip(self) -> Decision {
        match self {
            Decision::Confirm => Decision::Abort,
            Decision::Abort => Decision::Confirm,
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Confirm => "confirm",
            Decision::Abort => "abort",
        })
    }
}

/// `Proposal(swid, k, V)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Proposal {
    pub swid: AccountId,
    pub round: RoundNumber,
    pub decision: Decision,
}

crate::codec_struct!(Proposal {
    swid,
    round,
    decision
});

impl Signable for Proposal {
    const DOMAIN: &'static str = "proposal";
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PreCommit {
    pub proposal: Proposal,
}

crate::codec_struct!(PreCommit { proposal });

impl Signable for PreCommit {
    const DOMAIN: &'static str = "pre-commit";
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Commit {
    pub proposal: Proposal,
}

crate::codec_struct!(Commit { proposal });

impl Signable for Commit {
    const DOMAIN: &'static str = "commit";
}

pub type PreCommitCertificate = Certificate<PreCommit>;
pub type CommitCertificate = Certificate<Commit>;

/// `(id, x)`: the value certified by an off-chain asset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AssetBinding {
    pub id: AccountId,
    pub data: Vec<u8>,
}

crate::codec_struct!(AssetBinding { id, data });

impl Signable for AssetBinding {
    const DOMAIN: &'static str = "asset";
}
