//! Per-account state and the regular account operations.
//!
//! An authority validates a request against the account state before voting
//! for it, and executes it once it sees a certificate. Effects on other
//! accounts (credits, account creation, new swap instances or auctions) are
//! emitted as [`CrossShardRequest`]s and applied asynchronously by the
//! target's shard, even when it is co-located.

use serde::Serialize;

use crate::auction::{bid_label, EndOfAuction, PriceRule};
use crate::committee::{Certificate, Signable};
use crate::crypto::{Digest, PublicKey};
use crate::error::ProtocolError;
use crate::ids::AccountId;
use crate::types::{
    Amount, CommitCertificate, Operation, Request, RequestCertificate, RequestKind,
    SequenceNumber,
};

/// A certificate recorded in an account's `confirmed` or `received` log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogEntry {
    Request { cert: RequestCertificate },
    SwapCommit { cert: CommitCertificate },
    Settlement { cert: Certificate<EndOfAuction> },
}

crate::codec_enum!(LogEntry {
    0 => Request { cert },
    1 => SwapCommit { cert },
    2 => Settlement { cert },
});

impl LogEntry {
    pub fn digest(&self) -> Digest {
        match self {
            LogEntry::Request { cert } => cert.digest(),
            LogEntry::SwapCommit { cert } => cert.digest(),
            LogEntry::Settlement { cert } => cert.digest(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccountState {
    pub owner: Option<PublicKey>,
    pub next_sequence: SequenceNumber,
    /// Signed: an authority may execute a certified debit before it has
    /// applied the credits that funded it. Non-negative once quiescent.
    pub balance: i64,
    pub pending: Option<Request>,
    pub confirmed: Vec<LogEntry>,
    pub received: Vec<LogEntry>,
}

impl AccountState {
    /// `InitAccount(id, pk)`; `initial_balance` is zero except for configured
    /// genesis accounts.
    pub fn new(owner: Option<PublicKey>, initial_balance: i64) -> Self {
        Self {
            owner,
            next_sequence: 0,
            balance: initial_balance,
            pending: None,
            confirmed: Vec::new(),
            received: Vec::new(),
        }
    }

    pub fn is_active(&self) -> bool {
        self.owner.is_some()
    }

    /// Comparable view used for consistency checks and snapshots. The
    /// `received` log is presented as a set since credits may arrive in any
    /// order.
    pub fn summary(&self) -> AccountSummary {
        let mut received: Vec<String> = self.received.iter().map(|e| e.digest().to_hex()).collect();
        received.sort();
        AccountSummary {
            owner: self.owner.map(|key| hex::encode(key.0)),
            next_sequence: self.next_sequence,
            balance: self.balance,
            pending: self
                .pending
                .as_ref()
                .map(|request| request.signing_digest().to_hex()),
            confirmed: self.confirmed.iter().map(|e| e.digest().to_hex()).collect(),
            received,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccountSummary {
    pub owner: Option<String>,
    pub next_sequence: SequenceNumber,
    pub balance: i64,
    pub pending: Option<String>,
    pub confirmed: Vec<String>,
    pub received: Vec<String>,
}

/// `ValidateOperation(id, n, O)`: the request an honest authority is willing
/// to sign for this operation, given the current account state.
pub fn validate_operation(
    state: &AccountState,
    id: &AccountId,
    sequence: SequenceNumber,
    operation: &Operation,
) -> Result<Request, ProtocolError> {
    let derived = || id.child(state.next_sequence);
    match operation {
        Operation::OpenAccount { id: new_id, .. } => {
            if *new_id != derived() {
                return Err(ProtocolError::BadDerivedId);
            }
        }
        Operation::Transfer { amount, .. } => check_funds(state, *amount)?,
        Operation::ChangeKey { .. } | Operation::Spend { .. } | Operation::BindAsset { .. } => {}
        Operation::StartConsensusInstance { swid, id1, id2, .. } => {
            if *swid != derived() {
                return Err(ProtocolError::BadDerivedId);
            }
            if id1 == id2 {
                return Err(ProtocolError::SameAccountSwap);
            }
        }
        Operation::LockInto { .. } => {
            return Ok(Request {
                kind: RequestKind::Lock,
                id: id.clone(),
                sequence,
                operation: operation.clone(),
            });
        }
        Operation::CreateAuction { auction, .. } => {
            if *auction != derived() {
                return Err(ProtocolError::BadDerivedId);
            }
        }
        Operation::SubmitBid {
            auction,
            deposit,
            ciphertext,
            ..
        } => {
            if *deposit == 0 {
                return Err(ProtocolError::BadEvidence);
            }
            check_funds(state, *deposit)?;
            if ciphertext.label != bid_label(auction) || !ciphertext.is_well_formed() {
                return Err(ProtocolError::BadEvidence);
            }
        }
    }
    Ok(Request {
        kind: RequestKind::Execute,
        id: id.clone(),
        sequence,
        operation: operation.clone(),
    })
}

fn check_funds(state: &AccountState, amount: Amount) -> Result<(), ProtocolError> {
    if amount == 0 {
        return Err(ProtocolError::BadValue);
    }
    if i128::from(amount) > i128::from(state.balance) {
        return Err(ProtocolError::InsufficientFunds {
            balance: state.balance,
            amount,
        });
    }
    Ok(())
}

/// An asynchronous effect on the shard owning `target`. `origin` uniquely
/// identifies the effect and makes redelivery idempotent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossShardRequest {
    pub target: AccountId,
    pub origin: Digest,
    pub effect: Effect,
}

crate::codec_struct!(CrossShardRequest {
    target,
    origin,
    effect
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    /// Create the target account (from `OpenAccount`) and log the certificate.
    InitAccount { owner: PublicKey, log: LogEntry },
    /// Credit the target, creating it with no owner if needed.
    Credit { amount: Amount, log: LogEntry },
    InitInstance {
        id1: AccountId,
        n1: SequenceNumber,
        id2: AccountId,
        n2: SequenceNumber,
        creation: RequestCertificate,
    },
    /// Release an account locked into a swap at `sequence`, optionally
    /// installing a new owner key. Parked if the account is not there yet.
    Unlock {
        sequence: SequenceNumber,
        new_owner: Option<PublicKey>,
        commit: CommitCertificate,
    },
    InitAuction {
        seller: PublicKey,
        item: AccountId,
        rule: PriceRule,
        proceeds: AccountId,
        creation: RequestCertificate,
    },
    EscrowBid { submission: RequestCertificate },
    /// Hand the (frozen) item account to its new owner after settlement.
    Reassign {
        owner: PublicKey,
        settlement: Certificate<EndOfAuction>,
    },
}

crate::codec_enum!(Effect {
    0 => InitAccount { owner, log },
    1 => Credit { amount, log },
    2 => InitInstance { id1, n1, id2, n2, creation },
    3 => Unlock { sequence, new_owner, commit },
    4 => InitAuction { seller, item, rule, proceeds, creation },
    5 => EscrowBid { submission },
    6 => Reassign { owner, settlement },
});

impl Effect {
    pub fn name(&self) -> &'static str {
        match self {
            Effect::InitAccount { .. } => "init-account",
            Effect::Credit { .. } => "credit",
            Effect::InitInstance { .. } => "init-instance",
            Effect::Unlock { .. } => "unlock",
            Effect::InitAuction { .. } => "init-auction",
            Effect::EscrowBid { .. } => "escrow-bid",
            Effect::Reassign { .. } => "reassign",
        }
    }
}

/// Digest identifying the `index`-th effect caused by a certificate.
pub fn effect_origin(cert: &Digest, index: u32) -> Digest {
    Digest::tagged("effect", &(*cert, index))
}

/// What executing a certified operation did locally.
#[derive(Debug, Default)]
pub struct Execution {
    pub effects: Vec<CrossShardRequest>,
    /// The account must be removed and its id tombstoned.
    pub deactivate: bool,
}

/// `ExecuteOperation(id, O, C)` on the sender's account. Only called at the
/// matching sequence number.
pub fn execute_operation(
    state: &mut AccountState,
    cert: &RequestCertificate,
) -> Execution {
    let digest = cert.digest();
    let effect = |index: u32, target: &AccountId, effect: Effect| CrossShardRequest {
        target: target.clone(),
        origin: effect_origin(&digest, index),
        effect,
    };
    let log = || LogEntry::Request { cert: cert.clone() };
    let mut execution = Execution::default();
    match &cert.value.operation {
        Operation::OpenAccount { id, owner } => {
            execution.effects.push(effect(
                0,
                id,
                Effect::InitAccount {
                    owner: *owner,
                    log: log(),
                },
            ));
        }
        Operation::Transfer { recipient, amount } => {
            state.balance -= *amount as i64;
            execution.effects.push(effect(
                0,
                recipient,
                Effect::Credit {
                    amount: *amount,
                    log: log(),
                },
            ));
        }
        Operation::ChangeKey { owner } => state.owner = Some(*owner),
        Operation::StartConsensusInstance {
            swid,
            id1,
            n1,
            id2,
            n2,
        } => {
            execution.effects.push(effect(
                0,
                swid,
                Effect::InitInstance {
                    id1: id1.clone(),
                    n1: *n1,
                    id2: id2.clone(),
                    n2: *n2,
                    creation: cert.clone(),
                },
            ));
        }
        // Lock certificates never reach execution; see `handle_confirmation`.
        Operation::LockInto { .. } => {}
        Operation::Spend { .. } => execution.deactivate = true,
        Operation::BindAsset { .. } => {}
        Operation::CreateAuction {
            auction,
            rule,
            proceeds,
        } => {
            // The pending check in `handle_confirmation` guarantees the owner
            // is set here.
            let seller = state.owner.take().expect("active account");
            execution.effects.push(effect(
                0,
                auction,
                Effect::InitAuction {
                    seller,
                    item: cert.value.id.clone(),
                    rule: *rule,
                    proceeds: proceeds.clone(),
                    creation: cert.clone(),
                },
            ));
        }
        Operation::SubmitBid {
            auction, deposit, ..
        } => {
            state.balance -= *deposit as i64;
            execution.effects.push(effect(
                0,
                auction,
                Effect::EscrowBid {
                    submission: cert.clone(),
                },
            ));
        }
    }
    execution
}
