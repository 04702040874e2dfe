//! Messages between clients and authorities.

use crate::assets::{SpendEvidence, TransmuteRequest};
use crate::auction::{EndOfAuction, EndOfBidding};
use crate::committee::{Authenticated, Certificate, Vote};
use crate::crypto::{Digest, PublicKey};
use crate::error::ProtocolError;
use crate::ids::AccountId;
use crate::tpke::DecryptionShare;
use crate::types::{
    AuthenticatedRequest, CommitCertificate, LockCertificate, PreCommitCertificate, Proposal,
    Request, RequestCertificate, SequenceNumber,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientMessage {
    /// `HandleRequest`. `evidence` is required for `Spend`.
    Request {
        request: AuthenticatedRequest,
        evidence: Option<SpendEvidence>,
    },
    /// `HandleConfirmation`.
    Confirmation { cert: RequestCertificate },
    /// `HandleProposal(auth_pk[P], L1, L2)`.
    Proposal {
        proposal: Authenticated<Proposal>,
        locks: [Option<LockCertificate>; 2],
    },
    /// `HandlePreCommit(C)`.
    PreCommit { cert: PreCommitCertificate },
    /// `HandleCommit(C*, L1, L2)`.
    Commit {
        cert: CommitCertificate,
        locks: [Option<LockCertificate>; 2],
    },
    QueryRound { swid: AccountId },
    QueryAccount { id: AccountId },
    Transmute { request: TransmuteRequest },
    EndOfBidding { request: Authenticated<EndOfBidding> },
    /// Records the certificate and asks for this authority's shares.
    RevealShares { cert: Certificate<EndOfBidding> },
    EndOfAuction {
        request: Authenticated<EndOfAuction>,
        end_of_bidding: Certificate<EndOfBidding>,
        shares: Vec<Vec<DecryptionShare>>,
    },
    Settle { cert: Certificate<EndOfAuction> },
}

crate::codec_enum!(ClientMessage {
    0 => Request { request, evidence },
    1 => Confirmation { cert },
    2 => Proposal { proposal, locks },
    3 => PreCommit { cert },
    4 => Commit { cert, locks },
    5 => QueryRound { swid },
    6 => QueryAccount { id },
    7 => Transmute { request },
    8 => EndOfBidding { request },
    9 => RevealShares { cert },
    10 => EndOfAuction { request, end_of_bidding, shares },
    11 => Settle { cert },
});

impl ClientMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ClientMessage::Request { .. } => "request",
            ClientMessage::Confirmation { .. } => "confirmation",
            ClientMessage::Proposal { .. } => "proposal",
            ClientMessage::PreCommit { .. } => "pre-commit",
            ClientMessage::Commit { .. } => "commit",
            ClientMessage::QueryRound { .. } => "query-round",
            ClientMessage::QueryAccount { .. } => "query-account",
            ClientMessage::Transmute { .. } => "transmute",
            ClientMessage::EndOfBidding { .. } => "end-of-bidding",
            ClientMessage::RevealShares { .. } => "reveal-shares",
            ClientMessage::EndOfAuction { .. } => "end-of-auction",
            ClientMessage::Settle { .. } => "settle",
        }
    }

    /// Messages whose processing only depends on certificates, and which
    /// are therefore replayed verbatim when authorities synchronize.
    pub fn is_certified(&self) -> bool {
        matches!(
            self,
            ClientMessage::Confirmation { .. }
                | ClientMessage::Commit { .. }
                | ClientMessage::RevealShares { .. }
                | ClientMessage::Settle { .. }
        )
    }
}

/// An authority's view of a swap instance, answering `QueryRound`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundInfo {
    pub proposed: Option<Proposal>,
    pub locked: Option<PreCommitCertificate>,
    /// Set once the instance has been closed by this certificate.
    pub closed: Option<CommitCertificate>,
    /// Highest round currently available here.
    pub available: u64,
}

crate::codec_struct!(RoundInfo {
    proposed,
    locked,
    closed,
    available
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccountInfo {
    pub owner: Option<PublicKey>,
    pub next_sequence: SequenceNumber,
    pub balance: i64,
    pub pending: Option<Request>,
    pub deactivated: bool,
}

crate::codec_struct!(AccountInfo {
    owner,
    next_sequence,
    balance,
    pending,
    deactivated
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Response {
    Vote { vote: Vote },
    /// A certificate was processed. Confirming `BindAsset` also returns a
    /// vote on the asset binding.
    Done { asset_vote: Option<Vote> },
    Votes { votes: Vec<Vote> },
    Round { info: RoundInfo },
    Account { info: AccountInfo },
    Shares { shares: Vec<DecryptionShare> },
    Error { error: ProtocolError },
}

crate::codec_enum!(Response {
    0 => Vote { vote },
    1 => Done { asset_vote },
    2 => Votes { votes },
    3 => Round { info },
    4 => Account { info },
    5 => Shares { shares },
    6 => Error { error },
});

impl Response {
    pub fn kind(&self) -> &'static str {
        match self {
            Response::Vote { .. } => "vote",
            Response::Done { .. } => "done",
            Response::Votes { .. } => "votes",
            Response::Round { .. } => "round",
            Response::Account { .. } => "account",
            Response::Shares { .. } => "shares",
            Response::Error { .. } => "error",
        }
    }

    pub fn vote(&self) -> Option<Vote> {
        match self {
            Response::Vote { vote } => Some(*vote),
            _ => None,
        }
    }

    pub fn error(&self) -> Option<&ProtocolError> {
        match self {
            Response::Error { error } => Some(error),
            _ => None,
        }
    }
}

impl From<Result<Response, ProtocolError>> for Response {
    fn from(result: Result<Response, ProtocolError>) -> Self {
        result.unwrap_or_else(|error| Response::Error { error })
    }
}

/// Digest identifying a message in traces.
pub fn message_digest<T: crate::encoding::Encode>(kind: &str, message: &T) -> Digest {
    Digest::tagged(kind, message)
}
