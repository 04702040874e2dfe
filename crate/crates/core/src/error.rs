use thiserror::Error;

/// Reasons an authority refuses a client message. These travel back to
/// clients, so they are part of the wire format.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    // Accounts.
    #[error("account already exists")]
    AlreadyExists,
    #[error("unknown account")]
    UnknownAccount,
    #[error("account is inactive")]
    InactiveAccount,
    #[error("account has been deactivated")]
    Deactivated,
    #[error("request authentication failed")]
    BadAuth,
    #[error("sequence mismatch: expected {expected}, got {got}")]
    SequenceMismatch { expected: u64, got: u64 },
    #[error("account is locked on a different request")]
    AccountBusy,
    #[error("insufficient funds: balance {balance}, amount {amount}")]
    InsufficientFunds { balance: i64, amount: u64 },
    #[error("derived id is not owner id :: next_sequence")]
    BadDerivedId,
    #[error("a swap needs two distinct accounts")]
    SameAccountSwap,
    #[error("amount must be positive")]
    BadValue,
    #[error("request kind does not match its operation")]
    KindMismatch,
    #[error("invalid certificate")]
    BadCertificate,
    #[error("lock certificates cannot be confirmed as regular operations")]
    LockNotAllowed,

    // Swap consensus.
    #[error("unknown consensus instance")]
    UnknownInstance,
    #[error("consensus instance already closed")]
    InstanceClosed,
    #[error("invalid lock certificate for role {role}")]
    BadLockCert { role: u8 },
    #[error("proposer holds no locked account in the instance")]
    NotALockedOwner,
    #[error("confirm requires both accounts to be locked")]
    InvalidConfirm,
    #[error("round {round} is not available yet")]
    RoundUnavailable { round: u64 },
    #[error("unsafe under the voting rules")]
    Unsafe,
    #[error("round {round} belongs to the other owner")]
    WrongLeader { round: u64 },
    #[error("confirm commit needs both lock certificates")]
    MissingLockCertificates,

    // Assets.
    #[error("unknown execution function")]
    UnknownFunction,
    #[error("execution function undefined on these inputs")]
    UndefinedExecution,
    #[error("spend commitment does not match the transmutation parameters")]
    CommitmentMismatch,
    #[error("spend needs the transmutation request as evidence")]
    MissingEvidence,
    #[error("invalid input asset")]
    BadAsset,

    // Auctions.
    #[error("unknown auction")]
    UnknownAuction,
    #[error("operation not allowed in the current auction phase")]
    WrongPhase,
    #[error("bid evidence rejected")]
    BadEvidence,
    #[error("only the seller may do this")]
    NotSeller,
    #[error("invalid bid submission certificate")]
    BadBidCert,
    #[error("decrypted bids do not match the ciphertexts")]
    DecryptionMismatch,
}

crate::codec_enum!(ProtocolError {
    0 => AlreadyExists,
    1 => UnknownAccount,
    2 => InactiveAccount,
    3 => Deactivated,
    4 => BadAuth,
    5 => SequenceMismatch { expected, got },
    6 => AccountBusy,
    7 => InsufficientFunds { balance, amount },
    8 => BadDerivedId,
    9 => SameAccountSwap,
    10 => BadValue,
    11 => KindMismatch,
    12 => BadCertificate,
    13 => LockNotAllowed,
    20 => UnknownInstance,
    21 => InstanceClosed,
    22 => BadLockCert { role },
    23 => NotALockedOwner,
    24 => InvalidConfirm,
    25 => RoundUnavailable { round },
    26 => Unsafe,
    27 => WrongLeader { round },
    28 => MissingLockCertificates,
    30 => UnknownFunction,
    31 => UndefinedExecution,
    32 => CommitmentMismatch,
    33 => MissingEvidence,
    34 => BadAsset,
    40 => UnknownAuction,
    41 => WrongPhase,
    42 => BadEvidence,
    43 => NotSeller,
    44 => BadBidCert,
    45 => DecryptionMismatch,
});
