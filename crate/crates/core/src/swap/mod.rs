//! One-shot binary consensus instances deciding atomic swaps.
//!
//! An instance is created by a certified `StartConsensusInstance`, lives on
//! the shard of its `swid`, and is destroyed by the first valid commit
//! certificate. Clients (not authorities) drive rounds.

pub mod rounds;
pub mod rules;

use serde::Serialize;

use crate::accounts::{effect_origin, CrossShardRequest, Effect};
use crate::committee::{check_certificate, Authenticated, Committee};
use crate::crypto::PublicKey;
use crate::error::ProtocolError;
use crate::ids::AccountId;
use crate::types::{
    lock_terms, CommitCertificate, Decision, LockCertificate, PreCommitCertificate, Proposal,
    RequestCertificate, Role, SequenceNumber,
};

pub use rounds::RoundSchedule;
pub use rules::{is_safe_pre_commit, is_safe_proposal, SafetyRules};

/// Per-authority consensus parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SwapConfig {
    pub schedule: RoundSchedule,
    pub rules: SafetyRules,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapInstance {
    pub swid: AccountId,
    /// `(id_i, n_i)` per role.
    pub accounts: [(AccountId, SequenceNumber); 2],
    /// `pk_i`, set once a lock certificate for role `i` has been seen.
    pub keys: [Option<PublicKey>; 2],
    pub proposed: Option<Proposal>,
    pub locked: Option<PreCommitCertificate>,
    /// The creation certificate. Kept for audit only.
    pub received: RequestCertificate,
    /// Local time of `InitInstance`, the origin of the round schedule.
    pub created_at: u64,
}

impl SwapInstance {
    /// `InitInstance(swid, id1, n1, id2, n2, C)`.
    pub fn new(
        swid: AccountId,
        (id1, n1): (AccountId, SequenceNumber),
        (id2, n2): (AccountId, SequenceNumber),
        creation: RequestCertificate,
        now: u64,
    ) -> Self {
        Self {
            swid,
            accounts: [(id1, n1), (id2, n2)],
            keys: [None, None],
            proposed: None,
            locked: None,
            received: creation,
            created_at: now,
        }
    }

    pub fn locked_proposal(&self) -> Option<&Proposal> {
        self.locked.as_ref().map(|cert| &cert.value.proposal)
    }

    /// The key carried by `lock` if it is a valid lock certificate for `role`
    /// in this instance.
    fn lock_key(
        &self,
        committee: &Committee,
        role: Role,
        lock: &LockCertificate,
    ) -> Option<PublicKey> {
        let terms = lock_terms(lock)?;
        let (id, sequence) = &self.accounts[role.slot()];
        let matches = terms.role == role
            && terms.swid == &self.swid
            && terms.id == id
            && terms.sequence == *sequence;
        (matches && check_certificate(committee, lock)).then_some(terms.key)
    }

    /// Records `pk_i` for every valid supplied `L_i`. Valid certificates are
    /// recorded even when another one is rejected.
    fn record_locks(
        &mut self,
        committee: &Committee,
        locks: &[Option<LockCertificate>; 2],
    ) -> Result<(), ProtocolError> {
        let mut result = Ok(());
        for role in Role::BOTH {
            let Some(lock) = &locks[role.slot()] else {
                continue;
            };
            match self.lock_key(committee, role, lock) {
                Some(key) => self.keys[role.slot()] = Some(key),
                None => {
                    result = result.and(Err(ProtocolError::BadLockCert {
                        role: role.slot() as u8 + 1,
                    }))
                }
            }
        }
        result
    }

    /// `HandleProposal(auth_pk[P], L1, L2)`. On success the caller returns a
    /// vote on `PreCommit(P)`.
    pub fn handle_proposal(
        &mut self,
        committee: &Committee,
        config: &SwapConfig,
        now: u64,
        proposal: &Authenticated<Proposal>,
        locks: &[Option<LockCertificate>; 2],
    ) -> Result<(), ProtocolError> {
        if !proposal.verify() {
            return Err(ProtocolError::BadAuth);
        }
        let p = &proposal.value;
        if p.swid != self.swid {
            return Err(ProtocolError::UnknownInstance);
        }
        self.record_locks(committee, locks)?;
        let signer = Some(proposal.signer);
        if !self.keys.contains(&signer) {
            return Err(ProtocolError::NotALockedOwner);
        }
        if p.decision == Decision::Confirm && self.keys.iter().any(Option::is_none) {
            return Err(ProtocolError::InvalidConfirm);
        }
        let schedule = &config.schedule;
        if !schedule.is_available(p.round, self.created_at, now) {
            return Err(ProtocolError::RoundUnavailable { round: p.round });
        }
        if schedule.parity_leaders && schedule.escalated(p.round) {
            let leader = if p.round % 2 == 0 {
                Role::First
            } else {
                Role::Second
            };
            if self.keys[leader.slot()] != signer {
                return Err(ProtocolError::WrongLeader { round: p.round });
            }
        }
        if !is_safe_proposal(
            config.rules,
            self.proposed.as_ref(),
            self.locked_proposal(),
            p,
        ) {
            return Err(ProtocolError::Unsafe);
        }
        self.proposed = Some(p.clone());
        Ok(())
    }

    /// `HandlePreCommit(C)`. On success the caller returns a vote on
    /// `Commit(P)`.
    pub fn handle_pre_commit(
        &mut self,
        committee: &Committee,
        config: &SwapConfig,
        cert: &PreCommitCertificate,
    ) -> Result<(), ProtocolError> {
        if cert.value.proposal.swid != self.swid {
            return Err(ProtocolError::UnknownInstance);
        }
        if !check_certificate(committee, cert) {
            return Err(ProtocolError::BadCertificate);
        }
        if !is_safe_pre_commit(
            config.rules,
            self.proposed.as_ref(),
            self.locked_proposal(),
            &cert.value.proposal,
        ) {
            return Err(ProtocolError::Unsafe);
        }
        self.locked = Some(cert.clone());
        Ok(())
    }

    pub fn summary(&self) -> InstanceSummary {
        InstanceSummary {
            accounts: self
                .accounts
                .iter()
                .map(|(id, n)| (id.to_string(), *n))
                .collect(),
            keys: self
                .keys
                .iter()
                .map(|key| key.map(|k| hex::encode(k.0)))
                .collect(),
            proposed: self.proposed.clone(),
            locked: self.locked_proposal().cloned(),
            created_at: self.created_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstanceSummary {
    pub accounts: Vec<(String, SequenceNumber)>,
    pub keys: Vec<Option<String>>,
    pub proposed: Option<Proposal>,
    pub locked: Option<Proposal>,
    pub created_at: u64,
}

/// What an authority knows about the instance named by a commit certificate.
pub enum InstanceSlot<'a> {
    Live(&'a mut SwapInstance),
    /// Already destroyed by an earlier commit.
    Closed,
    /// Never created here (yet).
    Unknown,
}

/// Result of `HandleCommit`.
#[derive(Debug)]
pub struct CommitOutcome {
    pub unlocks: Vec<CrossShardRequest>,
    /// The instance must be destroyed and its id tombstoned.
    pub close: bool,
}

/// `HandleCommit(C*, L1, L2)`.
///
/// A confirm certificate for an instance this authority has not created yet
/// is refused (the client or a later sync redelivers it), since the key
/// exchange needs the instance's account data. An abort is honoured with
/// whatever lock certificates come with it and closes the id for good.
pub fn handle_commit(
    committee: &Committee,
    slot: InstanceSlot<'_>,
    cert: &CommitCertificate,
    locks: &[Option<LockCertificate>; 2],
) -> Result<CommitOutcome, ProtocolError> {
    if !check_certificate(committee, cert) {
        return Err(ProtocolError::BadCertificate);
    }
    let swid = &cert.value.proposal.swid;
    let digest = cert.digest();
    let unlock = |role: Role, id: &AccountId, sequence, new_owner| CrossShardRequest {
        target: id.clone(),
        origin: effect_origin(&digest, role.slot() as u32),
        effect: Effect::Unlock {
            sequence,
            new_owner,
            commit: cert.clone(),
        },
    };
    match cert.value.proposal.decision {
        Decision::Confirm => match slot {
            InstanceSlot::Live(instance) => {
                // Learn keys this authority missed; mismatching certificates
                // are simply ignored here.
                for role in Role::BOTH {
                    if let Some(lock) = &locks[role.slot()] {
                        if let Some(key) = instance.lock_key(committee, role, lock) {
                            instance.keys[role.slot()] = Some(key);
                        }
                    }
                }
                let [Some(key1), Some(key2)] = instance.keys else {
                    return Err(ProtocolError::MissingLockCertificates);
                };
                let new_owners = [key2, key1];
                let unlocks = Role::BOTH
                    .iter()
                    .map(|&role| {
                        let (id, n) = &instance.accounts[role.slot()];
                        unlock(role, id, *n, Some(new_owners[role.slot()]))
                    })
                    .collect();
                Ok(CommitOutcome {
                    unlocks,
                    close: true,
                })
            }
            InstanceSlot::Closed => Ok(CommitOutcome {
                unlocks: Vec::new(),
                close: false,
            }),
            InstanceSlot::Unknown => Err(ProtocolError::UnknownInstance),
        },
        Decision::Abort => {
            let live = match &slot {
                InstanceSlot::Live(instance) => Some(&**instance),
                _ => None,
            };
            let mut selected: [Option<(AccountId, SequenceNumber)>; 2] = [None, None];
            for role in Role::BOTH {
                if let Some(instance) = live {
                    if instance.keys[role.slot()].is_some() {
                        selected[role.slot()] = Some(instance.accounts[role.slot()].clone());
                    }
                }
                // Deliberately not cross-checked against the instance: the
                // account side guards on the sequence number.
                if let Some(lock) = &locks[role.slot()] {
                    let terms = lock_terms(lock)
                        .filter(|t| t.swid == swid && t.role == role)
                        .filter(|_| check_certificate(committee, lock))
                        .ok_or(ProtocolError::BadLockCert {
                            role: role.slot() as u8 + 1,
                        })?;
                    selected[role.slot()] = Some((terms.id.clone(), terms.sequence));
                }
            }
            let unlocks = Role::BOTH
                .iter()
                .filter_map(|&role| {
                    let (id, n) = selected[role.slot()].as_ref()?;
                    Some(unlock(role, id, *n, None))
                })
                .collect();
            Ok(CommitOutcome {
                unlocks,
                close: !matches!(slot, InstanceSlot::Closed),
            })
        }
    }
}
