//! Owners and brokers of an atomic swap.
//!
//! Owner 1 doubles as the broker unless told otherwise. The owners talk to
//! each other only through the off-chain [`Board`].

use std::collections::BTreeMap;

use serde::Deserialize;

use super::{ClientContext, ClientError, ClientOutcome};
use crate::auction::EndOfAuction;
use crate::committee::{check_certificate, Authenticated, AuthorityIndex, Certificate};
use crate::crypto::KeyPair;
use crate::ids::AccountId;
use crate::protocol::{ClientMessage, Response, RoundInfo};
use crate::types::{
    Commit, CommitCertificate, Decision, LockCertificate, Operation, PreCommit,
    PreCommitCertificate, Proposal, RequestCertificate, Role, RoundNumber, SequenceNumber,
};

/// Off-chain channel shared by the clients of one run.
#[derive(Debug, Default)]
pub struct Board {
    pub swaps: BTreeMap<String, SwapPost>,
    pub auctions: BTreeMap<String, AuctionPost>,
}

#[derive(Debug, Clone, Default)]
pub struct SwapPost {
    /// Owner 2's account and the sequence number it will lock at.
    pub offer: Option<(AccountId, SequenceNumber)>,
    pub creation: Option<RequestCertificate>,
    pub locks: [Option<LockCertificate>; 2],
    pub commits: Vec<CommitCertificate>,
}

#[derive(Debug, Clone, Default)]
pub struct AuctionPost {
    pub auction: Option<AccountId>,
    pub bids: Vec<RequestCertificate>,
    pub settlement: Option<Certificate<EndOfAuction>>,
}

/// `(id1, n1, id2, n2)` and the instance created for them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapPlan {
    pub swid: AccountId,
    pub id1: AccountId,
    pub n1: SequenceNumber,
    pub id2: AccountId,
    pub n2: SequenceNumber,
}

impl SwapPlan {
    /// Reads the plan back from a creation certificate.
    pub fn from_creation(creation: &RequestCertificate) -> Option<SwapPlan> {
        match &creation.value.operation {
            Operation::StartConsensusInstance {
                swid,
                id1,
                n1,
                id2,
                n2,
            } => Some(SwapPlan {
                swid: swid.clone(),
                id1: id1.clone(),
                n1: *n1,
                id2: id2.clone(),
                n2: *n2,
            }),
            _ => None,
        }
    }

    pub fn account(&self, role: Role) -> (&AccountId, SequenceNumber) {
        match role {
            Role::First => (&self.id1, self.n1),
            Role::Second => (&self.id2, self.n2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OwnerBehavior {
    #[default]
    Honest,
    /// Proposes at every new round with the decision flipped each time,
    /// ignoring locked certificates, and keeps going after a commit.
    FlipFlop,
    /// Signs conflicting proposals for the same round and sends each to a
    /// different group of authorities.
    Equivocator,
    /// Never locks.
    NoLock,
    /// Locks only after the instance has been aborted, then unlocks with
    /// its own lock certificate.
    LateLock,
}

impl OwnerBehavior {
    pub fn is_honest(self) -> bool {
        matches!(self, OwnerBehavior::Honest | OwnerBehavior::NoLock | OwnerBehavior::LateLock)
    }
}

/// One owner's side of a swap.
#[derive(Debug, Clone)]
pub struct SwapSide {
    pub name: String,
    pub role: Role,
    pub account: AccountId,
    pub key: KeyPair,
    pub behavior: OwnerBehavior,
    /// Account the broker creates the instance from (role 1 only).
    pub broker: Option<(AccountId, KeyPair)>,
    /// How long to wait for the counterparty at each off-chain step.
    pub patience: u64,
    /// For equivocators: the two authority groups.
    pub split: Option<[Vec<AuthorityIndex>; 2]>,
}

/// Highest round and pre-commit certificate seen by a quorum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundView {
    pub highest_round: Option<RoundNumber>,
    pub locked: Option<PreCommitCertificate>,
    pub closed: Option<CommitCertificate>,
    /// A round at least a quorum of authorities currently accept.
    pub available: RoundNumber,
}

impl RoundView {
    /// Combines answers from distinct authorities, ignoring invalid
    /// certificates.
    pub fn assemble(context: &ClientContext, infos: &[RoundInfo]) -> RoundView {
        let committee = &context.committee;
        let closed = infos
            .iter()
            .filter_map(|info| info.closed.clone())
            .find(|cert| check_certificate(committee, cert));
        let locked = infos
            .iter()
            .filter_map(|info| info.locked.clone())
            .filter(|cert| check_certificate(committee, cert))
            .max_by_key(|cert| cert.value.proposal.round);
        let highest_round = infos
            .iter()
            .filter_map(|info| info.proposed.as_ref().map(|p| p.round))
            .chain(locked.iter().map(|c| c.value.proposal.round))
            .max();
        let mut available: Vec<RoundNumber> = infos.iter().map(|info| info.available).collect();
        available.sort_unstable_by(|a, b| b.cmp(a));
        let index = committee.quorum().min(available.len()).saturating_sub(1);
        RoundView {
            highest_round,
            locked,
            closed,
            available: available.get(index).copied().unwrap_or(0),
        }
    }
}

pub async fn query_view(context: &ClientContext, swid: &AccountId) -> Result<RoundView, ClientError> {
    let infos = context
        .gather(
            "round query",
            ClientMessage::QueryRound { swid: swid.clone() },
            context.committee.quorum(),
            |_, response| match response {
                Response::Round { info } => Some(info.clone()),
                _ => None,
            },
        )
        .await?;
    let infos: Vec<RoundInfo> = infos.into_iter().map(|(_, info)| info).collect();
    Ok(RoundView::assemble(context, &infos))
}

/// Creates `swid = broker :: n` for the two accounts and returns the
/// creation certificate `Γ`. When the broker account is `id1` the lock will
/// come right after the creation, so `n1` is shifted accordingly.
pub async fn broker_start_instance(
    context: &ClientContext,
    broker: &AccountId,
    broker_key: &KeyPair,
    (id1, n1): (&AccountId, Option<SequenceNumber>),
    (id2, n2): (&AccountId, SequenceNumber),
) -> Result<(SwapPlan, RequestCertificate), ClientError> {
    let info = context.account_info(broker).await?;
    let n = info.next_sequence;
    let n1 = match n1 {
        Some(n1) => n1,
        None if broker == id1 => n + 1,
        None => context.account_info(id1).await?.next_sequence,
    };
    let plan = SwapPlan {
        swid: broker.child(n),
        id1: id1.clone(),
        n1,
        id2: id2.clone(),
        n2,
    };
    let (creation, _) = context
        .execute(
            broker_key,
            broker,
            n,
            Operation::StartConsensusInstance {
                swid: plan.swid.clone(),
                id1: plan.id1.clone(),
                n1: plan.n1,
                id2: plan.id2.clone(),
                n2: plan.n2,
            },
            None,
        )
        .await?;
    Ok((plan, creation))
}

/// Locks `id` at `sequence` into `swid` and returns `L_i`.
pub async fn lock_account(
    context: &ClientContext,
    owner: &KeyPair,
    (id, sequence): (&AccountId, SequenceNumber),
    swid: &AccountId,
    role: Role,
    handover: &KeyPair,
) -> Result<LockCertificate, ClientError> {
    context
        .certify_request(
            owner,
            id,
            sequence,
            Operation::LockInto {
                swid: swid.clone(),
                role,
                key: handover.public(),
            },
            None,
        )
        .await
}

async fn commit_pre_commit(
    context: &ClientContext,
    cert: PreCommitCertificate,
) -> Result<CommitCertificate, ClientError> {
    let commit = Commit {
        proposal: cert.value.proposal.clone(),
    };
    context
        .certify("pre-commit", ClientMessage::PreCommit { cert }, &commit)
        .await
}

/// Smallest round `≥ round` that `role` may lead.
fn next_led_round(context: &ClientContext, round: RoundNumber, role: Role) -> RoundNumber {
    let schedule = &context.schedule;
    let mut round = round;
    while schedule.parity_leaders && schedule.escalated(round) && leader(round) != role {
        round += 1;
    }
    round
}

fn leader(round: RoundNumber) -> Role {
    if round % 2 == 0 {
        Role::First
    } else {
        Role::Second
    }
}

/// Waits until `round` should be open at a quorum, given the current view.
async fn wait_for_round(context: &ClientContext, view: &RoundView, round: RoundNumber) {
    let schedule = &context.schedule;
    let gap = match (schedule.opens_at(round), schedule.opens_at(view.available)) {
        (Some(target), Some(open)) => target.saturating_sub(open),
        _ => context.config.delta,
    };
    context.sleep(gap.max(1)).await;
}

/// Leads rounds until a commit certificate exists. Adopts the decision of
/// any pre-commit certificate it sees.
pub async fn drive_round(
    context: &ClientContext,
    swid: &AccountId,
    role: Role,
    handover: &KeyPair,
    desired: Decision,
    locks: &[Option<LockCertificate>; 2],
) -> Result<CommitCertificate, ClientError> {
    let mut last_round: Option<RoundNumber> = None;
    for _ in 0..context.config.round_budget {
        let view = match query_view(context, swid).await {
            Ok(view) => view,
            Err(_) => {
                context.sleep(context.config.delta).await;
                continue;
            }
        };
        if let Some(closed) = view.closed {
            return Ok(closed);
        }
        if let Some(locked) = view.locked.clone() {
            if locked.value.proposal.decision != desired {
                context.note(format!(
                    "conflict observed on {swid}: adopting {} from round {}",
                    locked.value.proposal.decision, locked.value.proposal.round
                ));
            }
            match commit_pre_commit(context, locked).await {
                Ok(cert) => return Ok(cert),
                Err(_) => {
                    context.sleep(context.config.delta).await;
                    continue;
                }
            }
        }
        let mut round = view.highest_round.map_or(0, |k| k + 1);
        if let Some(last) = last_round {
            round = round.max(last + 1);
        }
        let round = next_led_round(context, round, role);
        if round > view.available {
            wait_for_round(context, &view, round).await;
            continue;
        }
        let proposal = Proposal {
            swid: swid.clone(),
            round,
            decision: desired,
        };
        last_round = Some(round);
        let message = ClientMessage::Proposal {
            proposal: Authenticated::new(proposal.clone(), handover),
            locks: locks.clone(),
        };
        match context
            .certify("proposal", message, &PreCommit { proposal })
            .await
        {
            Ok(cert) => {
                if let Ok(commit) = commit_pre_commit(context, cert).await {
                    return Ok(commit);
                }
            }
            Err(_) => context.sleep(context.config.delta).await,
        }
    }
    Err(ClientError::Stalled(format!(
        "no commit for {swid} after {} rounds",
        context.config.round_budget
    )))
}

/// `HandleCommit(C*, L1, L2)` at a quorum.
pub async fn finalize(
    context: &ClientContext,
    cert: &CommitCertificate,
    locks: &[Option<LockCertificate>; 2],
) -> Result<(), ClientError> {
    context
        .acknowledge(
            "commit",
            ClientMessage::Commit {
                cert: cert.clone(),
                locks: locks.clone(),
            },
        )
        .await
}

/// Proposes at every round it can, flipping the decision each time and
/// pushing every pre-commit certificate it obtains. Returns the commit
/// certificates it managed to form.
pub async fn flip_flop(
    context: &ClientContext,
    swid: &AccountId,
    role: Role,
    handover: &KeyPair,
    first: Decision,
    locks: &[Option<LockCertificate>; 2],
) -> Vec<CommitCertificate> {
    let mut decision = first;
    let mut last_round: Option<RoundNumber> = None;
    let mut commits: Vec<CommitCertificate> = Vec::new();
    for _ in 0..context.config.round_budget {
        let Ok(view) = query_view(context, swid).await else {
            context.sleep(context.config.delta).await;
            continue;
        };
        if view.closed.is_some() {
            break;
        }
        let mut round = view.highest_round.map_or(0, |k| k + 1);
        if let Some(last) = last_round {
            round = round.max(last + 1);
        }
        let round = next_led_round(context, round, role);
        if round > view.available {
            wait_for_round(context, &view, round).await;
            continue;
        }
        last_round = Some(round);
        let proposal = Proposal {
            swid: swid.clone(),
            round,
            decision,
        };
        decision = decision.flip();
        let message = ClientMessage::Proposal {
            proposal: Authenticated::new(proposal.clone(), handover),
            locks: locks.clone(),
        };
        if let Ok(cert) = context
            .certify("proposal", message, &PreCommit { proposal })
            .await
        {
            if let Ok(commit) = commit_pre_commit(context, cert).await {
                if !commits.contains(&commit) {
                    commits.push(commit);
                }
            }
        }
    }
    commits
}

/// Sends `first` to one group and its opposite to the other, at the same
/// round, and pushes whatever certificates form.
pub async fn equivocate(
    context: &ClientContext,
    swid: &AccountId,
    handover: &KeyPair,
    first: Decision,
    locks: &[Option<LockCertificate>; 2],
    split: &[Vec<AuthorityIndex>; 2],
) -> Vec<CommitCertificate> {
    let Ok(view) = query_view(context, swid).await else {
        return Vec::new();
    };
    let round = view.highest_round.map_or(0, |k| k + 1);
    if round > view.available {
        wait_for_round(context, &view, round).await;
    }
    let quorum = context.committee.quorum();
    let mut pre_commits = Vec::new();
    for (group, decision) in split.iter().zip([first, first.flip()]) {
        let proposal = Proposal {
            swid: swid.clone(),
            round,
            decision,
        };
        let value = PreCommit {
            proposal: proposal.clone(),
        };
        let digest = crate::committee::Signable::signing_digest(&value);
        let committee = context.committee.clone();
        let votes = context
            .gather_among(
                group,
                "equivocating proposal",
                ClientMessage::Proposal {
                    proposal: Authenticated::new(proposal, handover),
                    locks: locks.clone(),
                },
                quorum,
                |from, response| {
                    response
                        .vote()
                        .filter(|v| v.signer == from && v.verify_digest(&committee, &digest))
                },
            )
            .await;
        if let Ok(votes) = votes {
            if let Ok(cert) = crate::committee::aggregate_certificate(
                &committee,
                &value,
                votes.into_iter().map(|(_, v)| v),
            ) {
                pre_commits.push((group, cert));
            }
        }
    }
    let mut commits = Vec::new();
    for (group, cert) in pre_commits {
        let commit = Commit {
            proposal: cert.value.proposal.clone(),
        };
        let digest = crate::committee::Signable::signing_digest(&commit);
        let committee = context.committee.clone();
        let votes = context
            .gather_among(
                group,
                "equivocating pre-commit",
                ClientMessage::PreCommit { cert },
                quorum,
                |from, response| {
                    response
                        .vote()
                        .filter(|v| v.signer == from && v.verify_digest(&committee, &digest))
                },
            )
            .await;
        if let Ok(votes) = votes {
            if let Ok(cert) = crate::committee::aggregate_certificate(
                &committee,
                &commit,
                votes.into_iter().map(|(_, v)| v),
            ) {
                commits.push(cert);
            }
        }
    }
    commits
}

/// Polls the board every `delta` until `read` yields something or
/// `deadline` passes.
pub async fn wait_for_board<T>(
    context: &ClientContext,
    deadline: u64,
    mut read: impl FnMut(&Board) -> Option<T>,
) -> Option<T> {
    loop {
        if let Some(value) = read(&context.board.borrow()) {
            return Some(value);
        }
        if context.now() >= deadline {
            return None;
        }
        let step = context.config.delta.min(deadline - context.now()).max(1);
        context.sleep(step).await;
    }
}

fn post(context: &ClientContext, name: &str, update: impl FnOnce(&mut SwapPost)) {
    update(context.board.borrow_mut().swaps.entry(name.to_owned()).or_default());
}

fn read_post<T>(context: &ClientContext, name: &str, read: impl FnOnce(&SwapPost) -> Option<T>) -> Option<T> {
    context.board.borrow().swaps.get(name).and_then(read)
}

/// The complete life of one swap owner.
pub async fn run_owner(context: ClientContext, side: SwapSide) -> ClientOutcome {
    match owner(&context, &side).await {
        Ok(summary) => ClientOutcome::ok(summary),
        Err(error) => ClientOutcome::failed(format!("{}: {error}", side.name)),
    }
}

async fn owner(context: &ClientContext, side: &SwapSide) -> Result<String, ClientError> {
    let name = side.name.as_str();
    let role = side.role;
    let patience = side.patience;
    let plan = match role {
        Role::First => {
            let deadline = context.now() + patience;
            let offer = wait_for_board(context, deadline, |board| {
                board.swaps.get(name).and_then(|post| post.offer.clone())
            })
            .await
            .ok_or_else(|| ClientError::Stalled("no offer from owner 2".into()))?;
            let (broker, broker_key) = side
                .broker
                .clone()
                .unwrap_or_else(|| (side.account.clone(), side.key.clone()));
            let (plan, creation) = broker_start_instance(
                context,
                &broker,
                &broker_key,
                (&side.account, None),
                (&offer.0, offer.1),
            )
            .await?;
            post(context, name, |p| p.creation = Some(creation));
            plan
        }
        Role::Second => {
            let info = context.account_info(&side.account).await?;
            let offer = (side.account.clone(), info.next_sequence);
            post(context, name, |p| p.offer = Some(offer.clone()));
            let deadline = context.now() + 2 * patience;
            let creation = wait_for_board(context, deadline, |board| {
                board.swaps.get(name).and_then(|post| post.creation.clone())
            })
            .await
            .ok_or_else(|| ClientError::Stalled("no instance created".into()))?;
            let plan = SwapPlan::from_creation(&creation)
                .filter(|plan| (plan.id2.clone(), plan.n2) == offer)
                .filter(|_| check_certificate(&context.committee, &creation))
                .ok_or_else(|| ClientError::Protocol("bad creation certificate".into()))?;
            plan
        }
    };
    let swid = plan.swid.clone();
    let handover = context.fresh_key();
    let own = plan.account(role);

    if side.behavior == OwnerBehavior::NoLock {
        return Ok(format!("{name}: left {swid} without locking"));
    }
    if side.behavior == OwnerBehavior::LateLock {
        return late_lock(context, side, &plan, &handover).await;
    }

    let lock = lock_account(context, &side.key, own, &swid, role, &handover).await?;
    post(context, name, |p| p.locks[role.slot()] = Some(lock));
    let other = role.other();
    let deadline = context.now() + patience;
    let other_lock = wait_for_board(context, deadline, |board| {
        board.swaps.get(name).and_then(|p| p.locks[other.slot()].clone())
    })
    .await;
    let locks = read_post(context, name, |p| Some(p.locks.clone())).expect("posted");
    let desired = if other_lock.is_some() {
        Decision::Confirm
    } else {
        Decision::Abort
    };

    let commit = match side.behavior {
        OwnerBehavior::FlipFlop => {
            let commits = flip_flop(context, &swid, role, &handover, desired, &locks).await;
            for commit in &commits {
                let _ = finalize(context, commit, &locks).await;
            }
            let decisions: Vec<String> = commits
                .iter()
                .map(|c| format!("{}@{}", c.value.proposal.decision, c.value.proposal.round))
                .collect();
            return Ok(format!("{name}: flip-flopped on {swid}, commits [{}]", decisions.join(", ")));
        }
        OwnerBehavior::Equivocator => {
            let split = side.split.clone().unwrap_or_else(|| default_split(context));
            let commits = equivocate(context, &swid, &handover, desired, &locks, &split).await;
            for commit in &commits {
                let _ = finalize(context, commit, &locks).await;
            }
            return Ok(format!("{name}: equivocated on {swid}, {} commit certificates", commits.len()));
        }
        _ => {
            // Give a cooperating owner 1 the first shot at leading.
            if role == Role::Second {
                let deadline = context.now() + context.config.delta;
                wait_for_board(context, deadline, |board| {
                    board.swaps.get(name).and_then(|p| p.commits.first().cloned())
                })
                .await;
            }
            let posted = read_post(context, name, |p| p.commits.first().cloned());
            match posted {
                Some(commit) => commit,
                None => drive_round(context, &swid, role, &handover, desired, &locks).await?,
            }
        }
    };
    post(context, name, |p| {
        if !p.commits.contains(&commit) {
            p.commits.push(commit.clone())
        }
    });
    // Attach every lock known by now so that late locks are released too.
    let locks = read_post(context, name, |p| Some(p.locks.clone())).expect("posted");
    finalize(context, &commit, &locks).await?;
    let decision = commit.value.proposal.decision;
    let summary = match decision {
        Decision::Confirm => {
            let (gained, _) = plan.account(other);
            format!("{name}: {swid} confirmed; now owns {gained} with the handover key")
        }
        Decision::Abort => format!("{name}: {swid} aborted; {} unlocked", own.0),
    };
    Ok(summary)
}

/// Waits for the instance to be aborted without us, then locks and uses the
/// lock certificate to unlock again.
async fn late_lock(
    context: &ClientContext,
    side: &SwapSide,
    plan: &SwapPlan,
    handover: &KeyPair,
) -> Result<String, ClientError> {
    let name = side.name.as_str();
    let deadline = context.now() + 64 * side.patience;
    let commit = wait_for_board(context, deadline, |board| {
        board.swaps.get(name).and_then(|p| p.commits.first().cloned())
    })
    .await
    .ok_or_else(|| ClientError::Stalled("instance never closed".into()))?;
    let own = plan.account(side.role);
    let lock = lock_account(context, &side.key, own, &plan.swid, side.role, handover).await?;
    post(context, name, |p| p.locks[side.role.slot()] = Some(lock.clone()));
    let mut locks = [None, None];
    locks[side.role.slot()] = Some(lock);
    finalize(context, &commit, &locks).await?;
    Ok(format!(
        "{name}: locked {} after {} closed with {}; unlocked with own lock",
        own.0, plan.swid, commit.value.proposal.decision
    ))
}

/// First quorum and last quorum of the committee; they overlap in `f + 1`
/// authorities.
pub fn default_split(context: &ClientContext) -> [Vec<AuthorityIndex>; 2] {
    let all: Vec<AuthorityIndex> = context.committee.indices().collect();
    let quorum = context.committee.quorum();
    [all[..quorum].to_vec(), all[all.len() - quorum..].to_vec()]
}
