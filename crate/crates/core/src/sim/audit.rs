//! Invariant audits over a finished run.
//!
//! Everything here works from the trace and the run metadata alone, so a
//! trace read back from disk can be re-audited.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::executor::{authority_key, RunMeta};
use super::trace::{Checkpoint, HandledRecord, Record, Trace};
use crate::auction::{settle, EndOfAuction, EndOfBidding};
use crate::committee::{check_certificate, Certificate, Committee, Signable, Vote};
use crate::crypto::{Digest, KeyPair};
use crate::ids::AccountId;
use crate::protocol::{ClientMessage, Response};
use crate::types::{Commit, Decision, Operation, PreCommit, RequestKind, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Index of the trace event that exposes it, if there is one.
    pub event: Option<u64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditResult {
    pub name: String,
    pub passed: bool,
    pub violations: Vec<Violation>,
}

/// Names of all audits, in report order.
pub const AUDITS: [&str; 13] = [
    "agreement",
    "double-sign",
    "monotonicity",
    "conservation",
    "non-negative-balances",
    "eventual-consistency",
    "bid-phase",
    "escrow-release",
    "swap-validity",
    "unlock-liveness",
    "proposal-uniqueness",
    "settlement-truthfulness",
    "unforgeability",
];

struct Auditor<'a> {
    meta: &'a RunMeta,
    committee: Committee,
    violations: BTreeMap<&'static str, Vec<Violation>>,
}

impl Auditor<'_> {
    fn flag(&mut self, audit: &'static str, event: Option<u64>, message: String) {
        self.violations.entry(audit).or_default().push(Violation { event, message });
    }

    fn honest(&self, authority: u16) -> bool {
        self.meta.is_honest(authority)
    }
}

/// Runs every audit.
pub fn audit(trace: &Trace, meta: &RunMeta) -> Vec<AuditResult> {
    let keys: Vec<KeyPair> = (0..meta.n).map(authority_key).collect();
    let committee =
        Committee::new(keys.iter().map(KeyPair::public).collect()).expect("committee size validated");
    let mut auditor = Auditor {
        meta,
        committee,
        violations: BTreeMap::new(),
    };
    let mut handled = Vec::new();
    let mut checkpoints = Vec::new();
    for (event, record) in trace.records() {
        match record {
            Record::Handled(record) => {
                if let super::trace::Actor::Authority { index } = event.actor {
                    handled.push((event.index, index, record));
                }
            }
            Record::Checkpoint(checkpoint) => checkpoints.push((event.index, checkpoint)),
            _ => {}
        }
    }
    let observed = Observed::collect(&auditor.committee, &handled);
    agreement(&mut auditor, &handled, &observed);
    double_sign(&mut auditor, &handled);
    monotonicity(&mut auditor, &checkpoints);
    conservation(&mut auditor, &checkpoints);
    final_states(&mut auditor);
    bid_phase(&mut auditor, &handled);
    swap_outcomes(&mut auditor, &observed);
    proposal_uniqueness(&mut auditor, &handled);
    settlement_truthfulness(&mut auditor, &observed);
    unforgeability(&mut auditor, &handled);
    AUDITS
        .iter()
        .map(|name| {
            let violations = auditor.violations.remove(name).unwrap_or_default();
            AuditResult {
                name: (*name).to_owned(),
                passed: violations.is_empty(),
                violations,
            }
        })
        .collect()
}

/// Valid certificates carried by messages in the trace, first sighting only.
#[derive(Default)]
struct Observed {
    commits: BTreeMap<Digest, (u64, Certificate<Commit>)>,
    /// Lock certificates by instance and role.
    locks: BTreeMap<(AccountId, Role), (u64, AccountId)>,
    settlements: BTreeMap<Digest, (u64, Certificate<EndOfAuction>)>,
}

impl Observed {
    fn collect(committee: &Committee, handled: &[(u64, u16, HandledRecord)]) -> Observed {
        let mut observed = Observed::default();
        for (index, _, record) in handled {
            let locks = match &record.message {
                ClientMessage::Proposal { locks, .. } => Some(locks),
                ClientMessage::Commit { cert, locks } => {
                    if !observed.commits.contains_key(&cert.digest()) && check_certificate(committee, cert) {
                        observed.commits.insert(cert.digest(), (*index, cert.clone()));
                    }
                    Some(locks)
                }
                ClientMessage::Settle { cert } => {
                    if !observed.settlements.contains_key(&cert.digest())
                        && check_certificate(committee, cert)
                    {
                        observed.settlements.insert(cert.digest(), (*index, cert.clone()));
                    }
                    None
                }
                _ => None,
            };
            for lock in locks.into_iter().flatten().flatten() {
                if let Operation::LockInto { swid, role, .. } = &lock.value.operation {
                    if lock.value.kind == RequestKind::Lock && check_certificate(committee, lock) {
                        observed
                            .locks
                            .entry((swid.clone(), *role))
                            .or_insert((*index, lock.value.id.clone()));
                    }
                }
            }
        }
        observed
    }
}

fn vote_of(record: &HandledRecord) -> Option<Vote> {
    record.response.vote()
}

/// No two commit certificates, observed or merely formable from the votes
/// authorities handed out, decide differently.
fn agreement(auditor: &mut Auditor, handled: &[(u64, u16, HandledRecord)], observed: &Observed) {
    let mut decided: BTreeMap<AccountId, (Decision, u64)> = BTreeMap::new();
    for (index, cert) in observed.commits.values() {
        let proposal = &cert.value.proposal;
        match decided.get(&proposal.swid) {
            Some((decision, first)) if *decision != proposal.decision => auditor.flag(
                "agreement",
                Some(*index),
                format!(
                    "instance {}: commit certificates for {:?} (event {first}) and {:?}",
                    proposal.swid, decision, proposal.decision
                ),
            ),
            Some(_) => {}
            None => {
                decided.insert(proposal.swid.clone(), (proposal.decision, *index));
            }
        }
    }
    // Commit votes: answers to pre-commit certificates.
    let mut votes: BTreeMap<(AccountId, Decision), (BTreeSet<u16>, u64)> = BTreeMap::new();
    for (index, authority, record) in handled {
        let ClientMessage::PreCommit { cert } = &record.message else {
            continue;
        };
        let Some(vote) = vote_of(record) else {
            continue;
        };
        let proposal = &cert.value.proposal;
        let commit = Commit {
            proposal: proposal.clone(),
        };
        if vote.signer.0 == *authority && vote.digest == commit.signing_digest() {
            let entry = votes
                .entry((proposal.swid.clone(), proposal.decision))
                .or_insert((BTreeSet::new(), *index));
            if entry.0.insert(*authority) && entry.0.len() == auditor.committee.quorum() {
                entry.1 = *index;
            }
        }
    }
    let quorum = auditor.committee.quorum();
    for ((swid, decision), (signers, index)) in &votes {
        if *decision != Decision::Confirm || signers.len() < quorum {
            continue;
        }
        if let Some((abort, abort_index)) = votes.get(&(swid.clone(), Decision::Abort)) {
            if abort.len() >= quorum {
                auditor.flag(
                    "agreement",
                    Some((*index).max(*abort_index)),
                    format!("instance {swid}: commit quorums exist for both decisions"),
                );
            }
        }
    }
}

/// Honest authorities sign at most one request per (account, sequence) and
/// at most one decision per (instance, round, stage).
fn double_sign(auditor: &mut Auditor, handled: &[(u64, u16, HandledRecord)]) {
    let mut requests: BTreeMap<(u16, AccountId, u64), Digest> = BTreeMap::new();
    let mut stages: BTreeMap<(u16, AccountId, u64, &'static str), Decision> = BTreeMap::new();
    for (index, authority, record) in handled {
        if !auditor.honest(*authority) || !record.sent {
            continue;
        }
        let Some(vote) = vote_of(record) else {
            continue;
        };
        match &record.message {
            ClientMessage::Request { request, .. } => {
                let value = &request.value;
                let key = (*authority, value.id.clone(), value.sequence);
                match requests.get(&key) {
                    Some(digest) if *digest != vote.digest => auditor.flag(
                        "double-sign",
                        Some(*index),
                        format!(
                            "authority {authority} signed two requests for {} at sequence {}",
                            value.id, value.sequence
                        ),
                    ),
                    Some(_) => {}
                    None => {
                        requests.insert(key, vote.digest);
                    }
                }
            }
            ClientMessage::Proposal { proposal, .. } => {
                let p = &proposal.value;
                let digest = PreCommit { proposal: p.clone() }.signing_digest();
                if vote.digest == digest {
                    let key = (*authority, p.swid.clone(), p.round, "pre-commit");
                    check_stage(auditor, &mut stages, key, p.decision, *index);
                }
            }
            ClientMessage::PreCommit { cert } => {
                let p = &cert.value.proposal;
                let digest = Commit { proposal: p.clone() }.signing_digest();
                if vote.digest == digest {
                    let key = (*authority, p.swid.clone(), p.round, "commit");
                    check_stage(auditor, &mut stages, key, p.decision, *index);
                }
            }
            _ => {}
        }
    }
}

fn check_stage(
    auditor: &mut Auditor,
    stages: &mut BTreeMap<(u16, AccountId, u64, &'static str), Decision>,
    key: (u16, AccountId, u64, &'static str),
    decision: Decision,
    index: u64,
) {
    match stages.get(&key) {
        Some(previous) if *previous != decision => {
            let (authority, swid, round, stage) = &key;
            auditor.flag(
                "double-sign",
                Some(index),
                format!("authority {authority}: {stage} votes for both decisions in {swid} round {round}"),
            );
        }
        Some(_) => {}
        None => {
            stages.insert(key, decision);
        }
    }
}

/// Sequence numbers, auction phases and instance rounds never go back.
fn monotonicity(auditor: &mut Auditor, checkpoints: &[(u64, Checkpoint)]) {
    let mut last: BTreeMap<u16, &Checkpoint> = BTreeMap::new();
    for (index, checkpoint) in checkpoints {
        if let Some(previous) = last.get(&checkpoint.authority) {
            let mut problems = Vec::new();
            let before: BTreeMap<_, _> = previous.sequences.iter().cloned().collect();
            for (id, sequence) in &checkpoint.sequences {
                if before.get(id).is_some_and(|old| sequence < old) {
                    problems.push(format!("next_sequence of {id} decreased"));
                }
            }
            let before: BTreeMap<_, _> = previous.phases.iter().cloned().collect();
            for (id, phase) in &checkpoint.phases {
                if before.get(id).is_some_and(|old| phase < old) {
                    problems.push(format!("auction {id} went back a phase"));
                }
            }
            let before: BTreeMap<_, _> = previous.instances.iter().cloned().collect();
            for (id, (proposed, locked)) in &checkpoint.instances {
                if let Some((old_proposed, old_locked)) = before.get(id) {
                    if proposed < old_proposed || locked < old_locked {
                        problems.push(format!("instance {id} went back a round"));
                    }
                }
            }
            for problem in problems {
                auditor.flag(
                    "monotonicity",
                    Some(*index),
                    format!("authority {}: {problem}", checkpoint.authority),
                );
            }
        }
        last.insert(checkpoint.authority, checkpoint);
    }
}

/// Balances, escrow, burned funds and funds in transit add up to genesis
/// after every step.
fn conservation(auditor: &mut Auditor, checkpoints: &[(u64, Checkpoint)]) {
    let genesis = auditor.meta.genesis_funds;
    for (index, checkpoint) in checkpoints {
        if !auditor.honest(checkpoint.authority) {
            continue;
        }
        let total = checkpoint.funds + checkpoint.in_flight;
        if total != genesis {
            auditor.flag(
                "conservation",
                Some(*index),
                format!(
                    "authority {}: funds {} + in flight {} != {genesis}",
                    checkpoint.authority, checkpoint.funds, checkpoint.in_flight
                ),
            );
        }
    }
    for state in &auditor.meta.finals {
        if auditor.honest(state.authority) && state.funds != genesis {
            let message = format!("authority {} ends with {} != {genesis}", state.authority, state.funds);
            auditor.flag("conservation", None, message);
        }
    }
}

fn final_states(auditor: &mut Auditor) {
    let meta = auditor.meta;
    let mut digests: BTreeMap<&str, Vec<u16>> = BTreeMap::new();
    for state in meta.live_honest() {
        digests.entry(state.consistency.as_str()).or_default().push(state.authority);
        for (id, balance) in &state.balances {
            if *balance < 0 {
                auditor.flag(
                    "non-negative-balances",
                    None,
                    format!("authority {}: {id} ends at {balance}", state.authority),
                );
            }
        }
        for auction in &state.settled {
            let held = state.escrow.get(auction).copied().unwrap_or(0);
            if held != 0 {
                auditor.flag(
                    "escrow-release",
                    None,
                    format!("authority {}: settled auction {auction} still holds {held}", state.authority),
                );
            }
        }
    }
    if meta.synced && digests.len() > 1 {
        let groups: Vec<String> = digests
            .values()
            .map(|group| format!("{group:?}"))
            .collect();
        auditor.flag(
            "eventual-consistency",
            None,
            format!("live honest authorities disagree: {}", groups.join(" vs ")),
        );
    }
}

/// Once an authority has voted to end bidding it accepts no more bids.
fn bid_phase(auditor: &mut Auditor, handled: &[(u64, u16, HandledRecord)]) {
    let mut closed: BTreeSet<(u16, AccountId)> = BTreeSet::new();
    for (index, authority, record) in handled {
        if !auditor.honest(*authority) {
            continue;
        }
        let Some(vote) = vote_of(record) else {
            continue;
        };
        match &record.message {
            ClientMessage::EndOfBidding { request } => {
                let canonical = EndOfBidding::new(request.value.auction.clone(), request.value.bids.clone());
                if vote.digest == canonical.signing_digest() {
                    closed.insert((*authority, request.value.auction.clone()));
                }
            }
            ClientMessage::Request { request, .. } => {
                if let Operation::SubmitBid { auction, .. } = &request.value.operation {
                    if closed.contains(&(*authority, auction.clone())) {
                        auditor.flag(
                            "bid-phase",
                            Some(*index),
                            format!("authority {authority} accepted a bid for {auction} after closing it"),
                        );
                    }
                }
            }
            _ => {}
        }
    }
}

/// Confirm needs both locks; every observed lock is released once its
/// instance has a commit certificate.
fn swap_outcomes(auditor: &mut Auditor, observed: &Observed) {
    let mut decided = BTreeSet::new();
    for (index, cert) in observed.commits.values() {
        let proposal = &cert.value.proposal;
        decided.insert(proposal.swid.clone());
        if proposal.decision == Decision::Confirm {
            for role in Role::BOTH {
                if !observed.locks.contains_key(&(proposal.swid.clone(), role)) {
                    auditor.flag(
                        "swap-validity",
                        Some(*index),
                        format!("instance {} confirmed without a lock for role {role:?}", proposal.swid),
                    );
                }
            }
        }
    }
    if !auditor.meta.synced {
        return;
    }
    let meta = auditor.meta;
    for ((swid, _), (index, account)) in &observed.locks {
        if !decided.contains(swid) {
            continue;
        }
        for state in meta.live_honest() {
            let account = account.to_string();
            let stuck = state
                .pending_locks
                .iter()
                .any(|lock| lock.account == account && lock.swid == swid.to_string());
            if stuck {
                auditor.flag(
                    "unlock-liveness",
                    Some(*index),
                    format!("authority {}: {account} still locked into decided {swid}", state.authority),
                );
            }
        }
    }
}

/// Honest leaders never propose both decisions for one round.
fn proposal_uniqueness(auditor: &mut Auditor, handled: &[(u64, u16, HandledRecord)]) {
    let mut seen: BTreeMap<(AccountId, u64), (Decision, u32)> = BTreeMap::new();
    for (index, _, record) in handled {
        let ClientMessage::Proposal { proposal, .. } = &record.message else {
            continue;
        };
        if !auditor.meta.honest_client(record.client) {
            continue;
        }
        let p = &proposal.value;
        match seen.get(&(p.swid.clone(), p.round)) {
            Some((decision, client)) if *decision != p.decision => {
                let message = format!(
                    "clients {client} and {} proposed different decisions for {} round {}",
                    record.client, p.swid, p.round
                );
                auditor.flag("proposal-uniqueness", Some(*index), message);
            }
            Some(_) => {}
            None => {
                seen.insert((p.swid.clone(), p.round), (p.decision, record.client));
            }
        }
    }
}

/// Settled values are the values bidders encrypted, and the certified
/// winner and price follow from them.
fn settlement_truthfulness(auditor: &mut Auditor, observed: &Observed) {
    let meta = auditor.meta;
    for (index, cert) in observed.settlements.values() {
        let value = &cert.value;
        let auction = value.auction.to_string();
        for bid in &value.bids {
            let Some(revealed) = bid.value else {
                continue;
            };
            let bidder = bid.bidder.to_string();
            let honest = meta
                .bids
                .iter()
                .any(|truth| truth.auction == auction && truth.bidder == bidder && truth.value == revealed);
            if !honest {
                auditor.flag(
                    "settlement-truthfulness",
                    Some(*index),
                    format!("auction {auction}: {bidder} never bid {revealed}"),
                );
            }
        }
        let outcome = settle(value.rule, &value.bids);
        if let Some(winner) = outcome.winner {
            let bid = value.bids[winner].eligible_value().unwrap_or(0);
            if outcome.price > bid {
                auditor.flag(
                    "settlement-truthfulness",
                    Some(*index),
                    format!("auction {auction}: price {} above winning bid {bid}", outcome.price),
                );
            }
        }
    }
}

/// Every vote of an honest authority inside a certificate was actually cast.
fn unforgeability(auditor: &mut Auditor, handled: &[(u64, u16, HandledRecord)]) {
    let mut cast: BTreeSet<(u16, Digest)> = BTreeSet::new();
    for (index, authority, record) in handled {
        let votes: Vec<Vote> = match &record.response {
            Response::Vote { vote } => vec![*vote],
            Response::Done { asset_vote } => asset_vote.iter().copied().collect(),
            Response::Votes { votes } => votes.clone(),
            _ => Vec::new(),
        };
        cast.extend(votes.iter().map(|vote| (vote.signer.0, vote.digest)));
        let mut check = |votes: &[Vote]| {
            for vote in votes {
                let signer = vote.signer.0;
                if auditor.honest(signer)
                    && !cast.contains(&(signer, vote.digest))
                    && vote.verify_digest(&auditor.committee, &vote.digest)
                {
                    auditor.flag(
                        "unforgeability",
                        Some(*index),
                        format!("authority {signer} never cast a vote in a certificate sent to {authority}"),
                    );
                }
            }
        };
        for_each_certificate(&record.message, &mut check);
    }
}

fn for_each_certificate(message: &ClientMessage, check: &mut impl FnMut(&[Vote])) {
    let locks = |locks: &[Option<Certificate<crate::types::Request>>; 2], check: &mut dyn FnMut(&[Vote])| {
        for lock in locks.iter().flatten() {
            check(&lock.votes);
        }
    };
    match message {
        ClientMessage::Confirmation { cert } => check(&cert.votes),
        ClientMessage::Proposal { locks: l, .. } => locks(l, check),
        ClientMessage::PreCommit { cert } => check(&cert.votes),
        ClientMessage::Commit { cert, locks: l } => {
            check(&cert.votes);
            locks(l, check);
        }
        ClientMessage::EndOfBidding { request } => {
            for bid in &request.value.bids {
                check(&bid.votes);
            }
        }
        ClientMessage::RevealShares { cert } => check(&cert.votes),
        ClientMessage::EndOfAuction { end_of_bidding, .. } => check(&end_of_bidding.votes),
        ClientMessage::Settle { cert } => check(&cert.votes),
        _ => {}
    }
}
