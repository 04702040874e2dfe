//! One authority: its shards and the handlers for client messages and
//! cross-shard effects.
//!
//! Handlers never call into another shard's state except through the
//! returned [`CrossShardRequest`]s; the one exception is the read-only auction
//! phase check made before voting on a bid.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::Serialize;

use crate::accounts::{
    execute_operation, validate_operation, AccountState, AccountSummary, CrossShardRequest, Effect,
    LogEntry,
};
use crate::assets::{self, SpendEvidence};
use crate::auction::{
    check_settlement, AuctionState, AuctionSummary, HeldBid, Phase, SettledAuction,
};
use crate::committee::{check_certificate, AuthorityIndex, Committee, Signable, Vote};
use crate::crypto::{Digest, KeyPair, PublicKey};
use crate::encoding::Encode;
use crate::error::ProtocolError;
use crate::ids::AccountId;
use crate::protocol::{AccountInfo, ClientMessage, Response, RoundInfo};
use crate::swap::{handle_commit, InstanceSlot, InstanceSummary, SwapConfig, SwapInstance};
use crate::tpke::{KeyShare, VerificationKey};
use crate::types::{
    AssetBinding, AuthenticatedRequest, Commit, CommitCertificate, Operation, PreCommit,
    RequestCertificate, RequestKind, SequenceNumber,
};
use crate::auction::sealed_bid;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenesisAccount {
    pub id: AccountId,
    pub owner: Option<PublicKey>,
    pub balance: i64,
}

#[derive(Debug, Clone)]
pub struct AuthorityConfig {
    pub shard_count: usize,
    pub swap: SwapConfig,
    pub genesis: Vec<GenesisAccount>,
}

/// What is left of a destroyed id. Ids are never reused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tombstone {
    Deactivated { spend: RequestCertificate },
    SwapClosed { commit: CommitCertificate },
    AuctionSettled(SettledAuction),
}

#[derive(Debug, Clone, Default)]
pub struct Shard {
    pub accounts: BTreeMap<AccountId, AccountState>,
    pub swaps: BTreeMap<AccountId, SwapInstance>,
    pub auctions: BTreeMap<AccountId, AuctionState>,
    pub tombstones: BTreeMap<AccountId, Tombstone>,
    /// Deposits for auctions not yet initialized on this shard.
    pub orphan_escrow: BTreeMap<AccountId, BTreeMap<Digest, HeldBid>>,
    /// Unlocks that arrived before the account reached their sequence
    /// number; applied as soon as it does.
    pub parked_unlocks: BTreeMap<(AccountId, SequenceNumber), (Option<PublicKey>, CommitCertificate)>,
    /// Origins of the cross-shard effects already applied.
    pub applied: BTreeSet<Digest>,
    /// Funds destroyed: balances of deactivated accounts and credits to
    /// deactivated ids.
    pub burned: i128,
}

impl Shard {
    fn unlock(&mut self, id: &AccountId, sequence: SequenceNumber, new_owner: Option<PublicKey>, commit: &CommitCertificate) {
        match self.accounts.get(id) {
            Some(state) if state.next_sequence > sequence => {}
            Some(state) if state.next_sequence == sequence => {
                self.parked_unlocks
                    .insert((id.clone(), sequence), (new_owner, commit.clone()));
                self.drain_unlocks(id);
            }
            _ if self.tombstones.contains_key(id) => {}
            _ => {
                self.parked_unlocks
                    .insert((id.clone(), sequence), (new_owner, commit.clone()));
            }
        }
    }

    /// Applies parked unlocks that have become current for `id`.
    fn drain_unlocks(&mut self, id: &AccountId) {
        while let Some(state) = self.accounts.get_mut(id) {
            let Some((new_owner, commit)) = self.parked_unlocks.remove(&(id.clone(), state.next_sequence)) else {
                return;
            };
            state.next_sequence += 1;
            state.pending = None;
            if new_owner.is_some() {
                state.owner = new_owner;
            }
            state.confirmed.push(LogEntry::SwapCommit { cert: commit });
        }
    }

    pub fn escrow_total(&self) -> i128 {
        let live: u128 = self.auctions.values().map(AuctionState::escrow_total).sum();
        let orphan: u128 = self
            .orphan_escrow
            .values()
            .flat_map(|bids| bids.values())
            .map(|bid| u128::from(bid.deposit))
            .sum();
        (live + orphan) as i128
    }
}

pub struct Authority {
    pub index: AuthorityIndex,
    key: KeyPair,
    pub committee: Committee,
    decryption_key: KeyShare,
    pub verification: VerificationKey,
    pub config: AuthorityConfig,
    pub shards: Vec<Shard>,
}

type Handled = Result<(Response, Vec<CrossShardRequest>), ProtocolError>;

fn respond(response: Response) -> Handled {
    Ok((response, Vec::new()))
}

impl Authority {
    pub fn new(
        index: AuthorityIndex,
        key: KeyPair,
        committee: Committee,
        decryption_key: KeyShare,
        verification: VerificationKey,
        config: AuthorityConfig,
    ) -> Self {
        assert!(config.shard_count > 0, "at least one shard");
        let mut shards = vec![Shard::default(); config.shard_count];
        for account in &config.genesis {
            shards[account.id.shard(config.shard_count)]
                .accounts
                .insert(account.id.clone(), AccountState::new(account.owner, account.balance));
        }
        Self {
            index,
            key,
            committee,
            decryption_key,
            verification,
            config,
            shards,
        }
    }

    pub fn shard_of(&self, id: &AccountId) -> usize {
        id.shard(self.config.shard_count)
    }

    fn shard(&self, id: &AccountId) -> &Shard {
        &self.shards[self.shard_of(id)]
    }

    fn shard_mut(&mut self, id: &AccountId) -> &mut Shard {
        let index = self.shard_of(id);
        &mut self.shards[index]
    }

    pub fn sign<T: Signable>(&self, value: &T) -> Vote {
        Vote::sign(value, self.index, &self.key)
    }

    pub fn account(&self, id: &AccountId) -> Option<&AccountState> {
        self.shard(id).accounts.get(id)
    }

    pub fn swap(&self, swid: &AccountId) -> Option<&SwapInstance> {
        self.shard(swid).swaps.get(swid)
    }

    pub fn auction(&self, id: &AccountId) -> Option<&AuctionState> {
        self.shard(id).auctions.get(id)
    }

    pub fn tombstone(&self, id: &AccountId) -> Option<&Tombstone> {
        self.shard(id).tombstones.get(id)
    }

    /// Handles one client message. Effects on other shards are returned
    /// rather than applied.
    pub fn handle(&mut self, now: u64, message: &ClientMessage) -> (Response, Vec<CrossShardRequest>) {
        let result = match message {
            ClientMessage::Request { request, evidence } => {
                self.handle_request(request, evidence.as_ref()).map(|vote| (Response::Vote { vote }, Vec::new()))
            }
            ClientMessage::Confirmation { cert } => self.handle_confirmation(cert),
            ClientMessage::Proposal { proposal, locks } => {
                let swid = proposal.value.swid.clone();
                self.with_instance(&swid, |instance, committee, config| {
                    instance.handle_proposal(committee, config, now, proposal, locks)
                })
                .map(|()| {
                    let vote = self.sign(&PreCommit {
                        proposal: proposal.value.clone(),
                    });
                    (Response::Vote { vote }, Vec::new())
                })
            }
            ClientMessage::PreCommit { cert } => {
                let swid = cert.value.proposal.swid.clone();
                self.with_instance(&swid, |instance, committee, config| {
                    instance.handle_pre_commit(committee, config, cert)
                })
                .map(|()| {
                    let vote = self.sign(&Commit {
                        proposal: cert.value.proposal.clone(),
                    });
                    (Response::Vote { vote }, Vec::new())
                })
            }
            ClientMessage::Commit { cert, locks } => self.handle_commit(cert, locks),
            ClientMessage::QueryRound { swid } => self.query_round(now, swid),
            ClientMessage::QueryAccount { id } => self.query_account(id),
            ClientMessage::Transmute { request } => assets::transmute(&self.committee, request)
                .map(|outputs| {
                    let votes = outputs.iter().map(|binding| self.sign(binding)).collect();
                    (Response::Votes { votes }, Vec::new())
                }),
            ClientMessage::EndOfBidding { request } => {
                let auction = request.value.auction.clone();
                let committee = self.committee.clone();
                self.with_auction(&auction, |state| {
                    state.handle_end_of_bidding(&committee, &auction, request)
                })
                .map(|value| (Response::Vote { vote: self.sign(&value) }, Vec::new()))
            }
            ClientMessage::RevealShares { cert } => {
                let auction = cert.value.auction.clone();
                let committee = self.committee.clone();
                let key = self.decryption_key.clone();
                self.with_auction(&auction, |state| {
                    state.record_end_of_bidding(&committee, &auction, cert)?;
                    state.release_shares(&key)
                })
                .map(|shares| (Response::Shares { shares }, Vec::new()))
            }
            ClientMessage::EndOfAuction {
                request,
                end_of_bidding,
                shares,
            } => {
                let auction = request.value.auction.clone();
                let committee = self.committee.clone();
                let verification = self.verification.clone();
                self.with_auction(&auction, |state| {
                    state.handle_end_of_auction(
                        &committee,
                        &verification,
                        &auction,
                        request,
                        end_of_bidding,
                        shares,
                    )
                })
                .map(|()| (Response::Vote { vote: self.sign(&request.value) }, Vec::new()))
            }
            ClientMessage::Settle { cert } => self.handle_settle(cert),
        };
        match result {
            Ok(handled) => handled,
            Err(error) => (Response::Error { error }, Vec::new()),
        }
    }

    /// `HandleRequest(auth_pk[R])`.
    pub fn handle_request(
        &mut self,
        auth: &AuthenticatedRequest,
        evidence: Option<&SpendEvidence>,
    ) -> Result<Vote, ProtocolError> {
        let request = &auth.value;
        let id = &request.id;
        let shard = self.shard(id);
        if shard.tombstones.contains_key(id) {
            return Err(ProtocolError::Deactivated);
        }
        let state = shard.accounts.get(id).ok_or(ProtocolError::UnknownAccount)?;
        let owner = state.owner.ok_or(ProtocolError::InactiveAccount)?;
        if auth.signer != owner || !auth.verify() {
            return Err(ProtocolError::BadAuth);
        }
        let expected_kind = if request.operation.is_locking() {
            RequestKind::Lock
        } else {
            RequestKind::Execute
        };
        if request.kind != expected_kind {
            return Err(ProtocolError::KindMismatch);
        }
        if let Some(pending) = &state.pending {
            if pending == request {
                return Ok(self.sign(request));
            }
            return Err(ProtocolError::AccountBusy);
        }
        if request.sequence != state.next_sequence {
            return Err(ProtocolError::SequenceMismatch {
                expected: state.next_sequence,
                got: request.sequence,
            });
        }
        validate_operation(state, id, request.sequence, &request.operation)?;
        match &request.operation {
            Operation::Spend { commitment } => {
                assets::check_spend(&self.committee, id, commitment, evidence)?;
            }
            Operation::SubmitBid { auction, .. } => match self.shard(auction).auctions.get(auction) {
                Some(state) if state.phase == Phase::Bidding => {}
                Some(_) => return Err(ProtocolError::WrongPhase),
                None if self.shard(auction).tombstones.contains_key(auction) => {
                    return Err(ProtocolError::WrongPhase)
                }
                None => return Err(ProtocolError::UnknownAuction),
            },
            _ => {}
        }
        let vote = self.sign(request);
        self.shard_mut(id)
            .accounts
            .get_mut(id)
            .expect("checked above")
            .pending = Some(request.clone());
        Ok(vote)
    }

    /// `HandleConfirmation(C)`. Redelivery of an executed certificate is a
    /// no-op.
    fn handle_confirmation(&mut self, cert: &RequestCertificate) -> Handled {
        if !check_certificate(&self.committee, cert) {
            return Err(ProtocolError::BadCertificate);
        }
        let request = &cert.value;
        if request.kind == RequestKind::Lock || request.operation.is_locking() {
            return Err(ProtocolError::LockNotAllowed);
        }
        let asset_vote = match &request.operation {
            Operation::BindAsset { data } => Some(self.sign(&AssetBinding {
                id: request.id.clone(),
                data: data.clone(),
            })),
            _ => None,
        };
        let done = Response::Done { asset_vote };
        let id = &request.id;
        let shard = self.shard_mut(id);
        if shard.tombstones.contains_key(id) {
            return Ok((done, Vec::new()));
        }
        let state = shard.accounts.get_mut(id).ok_or(ProtocolError::UnknownAccount)?;
        if request.sequence < state.next_sequence {
            return Ok((done, Vec::new()));
        }
        if state.owner.is_none() {
            return Err(ProtocolError::InactiveAccount);
        }
        if request.sequence > state.next_sequence {
            return Err(ProtocolError::SequenceMismatch {
                expected: state.next_sequence,
                got: request.sequence,
            });
        }
        let execution = execute_operation(state, cert);
        state.next_sequence += 1;
        state.pending = None;
        state.confirmed.push(LogEntry::Request { cert: cert.clone() });
        shard.drain_unlocks(id);
        if execution.deactivate {
            let state = shard.accounts.remove(id).expect("present");
            shard.burned += i128::from(state.balance);
            shard
                .tombstones
                .insert(id.clone(), Tombstone::Deactivated { spend: cert.clone() });
        }
        Ok((done, execution.effects))
    }

    fn with_instance<T>(
        &mut self,
        swid: &AccountId,
        f: impl FnOnce(&mut SwapInstance, &Committee, &SwapConfig) -> Result<T, ProtocolError>,
    ) -> Result<T, ProtocolError> {
        let index = self.shard_of(swid);
        let shard = &mut self.shards[index];
        if let Some(instance) = shard.swaps.get_mut(swid) {
            return f(instance, &self.committee, &self.config.swap);
        }
        if shard.tombstones.contains_key(swid) {
            Err(ProtocolError::InstanceClosed)
        } else {
            Err(ProtocolError::UnknownInstance)
        }
    }

    fn handle_commit(
        &mut self,
        cert: &CommitCertificate,
        locks: &[Option<crate::types::LockCertificate>; 2],
    ) -> Handled {
        let swid = cert.value.proposal.swid.clone();
        let index = self.shard_of(&swid);
        let shard = &mut self.shards[index];
        let closed = matches!(shard.tombstones.get(&swid), Some(Tombstone::SwapClosed { .. }));
        let slot = match shard.swaps.get_mut(&swid) {
            Some(instance) => InstanceSlot::Live(instance),
            None if closed => InstanceSlot::Closed,
            None if shard.tombstones.contains_key(&swid) => return Err(ProtocolError::InstanceClosed),
            None => InstanceSlot::Unknown,
        };
        let outcome = handle_commit(&self.committee, slot, cert, locks)?;
        if outcome.close {
            shard.swaps.remove(&swid);
            shard
                .tombstones
                .insert(swid, Tombstone::SwapClosed { commit: cert.clone() });
        }
        Ok((Response::Done { asset_vote: None }, outcome.unlocks))
    }

    fn query_round(&self, now: u64, swid: &AccountId) -> Handled {
        let shard = self.shard(swid);
        if let Some(instance) = shard.swaps.get(swid) {
            let schedule = &self.config.swap.schedule;
            return respond(Response::Round {
                info: RoundInfo {
                    proposed: instance.proposed.clone(),
                    locked: instance.locked.clone(),
                    closed: None,
                    available: schedule.highest_available(now.saturating_sub(instance.created_at)),
                },
            });
        }
        match shard.tombstones.get(swid) {
            Some(Tombstone::SwapClosed { commit }) => respond(Response::Round {
                info: RoundInfo {
                    proposed: None,
                    locked: None,
                    closed: Some(commit.clone()),
                    available: 0,
                },
            }),
            Some(_) => Err(ProtocolError::InstanceClosed),
            None => Err(ProtocolError::UnknownInstance),
        }
    }

    fn query_account(&self, id: &AccountId) -> Handled {
        let shard = self.shard(id);
        if shard.tombstones.contains_key(id) {
            return respond(Response::Account {
                info: AccountInfo {
                    owner: None,
                    next_sequence: 0,
                    balance: 0,
                    pending: None,
                    deactivated: true,
                },
            });
        }
        let state = shard.accounts.get(id).ok_or(ProtocolError::UnknownAccount)?;
        respond(Response::Account {
            info: AccountInfo {
                owner: state.owner,
                next_sequence: state.next_sequence,
                balance: state.balance,
                pending: state.pending.clone(),
                deactivated: false,
            },
        })
    }

    fn with_auction<T>(
        &mut self,
        id: &AccountId,
        f: impl FnOnce(&mut AuctionState) -> Result<T, ProtocolError>,
    ) -> Result<T, ProtocolError> {
        let shard = self.shard_mut(id);
        if let Some(state) = shard.auctions.get_mut(id) {
            return f(state);
        }
        if shard.tombstones.contains_key(id) {
            Err(ProtocolError::WrongPhase)
        } else {
            Err(ProtocolError::UnknownAuction)
        }
    }

    fn handle_settle(&mut self, cert: &crate::committee::Certificate<crate::auction::EndOfAuction>) -> Handled {
        let auction = cert.value.auction.clone();
        check_settlement(&self.committee, &auction, cert)?;
        let shard = self.shard_mut(&auction);
        if let Some(Tombstone::AuctionSettled(_)) = shard.tombstones.get(&auction) {
            return respond(Response::Done { asset_vote: None });
        }
        let state = shard
            .auctions
            .remove(&auction)
            .ok_or(ProtocolError::UnknownAuction)?;
        let settled = SettledAuction::new(cert.clone());
        let mut effects = Vec::new();
        for (submission, held) in &state.escrow {
            effects.extend(settled.release(submission, held));
        }
        effects.push(settled.reassign_item());
        shard
            .tombstones
            .insert(auction, Tombstone::AuctionSettled(settled));
        Ok((Response::Done { asset_vote: None }, effects))
    }

    /// Applies an effect addressed to one of this authority's shards.
    /// Returns follow-up effects (refunds for deposits reaching a settled
    /// auction).
    pub fn apply_cross_shard(&mut self, now: u64, request: &CrossShardRequest) -> Vec<CrossShardRequest> {
        let target = &request.target;
        let shard = self.shard_mut(target);
        if !shard.applied.insert(request.origin) {
            return Vec::new();
        }
        let tombstone = shard.tombstones.get(target);
        match &request.effect {
            Effect::InitAccount { owner, log } => {
                if tombstone.is_some() {
                    warn!("account {target} was deactivated; ignoring re-creation");
                    return Vec::new();
                }
                match shard.accounts.get_mut(target) {
                    None => {
                        let mut state = AccountState::new(Some(*owner), 0);
                        state.received.push(log.clone());
                        shard.accounts.insert(target.clone(), state);
                    }
                    // Created earlier by an incoming credit.
                    Some(state)
                        if state.owner.is_none()
                            && state.next_sequence == 0
                            && state.confirmed.is_empty() =>
                    {
                        state.owner = Some(*owner);
                        state.received.push(log.clone());
                    }
                    Some(_) => warn!("account {target} already exists"),
                }
            }
            Effect::Credit { amount, log } => {
                if tombstone.is_some() {
                    warn!("dropping credit of {amount} to deactivated {target}");
                    shard.burned += i128::from(*amount);
                    return Vec::new();
                }
                let state = shard
                    .accounts
                    .entry(target.clone())
                    .or_insert_with(|| AccountState::new(None, 0));
                state.balance += *amount as i64;
                state.received.push(log.clone());
            }
            Effect::InitInstance {
                id1,
                n1,
                id2,
                n2,
                creation,
            } => {
                if tombstone.is_none() && !shard.swaps.contains_key(target) {
                    shard.swaps.insert(
                        target.clone(),
                        SwapInstance::new(
                            target.clone(),
                            (id1.clone(), *n1),
                            (id2.clone(), *n2),
                            creation.clone(),
                            now,
                        ),
                    );
                }
            }
            Effect::Unlock {
                sequence,
                new_owner,
                commit,
            } => {
                shard.unlock(target, *sequence, *new_owner, commit);
            }
            Effect::InitAuction {
                seller,
                item,
                rule,
                proceeds,
                ..
            } => {
                if tombstone.is_none() && !shard.auctions.contains_key(target) {
                    let mut state = AuctionState::new(*seller, item.clone(), *rule, proceeds.clone());
                    if let Some(orphans) = shard.orphan_escrow.remove(target) {
                        state.escrow.extend(orphans);
                    }
                    shard.auctions.insert(target.clone(), state);
                }
            }
            Effect::EscrowBid { submission } => {
                let Some(bid) = sealed_bid(submission) else {
                    warn!("escrow effect without a bid");
                    return Vec::new();
                };
                let held = HeldBid {
                    bidder: bid.bidder.clone(),
                    deposit: bid.deposit,
                };
                let digest = submission.digest();
                if let Some(Tombstone::AuctionSettled(settled)) = tombstone {
                    return settled.release(&digest, &held);
                }
                match shard.auctions.get_mut(target) {
                    Some(state) => {
                        state.escrow.insert(digest, held);
                    }
                    None => {
                        shard
                            .orphan_escrow
                            .entry(target.clone())
                            .or_default()
                            .insert(digest, held);
                    }
                }
            }
            Effect::Reassign { owner, settlement } => {
                if let Some(state) = shard.accounts.get_mut(target) {
                    if state.owner.is_none() {
                        state.owner = Some(*owner);
                        state.received.push(LogEntry::Settlement {
                            cert: settlement.clone(),
                        });
                    }
                }
            }
        }
        Vec::new()
    }

    /// Sum of all balances, held deposits and destroyed funds.
    pub fn total_funds(&self) -> i128 {
        self.shards
            .iter()
            .map(|shard| {
                let balances: i128 = shard.accounts.values().map(|a| i128::from(a.balance)).sum();
                balances + shard.escrow_total() + shard.burned
            })
            .sum()
    }

    pub fn escrow_total(&self) -> i128 {
        self.shards.iter().map(Shard::escrow_total).sum()
    }

    /// Canonical bytes of everything two authorities that executed the same
    /// certificates must agree on: every live account except for `pending`
    /// (which records this authority's own votes), with the received log
    /// taken as a set.
    pub fn consistency_view(&self) -> Vec<u8> {
        let mut accounts: Vec<(&AccountId, &AccountState)> = self
            .shards
            .iter()
            .flat_map(|shard| shard.accounts.iter())
            .collect();
        accounts.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = Vec::new();
        (accounts.len() as u32).encode_to(&mut out);
        for (id, state) in accounts {
            id.encode_to(&mut out);
            state.owner.encode_to(&mut out);
            state.next_sequence.encode_to(&mut out);
            state.balance.encode_to(&mut out);
            // Two abort certificates for different rounds may both exist; the
            // account only records that the instance aborted.
            let confirmed: Vec<Digest> = state
                .confirmed
                .iter()
                .map(|entry| match entry {
                    LogEntry::SwapCommit { cert } => {
                        let proposal = &cert.value.proposal;
                        Digest::tagged("swap-outcome", &(proposal.swid.clone(), proposal.decision))
                    }
                    other => other.digest(),
                })
                .collect();
            confirmed.encode_to(&mut out);
            let mut received: Vec<Digest> = state.received.iter().map(LogEntry::digest).collect();
            received.sort();
            received.encode_to(&mut out);
        }
        out
    }

    pub fn snapshot(&self) -> AuthoritySnapshot {
        let mut snapshot = AuthoritySnapshot {
            authority: self.index.0,
            accounts: BTreeMap::new(),
            swaps: BTreeMap::new(),
            auctions: BTreeMap::new(),
            tombstones: BTreeMap::new(),
            burned: 0,
            orphan_escrow: 0,
        };
        for shard in &self.shards {
            for (id, state) in &shard.accounts {
                snapshot.accounts.insert(id.to_string(), state.summary());
            }
            for (id, instance) in &shard.swaps {
                snapshot.swaps.insert(id.to_string(), instance.summary());
            }
            for (id, state) in &shard.auctions {
                snapshot.auctions.insert(id.to_string(), state.summary());
            }
            for (id, tombstone) in &shard.tombstones {
                let text = match tombstone {
                    Tombstone::Deactivated { spend } => format!("deactivated {}", spend.digest()),
                    Tombstone::SwapClosed { commit } => format!(
                        "swap {} at round {}",
                        commit.value.proposal.decision, commit.value.proposal.round
                    ),
                    Tombstone::AuctionSettled(settled) => format!(
                        "auction settled: winner {:?} price {}",
                        settled
                            .outcome
                            .winner
                            .map(|w| settled.settlement.value.bids[w].bidder.to_string()),
                        settled.outcome.price
                    ),
                };
                snapshot.tombstones.insert(id.to_string(), text);
            }
            snapshot.burned += shard.burned;
            snapshot.orphan_escrow += shard
                .orphan_escrow
                .values()
                .flat_map(|bids| bids.values())
                .map(|bid| i128::from(bid.deposit))
                .sum::<i128>();
        }
        snapshot
    }
}

/// Serializable dump of an authority's state, in canonical key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuthoritySnapshot {
    pub authority: u16,
    pub accounts: BTreeMap<String, AccountSummary>,
    pub swaps: BTreeMap<String, InstanceSummary>,
    pub auctions: BTreeMap<String, AuctionSummary>,
    pub tombstones: BTreeMap<String, String>,
    pub burned: i128,
    pub orphan_escrow: i128,
}

#[cfg(test)]
mod tests;
