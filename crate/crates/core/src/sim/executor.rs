//! The event loop.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll, Waker};

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::faults::AuthorityFault;
use super::scenario::{ConfigError, Scenario};
use super::trace::{
    Actor, Checkpoint, DroppedRecord, HandledRecord, OutcomeRecord, ReplyRecord, SyncRecord, Trace,
};
use crate::accounts::{CrossShardRequest, Effect};
use crate::auction::{sealed_bid, Phase};
use crate::authority::{Authority, AuthorityConfig, AuthoritySnapshot, GenesisAccount};
use crate::client::assets::{run_transmutation, TransmuteSide};
use crate::client::auction::{run_bidder, run_seller, BidderSide, SellerBehavior, SellerSide};
use crate::client::swap::{default_split, run_owner, Board, OwnerBehavior, SwapSide};
use crate::client::{pay, ClientContext, ClientOutcome, RequestId};
use crate::committee::{AuthorityIndex, Committee};
use crate::crypto::{Digest, KeyPair};
use crate::ids::AccountId;
use crate::protocol::{ClientMessage, Response};
use crate::swap::SwapConfig;
use crate::testkit::derived_key;
use crate::tpke;
use crate::types::{Operation, RequestKind, Role};

/// Key of the `index`-th scenario account.
pub fn account_key(index: usize) -> KeyPair {
    derived_key("account-key", index as u64)
}

pub fn account_id(index: usize) -> AccountId {
    AccountId::root(index as u64 + 1)
}

pub fn authority_key(index: usize) -> KeyPair {
    derived_key("authority-key", index as u64)
}

fn sub_seed(seed: u64, label: &str, index: u64) -> u64 {
    let digest = Digest::tagged(label, &(seed, index));
    u64::from_le_bytes(digest.0[..8].try_into().expect("8 bytes"))
}

type DriverFuture = Pin<Box<dyn Future<Output = ClientOutcome>>>;

struct ClientSlot {
    meta: ClientMeta,
    context: ClientContext,
    future: Option<DriverFuture>,
    start: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientMeta {
    pub index: u32,
    pub name: String,
    pub role: String,
    pub honest: bool,
}

enum Body {
    Start(u32),
    ToAuthority {
        to: u16,
        client: u32,
        request: RequestId,
        message: Rc<ClientMessage>,
    },
    ToClient {
        client: u32,
        request: RequestId,
        from: u16,
        response: Response,
    },
    Effect {
        authority: u16,
        request: CrossShardRequest,
    },
    Wake(u32),
}

struct Event {
    time: u64,
    seq: u64,
    body: Body,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: `BinaryHeap` is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

/// What the audits need beyond the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub scenario: String,
    pub seed: u64,
    pub n: usize,
    pub f: usize,
    pub faults: BTreeMap<u16, AuthorityFault>,
    pub clients: Vec<ClientMeta>,
    pub genesis_funds: i64,
    pub end_time: u64,
    pub events: u64,
    pub budget_exceeded: Option<String>,
    pub synced: bool,
    pub finals: Vec<FinalState>,
    pub bids: Vec<BidTruth>,
}

impl RunMeta {
    /// Authorities that follow the protocol, crashed or not.
    pub fn is_honest(&self, authority: u16) -> bool {
        match self.faults.get(&authority) {
            None | Some(AuthorityFault::Crash { .. }) => true,
            Some(_) => false,
        }
    }

    /// Honest authorities still running at the end.
    pub fn live_honest(&self) -> impl Iterator<Item = &FinalState> {
        self.finals
            .iter()
            .filter(|s| !s.crashed && self.is_honest(s.authority))
    }

    pub fn honest_client(&self, index: u32) -> bool {
        self.clients
            .iter()
            .find(|c| c.index == index)
            .is_some_and(|c| c.honest)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalState {
    pub authority: u16,
    pub crashed: bool,
    pub consistency: String,
    pub funds: i64,
    pub balances: BTreeMap<String, i64>,
    pub next_sequences: BTreeMap<String, u64>,
    pub owners: BTreeMap<String, Option<String>>,
    /// Deposits held per auction id, including those for auctions not yet
    /// initialized here.
    pub escrow: BTreeMap<String, i64>,
    pub settled: Vec<String>,
    pub pending_locks: Vec<PendingLock>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingLock {
    pub account: String,
    pub sequence: u64,
    pub swid: String,
}

/// The value a bidder actually encrypted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BidTruth {
    pub auction: String,
    pub bidder: String,
    pub value: u64,
}

pub struct RunOutput {
    pub trace: Trace,
    pub meta: RunMeta,
    pub snapshots: Vec<AuthoritySnapshot>,
    pub outcomes: Vec<(ClientMeta, ClientOutcome)>,
    /// Every distinct certified message handed to an authority, in order of
    /// first delivery.
    pub certified: Vec<ClientMessage>,
}

/// The committee, the threshold encryption setup and the authorities in
/// their genesis state. Deterministic in `(scenario, seed)`.
pub fn build_authorities(
    scenario: &Scenario,
    seed: u64,
) -> Result<(Committee, tpke::TpkeSystem, Vec<Authority>), ConfigError> {
    let n = scenario.committee.n;
    let keys: Vec<KeyPair> = (0..n).map(authority_key).collect();
    let committee = Committee::new(keys.iter().map(KeyPair::public).collect())
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let mut setup_rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "tpke-setup", 0));
    let system = tpke::setup(n, scenario.f() + 1, &mut setup_rng)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let genesis: Vec<GenesisAccount> = scenario
        .accounts
        .iter()
        .enumerate()
        .map(|(i, account)| GenesisAccount {
            id: account_id(i),
            owner: Some(account_key(i).public()),
            balance: account.balance,
        })
        .collect();
    let config = AuthorityConfig {
        shard_count: scenario.committee.shard_count,
        swap: SwapConfig {
            schedule: scenario.consensus.schedule(),
            rules: scenario.consensus.rules(),
        },
        genesis,
    };
    let authorities = keys
        .into_iter()
        .enumerate()
        .map(|(i, key)| {
            Authority::new(
                AuthorityIndex(i as u16),
                key,
                committee.clone(),
                system.shares[i].clone(),
                system.verification.clone(),
                config.clone(),
            )
        })
        .collect();
    Ok((committee, system, authorities))
}

pub struct Simulation {
    scenario: Scenario,
    seed: u64,
    now: u64,
    seq: u64,
    events: u64,
    queue: BinaryHeap<Event>,
    network_rng: ChaCha8Rng,
    fault_rng: ChaCha8Rng,
    authorities: Vec<Authority>,
    faults: BTreeMap<u16, AuthorityFault>,
    clients: Vec<ClientSlot>,
    outcomes: Vec<Option<ClientOutcome>>,
    board: Rc<RefCell<Board>>,
    trace: Trace,
    /// Per authority: origin of each effect not yet applied, with the funds
    /// it carries.
    in_flight: Vec<BTreeMap<Digest, i64>>,
    certified: Vec<ClientMessage>,
    certified_seen: BTreeSet<Digest>,
    genesis_funds: i64,
    budget_exceeded: Option<String>,
}

impl Simulation {
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Simulation, ConfigError> {
        scenario.validate()?;
        let n = scenario.committee.n;
        let (committee, system, authorities) = build_authorities(scenario, seed)?;
        let genesis_funds = scenario.accounts.iter().map(|a| a.balance).sum();
        let mut simulation = Simulation {
            scenario: scenario.clone(),
            seed,
            now: 0,
            seq: 0,
            events: 0,
            queue: BinaryHeap::new(),
            network_rng: ChaCha8Rng::seed_from_u64(sub_seed(seed, "network", 0)),
            fault_rng: ChaCha8Rng::seed_from_u64(sub_seed(seed, "faults", 0)),
            authorities,
            faults: scenario
                .faults
                .iter()
                .map(|entry| (entry.authority, entry.fault.clone()))
                .collect(),
            clients: Vec::new(),
            outcomes: Vec::new(),
            board: Rc::new(RefCell::new(Board::default())),
            trace: Trace::default(),
            in_flight: vec![BTreeMap::new(); n],
            certified: Vec::new(),
            certified_seen: BTreeSet::new(),
            genesis_funds,
            budget_exceeded: None,
        };
        simulation.spawn_drivers(&committee, &system);
        Ok(simulation)
    }

    fn context(&self, actor: u32, committee: &Committee, system: &tpke::TpkeSystem) -> ClientContext {
        ClientContext::new(
            actor,
            committee.clone(),
            self.scenario.client,
            self.scenario.consensus.schedule(),
            system.public,
            self.board.clone(),
            sub_seed(self.seed, "client", u64::from(actor)),
        )
    }

    fn add_client(
        &mut self,
        name: String,
        role: &str,
        honest: bool,
        start: u64,
        context: ClientContext,
        future: DriverFuture,
    ) {
        let index = context.actor;
        self.clients.push(ClientSlot {
            meta: ClientMeta {
                index,
                name,
                role: role.to_owned(),
                honest,
            },
            context,
            future: Some(future),
            start,
        });
        self.outcomes.push(None);
    }

    fn spawn_drivers(&mut self, committee: &Committee, system: &tpke::TpkeSystem) {
        let scenario = self.scenario.clone();
        let lookup = |name: &str| {
            let i = scenario.account_index(name).expect("validated");
            (account_id(i), account_key(i))
        };
        let mut next = 0u32;
        let mut actor = || {
            next += 1;
            next - 1
        };
        for swap in &scenario.swaps {
            let sides = [
                (Role::First, &swap.first, swap.first_behavior, swap.start),
                (
                    Role::Second,
                    &swap.second,
                    swap.second_behavior,
                    swap.start + swap.second_offset,
                ),
            ];
            for (role, account, behavior, start) in sides {
                let (id, key) = lookup(account);
                let context = self.context(actor(), committee, system);
                let broker = match (role, &swap.broker) {
                    (Role::First, Some(broker)) => Some(lookup(broker)),
                    _ => None,
                };
                let split = (behavior == OwnerBehavior::Equivocator).then(|| default_split(&context));
                let side = SwapSide {
                    name: swap.name.clone(),
                    role,
                    account: id,
                    key,
                    behavior,
                    broker,
                    patience: swap.patience,
                    split,
                };
                let label = match role {
                    Role::First => "owner-1",
                    Role::Second => "owner-2",
                };
                let future = Box::pin(run_owner(context.clone(), side));
                self.add_client(
                    format!("{}/{label}", swap.name),
                    &format!("{label}:{behavior:?}"),
                    behavior.is_honest(),
                    start,
                    context,
                    future,
                );
            }
        }
        for (i, payment) in scenario.payments.iter().enumerate() {
            let (from, key) = lookup(&payment.from);
            let (to, _) = lookup(&payment.to);
            let context = self.context(actor(), committee, system);
            let future = Box::pin(pay(context.clone(), key, from, to, payment.amount));
            self.add_client(format!("payment-{i}"), "payer", true, payment.at, context, future);
        }
        for auction in &scenario.auctions {
            let (item, key) = lookup(&auction.item);
            let (proceeds, _) = lookup(&auction.proceeds);
            let context = self.context(actor(), committee, system);
            let side = SellerSide {
                name: auction.name.clone(),
                item,
                key,
                rule: auction.rule,
                proceeds,
                bidding_time: auction.bidding_time,
                behavior: auction.behavior,
                verification: system.verification.clone(),
            };
            let future = Box::pin(run_seller(context.clone(), side));
            self.add_client(
                format!("{}/seller", auction.name),
                &format!("seller:{:?}", auction.behavior),
                auction.behavior == SellerBehavior::Honest,
                auction.start,
                context,
                future,
            );
            for (b, bid) in auction.bids.iter().enumerate() {
                let (account, key) = lookup(&bid.bidder);
                let context = self.context(actor(), committee, system);
                let side = BidderSide {
                    name: format!("{}/bid-{b}", auction.name),
                    auction: auction.name.clone(),
                    account,
                    key,
                    deposit: bid.deposit,
                    value: bid.value,
                    patience: auction.bidding_time + 10 * scenario.client.delta,
                };
                let future = Box::pin(run_bidder(context.clone(), side.clone()));
                self.add_client(side.name, "bidder", true, auction.start + bid.at, context, future);
            }
        }
        for transmutation in &scenario.transmutations {
            let inputs = transmutation
                .inputs
                .iter()
                .map(|input| {
                    let (id, key) = lookup(&input.account);
                    (id, key, input.bytes().expect("validated"))
                })
                .collect();
            let context = self.context(actor(), committee, system);
            let side = TransmuteSide {
                name: transmutation.name.clone(),
                inputs,
                function: transmutation.function.clone(),
                params: hex::decode(&transmutation.params).expect("validated"),
            };
            let future = Box::pin(run_transmutation(context.clone(), side));
            self.add_client(
                transmutation.name.clone(),
                "transmuter",
                true,
                transmutation.at,
                context,
                future,
            );
        }
        for i in 0..self.clients.len() {
            let start = self.clients[i].start;
            self.schedule(start, Body::Start(i as u32));
        }
    }

    fn schedule(&mut self, time: u64, body: Body) {
        self.seq += 1;
        self.queue.push(Event {
            time,
            seq: self.seq,
            body,
        });
    }

    fn crashed(&self, authority: u16, now: u64) -> bool {
        self.faults
            .get(&authority)
            .is_some_and(|fault| fault.crashed_at(now))
    }

    pub fn run(mut self) -> RunOutput {
        let budget = self.scenario.run.time_budget;
        let event_budget = self.scenario.run.event_budget;
        while let Some(event) = self.queue.pop() {
            if event.time > budget {
                self.budget_exceeded = Some(format!("time budget {budget} reached"));
                self.queue.push(event);
                break;
            }
            if self.events >= event_budget {
                self.budget_exceeded = Some(format!("event budget {event_budget} reached"));
                self.queue.push(event);
                break;
            }
            self.events += 1;
            self.now = event.time;
            self.step(event.body);
        }
        let end_time = self.now;
        self.flush_effects();
        for i in 0..self.clients.len() {
            if self.outcomes[i].is_none() {
                let outcome = ClientOutcome::failed(format!(
                    "{}: unfinished at time {end_time}",
                    self.clients[i].meta.name
                ));
                self.record_outcome(i, outcome);
            }
        }
        let synced = self.scenario.run.sync;
        if synced {
            self.sync();
        }
        self.finish(end_time, synced)
    }

    fn step(&mut self, body: Body) {
        match body {
            Body::Start(client) => {
                self.trace.push(
                    self.now,
                    Actor::Client { index: client },
                    "start",
                    &self.clients[client as usize].meta.name,
                );
                self.poll_client(client);
            }
            Body::Wake(client) => self.poll_client(client),
            Body::ToClient {
                client,
                request,
                from,
                response,
            } => {
                let record = ReplyRecord {
                    request,
                    from,
                    response: Digest::tagged("response", &response),
                };
                self.trace
                    .push(self.now, Actor::Client { index: client }, "reply", &record);
                let slot = &self.clients[client as usize];
                if slot.future.is_some() {
                    slot.context.deliver(request, AuthorityIndex(from), response);
                    self.poll_client(client);
                }
            }
            Body::ToAuthority {
                to,
                client,
                request,
                message,
            } => self.deliver_to_authority(to, client, request, &message),
            Body::Effect { authority, request } => {
                if self.crashed(authority, self.now) {
                    return;
                }
                self.apply_effect(authority, &request);
                self.checkpoint(authority);
            }
        }
    }

    fn deliver_to_authority(&mut self, to: u16, client: u32, request: RequestId, message: &ClientMessage) {
        let kind = message.kind();
        if self.crashed(to, self.now) {
            let record = DroppedRecord {
                client,
                request,
                authority: to,
                reason: "crashed".into(),
            };
            self.trace
                .push(self.now, Actor::Authority { index: to }, format!("drop/{kind}"), &record);
            return;
        }
        let (honest, effects) = self.authorities[usize::from(to)].handle(self.now, message);
        if message.is_certified() {
            let digest = Digest::tagged("certified-message", message);
            if self.certified_seen.insert(digest) {
                self.certified.push(message.clone());
            }
        }
        let response = match self.faults.get(&to) {
            Some(fault) => fault.tamper(
                &self.authorities[usize::from(to)],
                &mut self.fault_rng,
                message,
                honest.clone(),
            ),
            None => Some(honest.clone()),
        };
        let record = HandledRecord {
            client,
            request,
            message: message.clone(),
            response: response.clone().unwrap_or(honest),
            sent: response.is_some(),
        };
        self.trace
            .push(self.now, Actor::Authority { index: to }, format!("handle/{kind}"), &record);
        self.send_effects(to, effects);
        self.checkpoint(to);
        if let Some(response) = response {
            for at in self.scenario.network.schedule(&mut self.network_rng, self.now, to) {
                self.schedule(
                    at,
                    Body::ToClient {
                        client,
                        request,
                        from: to,
                        response: response.clone(),
                    },
                );
            }
        }
    }

    fn send_effects(&mut self, authority: u16, effects: Vec<CrossShardRequest>) {
        let at = self.now + self.scenario.network.shard_delay;
        for request in effects {
            let amount = carried_funds(&request);
            if amount != 0 {
                self.in_flight[usize::from(authority)].insert(request.origin, amount);
            }
            self.schedule(at, Body::Effect { authority, request });
        }
    }

    fn apply_effect(&mut self, authority: u16, request: &CrossShardRequest) {
        let follow_ups = self.authorities[usize::from(authority)].apply_cross_shard(self.now, request);
        self.in_flight[usize::from(authority)].remove(&request.origin);
        self.trace.push(
            self.now,
            Actor::Authority { index: authority },
            format!("effect/{}", request.effect.name()),
            request,
        );
        self.send_effects(authority, follow_ups);
    }

    fn poll_client(&mut self, client: u32) {
        let index = client as usize;
        let now = self.now;
        let slot = &mut self.clients[index];
        slot.context.set_now(now);
        let Some(future) = slot.future.as_mut() else {
            return;
        };
        let mut cx = Context::from_waker(Waker::noop());
        let finished = match future.as_mut().poll(&mut cx) {
            Poll::Ready(outcome) => {
                slot.future = None;
                Some(outcome)
            }
            Poll::Pending => None,
        };
        let context = slot.context.clone();
        for note in context.take_notes() {
            self.trace.push(now, Actor::Client { index: client }, "note", &note);
        }
        for outgoing in context.take_outbox() {
            let to = outgoing.to.0;
            let arrivals = self.scenario.network.schedule(&mut self.network_rng, now, to);
            if arrivals.is_empty() {
                let record = DroppedRecord {
                    client,
                    request: outgoing.request,
                    authority: to,
                    reason: "network".into(),
                };
                self.trace.push(
                    now,
                    Actor::Client { index: client },
                    format!("drop/{}", outgoing.message.kind()),
                    &record,
                );
            }
            for at in arrivals {
                self.schedule(
                    at,
                    Body::ToAuthority {
                        to,
                        client,
                        request: outgoing.request,
                        message: outgoing.message.clone(),
                    },
                );
            }
        }
        for wakeup in context.take_wakeups() {
            self.schedule(wakeup.max(now), Body::Wake(client));
        }
        if let Some(outcome) = finished {
            self.record_outcome(index, outcome);
        }
    }

    fn record_outcome(&mut self, index: usize, outcome: ClientOutcome) {
        debug!("{}: {}", self.clients[index].meta.name, outcome.summary);
        let record = OutcomeRecord {
            name: self.clients[index].meta.name.clone(),
            ok: outcome.ok,
            summary: outcome.summary.clone(),
        };
        self.trace.push(
            self.now,
            Actor::Client {
                index: index as u32,
            },
            "outcome",
            &record,
        );
        self.outcomes[index] = Some(outcome);
    }

    /// Applies effects still queued at live authorities so that no funds
    /// stay in flight; everything else in the queue is discarded.
    fn flush_effects(&mut self) {
        while let Some(event) = self.queue.pop() {
            if let Body::Effect { authority, request } = event.body {
                if !self.crashed(authority, self.now) {
                    self.apply_effect(authority, &request);
                    self.checkpoint(authority);
                }
            }
        }
    }

    /// Replays every certified message seen during the run to each live
    /// authority until its state stops changing.
    fn sync(&mut self) {
        let certified = self.certified.clone();
        for a in 0..self.authorities.len() as u16 {
            if self.crashed(a, self.now) {
                continue;
            }
            for pass in 0..32u32 {
                let before = self.fingerprint(a);
                for message in &certified {
                    let (_, effects) = self.authorities[usize::from(a)].handle(self.now, message);
                    self.send_effects(a, effects);
                    self.flush_effects();
                }
                let changed = self.fingerprint(a) != before;
                let record = SyncRecord {
                    authority: a,
                    pass,
                    replayed: certified.len() as u32,
                    changed,
                };
                self.trace
                    .push(self.now, Actor::Authority { index: a }, "sync", &record);
                self.checkpoint(a);
                if !changed {
                    break;
                }
            }
        }
    }

    fn fingerprint(&self, authority: u16) -> Digest {
        let authority = &self.authorities[usize::from(authority)];
        let snapshot = serde_json::to_vec(&authority.snapshot()).expect("serializable");
        Digest::of(&snapshot)
    }

    fn checkpoint(&mut self, authority: u16) {
        let state = &self.authorities[usize::from(authority)];
        let in_flight: i64 = self.in_flight[usize::from(authority)].values().sum();
        let mut checkpoint = Checkpoint {
            authority,
            funds: state.total_funds() as i64,
            in_flight,
            min_balance: 0,
            sequences: Vec::new(),
            phases: Vec::new(),
            instances: Vec::new(),
        };
        for shard in &state.shards {
            for (id, account) in &shard.accounts {
                checkpoint.min_balance = checkpoint.min_balance.min(account.balance);
                checkpoint.sequences.push((id.clone(), account.next_sequence));
            }
            for (id, auction) in &shard.auctions {
                let phase = match auction.phase {
                    Phase::Bidding => 0,
                    Phase::Revealing => 1,
                    Phase::Settled => 2,
                };
                checkpoint.phases.push((id.clone(), phase));
            }
            for (id, instance) in &shard.swaps {
                checkpoint.instances.push((
                    id.clone(),
                    (
                        instance.proposed.as_ref().map(|p| p.round),
                        instance.locked.as_ref().map(|c| c.value.proposal.round),
                    ),
                ));
            }
        }
        checkpoint.sequences.sort();
        checkpoint.phases.sort();
        checkpoint.instances.sort();
        self.trace.push(
            self.now,
            Actor::Authority { index: authority },
            "checkpoint",
            &checkpoint,
        );
    }

    fn final_state(&self, authority: &Authority) -> FinalState {
        let index = authority.index.0;
        let mut state = FinalState {
            authority: index,
            crashed: self.crashed(index, self.now),
            consistency: Digest::of(&authority.consistency_view()).to_hex(),
            funds: authority.total_funds() as i64,
            balances: BTreeMap::new(),
            next_sequences: BTreeMap::new(),
            owners: BTreeMap::new(),
            escrow: BTreeMap::new(),
            settled: Vec::new(),
            pending_locks: Vec::new(),
        };
        for shard in &authority.shards {
            for (id, account) in &shard.accounts {
                let name = id.to_string();
                state.balances.insert(name.clone(), account.balance);
                state.next_sequences.insert(name.clone(), account.next_sequence);
                state
                    .owners
                    .insert(name.clone(), account.owner.map(|key| hex::encode(key.0)));
                if let Some(pending) = &account.pending {
                    if let (RequestKind::Lock, Operation::LockInto { swid, .. }) =
                        (pending.kind, &pending.operation)
                    {
                        state.pending_locks.push(PendingLock {
                            account: name,
                            sequence: pending.sequence,
                            swid: swid.to_string(),
                        });
                    }
                }
            }
            for (id, auction) in &shard.auctions {
                *state.escrow.entry(id.to_string()).or_default() += auction.escrow_total() as i64;
            }
            for (id, bids) in &shard.orphan_escrow {
                let held: u64 = bids.values().map(|b| b.deposit).sum();
                *state.escrow.entry(id.to_string()).or_default() += held as i64;
            }
            for (id, tombstone) in &shard.tombstones {
                if matches!(tombstone, crate::authority::Tombstone::AuctionSettled(_)) {
                    state.settled.push(id.to_string());
                }
            }
        }
        state.settled.sort();
        state
    }

    fn finish(mut self, end_time: u64, synced: bool) -> RunOutput {
        let finals: Vec<FinalState> = self
            .authorities
            .iter()
            .map(|authority| self.final_state(authority))
            .collect();
        let mut bids = Vec::new();
        {
            let board = self.board.borrow();
            for auction in &self.scenario.auctions {
                let Some(id) = board.auctions.get(&auction.name).and_then(|p| p.auction.clone())
                else {
                    continue;
                };
                for bid in &auction.bids {
                    let i = self.scenario.account_index(&bid.bidder).expect("validated");
                    bids.push(BidTruth {
                        auction: id.to_string(),
                        bidder: account_id(i).to_string(),
                        value: bid.value,
                    });
                }
            }
        }
        let meta = RunMeta {
            scenario: self.scenario.name.clone(),
            seed: self.seed,
            n: self.scenario.committee.n,
            f: self.scenario.f(),
            faults: self.faults.clone(),
            clients: self.clients.iter().map(|c| c.meta.clone()).collect(),
            genesis_funds: self.genesis_funds,
            end_time,
            events: self.events,
            budget_exceeded: self.budget_exceeded.take(),
            synced,
            finals,
            bids,
        };
        let snapshots = self.authorities.iter().map(Authority::snapshot).collect();
        let outcomes = self
            .clients
            .iter()
            .zip(self.outcomes)
            .map(|(slot, outcome)| (slot.meta.clone(), outcome.expect("recorded")))
            .collect();
        RunOutput {
            trace: self.trace,
            meta,
            snapshots,
            outcomes,
            certified: self.certified,
        }
    }
}

/// Funds an effect moves between balances, escrow and burned totals.
fn carried_funds(request: &CrossShardRequest) -> i64 {
    match &request.effect {
        Effect::Credit { amount, .. } => *amount as i64,
        Effect::EscrowBid { submission } => sealed_bid(submission).map_or(0, |bid| bid.deposit as i64),
        _ => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWAP: &str = r#"
        version = 1
        name = "swap"

        [[accounts]]
        name = "alice"
        balance = 100

        [[accounts]]
        name = "bob"
        balance = 50

        [[swaps]]
        name = "s"
        first = "alice"
        second = "bob"
    "#;

    #[test]
    fn honest_swap_completes() {
        let scenario = Scenario::from_toml(SWAP).unwrap();
        let output = Simulation::new(&scenario, 7).unwrap().run();
        for (meta, outcome) in &output.outcomes {
            assert!(outcome.ok, "{}: {}", meta.name, outcome.summary);
        }
        assert!(output.meta.budget_exceeded.is_none());
        let digests: BTreeSet<_> = output.meta.finals.iter().map(|s| &s.consistency).collect();
        assert_eq!(digests.len(), 1);
    }

    #[test]
    fn runs_are_deterministic() {
        let scenario = Scenario::from_toml(SWAP).unwrap();
        let a = Simulation::new(&scenario, 3).unwrap().run();
        let b = Simulation::new(&scenario, 3).unwrap().run();
        assert_eq!(a.trace.trace_bytes(), b.trace.trace_bytes());
        assert_eq!(a.meta, b.meta);
    }
}
