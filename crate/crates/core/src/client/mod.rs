//! Client drivers: owners, brokers, sellers and bidders.
//!
//! Drivers are `async` functions over a [`ClientContext`]. They never touch
//! authority state directly: every interaction goes through messages that
//! the hosting simulator delivers, and every wait is bounded by logical time.
//! The futures are polled with a no-op waker; the host re-polls a driver
//! whenever one of its responses arrives or one of its timers fires.

pub mod assets;
pub mod auction;
pub mod swap;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::committee::{aggregate_certificate, AuthorityIndex, Certificate, Committee, Signable};
use crate::crypto::KeyPair;
use crate::error::ProtocolError;
use crate::ids::AccountId;
use crate::protocol::{AccountInfo, ClientMessage, Response};
use crate::swap::RoundSchedule;
use crate::tpke::EncryptionKey;
use crate::types::{Operation, Request, RequestCertificate, SequenceNumber};

pub use self::swap::Board;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientConfig {
    /// How long to wait for a quorum before re-sending to the authorities
    /// that have not answered favourably.
    pub retry_after: u64,
    pub max_attempts: u32,
    /// Pause between consensus rounds and while waiting for off-chain
    /// partners.
    pub delta: u64,
    /// Rounds a leader tries before giving up.
    pub round_budget: u32,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            retry_after: 120,
            max_attempts: 8,
            delta: 160,
            round_budget: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("no quorum for {what} ({detail})")]
    QuorumNotReached { what: &'static str, detail: String },
    #[error("{what} rejected: {error}")]
    Rejected {
        what: &'static str,
        error: ProtocolError,
    },
    #[error("stalled: {0}")]
    Stalled(String),
    #[error("{0}")]
    Protocol(String),
}

pub type RequestId = u64;

#[derive(Debug, Clone)]
pub struct Outgoing {
    pub request: RequestId,
    pub to: AuthorityIndex,
    pub message: Rc<ClientMessage>,
}

/// Everything a driver exchanges with its host.
#[derive(Debug, Default)]
pub struct Mailbox {
    now: u64,
    next_request: RequestId,
    outbox: Vec<Outgoing>,
    responses: BTreeMap<RequestId, Vec<(AuthorityIndex, Response)>>,
    wakeups: BTreeSet<u64>,
    notes: Vec<String>,
}

/// A driver's handle on the world. Cheap to clone.
#[derive(Clone)]
pub struct ClientContext {
    pub actor: u32,
    pub committee: Committee,
    pub config: ClientConfig,
    pub schedule: RoundSchedule,
    pub encryption: EncryptionKey,
    pub board: Rc<RefCell<Board>>,
    mailbox: Rc<RefCell<Mailbox>>,
    rng: Rc<RefCell<ChaCha8Rng>>,
}

impl ClientContext {
    pub fn new(
        actor: u32,
        committee: Committee,
        config: ClientConfig,
        schedule: RoundSchedule,
        encryption: EncryptionKey,
        board: Rc<RefCell<Board>>,
        seed: u64,
    ) -> Self {
        Self {
            actor,
            committee,
            config,
            schedule,
            encryption,
            board,
            mailbox: Rc::new(RefCell::new(Mailbox::default())),
            rng: Rc::new(RefCell::new(ChaCha8Rng::seed_from_u64(seed))),
        }
    }

    // Host side.

    pub fn set_now(&self, now: u64) {
        self.mailbox.borrow_mut().now = now;
    }

    pub fn deliver(&self, request: RequestId, from: AuthorityIndex, response: Response) {
        self.mailbox
            .borrow_mut()
            .responses
            .entry(request)
            .or_default()
            .push((from, response));
    }

    pub fn take_outbox(&self) -> Vec<Outgoing> {
        std::mem::take(&mut self.mailbox.borrow_mut().outbox)
    }

    pub fn take_wakeups(&self) -> Vec<u64> {
        std::mem::take(&mut self.mailbox.borrow_mut().wakeups)
            .into_iter()
            .collect()
    }

    pub fn take_notes(&self) -> Vec<String> {
        std::mem::take(&mut self.mailbox.borrow_mut().notes)
    }

    // Driver side.

    pub fn now(&self) -> u64 {
        self.mailbox.borrow().now
    }

    pub fn note(&self, note: impl Into<String>) {
        self.mailbox.borrow_mut().notes.push(note.into());
    }

    pub fn with_rng<T>(&self, f: impl FnOnce(&mut ChaCha8Rng) -> T) -> T {
        f(&mut self.rng.borrow_mut())
    }

    pub fn fresh_key(&self) -> KeyPair {
        self.with_rng(KeyPair::generate)
    }

    fn new_request(&self) -> RequestId {
        let mut mailbox = self.mailbox.borrow_mut();
        mailbox.next_request += 1;
        mailbox.next_request
    }

    pub fn send(&self, request: RequestId, to: AuthorityIndex, message: Rc<ClientMessage>) {
        self.mailbox.borrow_mut().outbox.push(Outgoing {
            request,
            to,
            message,
        });
    }

    fn response_count(&self, request: RequestId) -> usize {
        self.mailbox
            .borrow()
            .responses
            .get(&request)
            .map_or(0, Vec::len)
    }

    fn responses_since(&self, request: RequestId, seen: usize) -> Vec<(AuthorityIndex, Response)> {
        self.mailbox
            .borrow()
            .responses
            .get(&request)
            .map(|all| all[seen.min(all.len())..].to_vec())
            .unwrap_or_default()
    }

    /// Resolves to `true` as soon as `condition` holds, or to `false` at
    /// `deadline`.
    pub fn wait_until<F: FnMut() -> bool>(&self, deadline: u64, condition: F) -> WaitUntil<'_, F> {
        WaitUntil {
            context: self,
            deadline,
            condition,
            armed: false,
        }
    }

    pub async fn sleep(&self, duration: u64) {
        let deadline = self.now() + duration;
        self.wait_until(deadline, || false).await;
    }

    /// Broadcasts `message` and collects one accepted answer from each of
    /// `need` distinct authorities. Authorities that have not answered
    /// favourably are sent the message again every `retry_after`.
    pub async fn gather<T>(
        &self,
        what: &'static str,
        message: ClientMessage,
        need: usize,
        accept: impl FnMut(AuthorityIndex, &Response) -> Option<T>,
    ) -> Result<Vec<(AuthorityIndex, T)>, ClientError> {
        let everyone: Vec<AuthorityIndex> = self.committee.indices().collect();
        self.gather_among(&everyone, what, message, need, accept).await
    }

    /// [`gather`](Self::gather) restricted to `targets`.
    pub async fn gather_among<T>(
        &self,
        targets: &[AuthorityIndex],
        what: &'static str,
        message: ClientMessage,
        need: usize,
        mut accept: impl FnMut(AuthorityIndex, &Response) -> Option<T>,
    ) -> Result<Vec<(AuthorityIndex, T)>, ClientError> {
        let message = Rc::new(message);
        let request = self.new_request();
        let n = targets.len();
        let mut accepted: BTreeMap<AuthorityIndex, T> = BTreeMap::new();
        let mut errors: BTreeMap<AuthorityIndex, ProtocolError> = BTreeMap::new();
        let mut seen = 0;
        for _ in 0..self.config.max_attempts.max(1) {
            for &index in targets {
                if !accepted.contains_key(&index) {
                    self.send(request, index, message.clone());
                }
            }
            let deadline = self.now() + self.config.retry_after;
            loop {
                for (from, response) in self.responses_since(request, seen) {
                    seen += 1;
                    if accepted.contains_key(&from) {
                        continue;
                    }
                    if let Some(value) = accept(from, &response) {
                        errors.remove(&from);
                        accepted.insert(from, value);
                    } else if let Some(error) = response.error() {
                        errors.insert(from, error.clone());
                    }
                }
                if accepted.len() >= need {
                    return Ok(accepted.into_iter().collect());
                }
                let permanent: Vec<&ProtocolError> =
                    errors.values().filter(|e| !is_transient(e)).collect();
                if permanent.len() > n.saturating_sub(need) {
                    return Err(ClientError::Rejected {
                        what,
                        error: most_common(&permanent),
                    });
                }
                let arrived = self.wait_until(deadline, || self.response_count(request) > seen);
                if !arrived.await {
                    break;
                }
            }
        }
        let detail = if errors.is_empty() {
            format!("{} of {need} answers", accepted.len())
        } else {
            let listed: Vec<String> = errors.iter().map(|(a, e)| format!("{a}: {e}")).collect();
            listed.join("; ")
        };
        Err(ClientError::QuorumNotReached { what, detail })
    }

    /// Collects a quorum of valid votes on `value` and aggregates them.
    pub async fn certify<T: Signable + Clone>(
        &self,
        what: &'static str,
        message: ClientMessage,
        value: &T,
    ) -> Result<Certificate<T>, ClientError> {
        let committee = self.committee.clone();
        let digest = value.signing_digest();
        let votes = self
            .gather(what, message, committee.quorum(), |from, response| {
                response
                    .vote()
                    .filter(|vote| vote.signer == from && vote.verify_digest(&committee, &digest))
            })
            .await?;
        aggregate_certificate(&committee, value, votes.into_iter().map(|(_, vote)| vote))
            .map_err(|e| ClientError::Protocol(e.to_string()))
    }

    /// Sends a certified message until a quorum has processed it.
    pub async fn acknowledge(&self, what: &'static str, message: ClientMessage) -> Result<(), ClientError> {
        self.gather(what, message, self.committee.quorum(), |_, response| {
            matches!(response, Response::Done { .. }).then_some(())
        })
        .await
        .map(|_| ())
    }

    /// Account state as reported by a quorum, taking the most advanced
    /// answer.
    pub async fn account_info(&self, id: &AccountId) -> Result<AccountInfo, ClientError> {
        let infos = self
            .gather(
                "account query",
                ClientMessage::QueryAccount { id: id.clone() },
                self.committee.quorum(),
                |_, response| match response {
                    Response::Account { info } => Some(info.clone()),
                    _ => None,
                },
            )
            .await?;
        Ok(infos
            .into_iter()
            .map(|(_, info)| info)
            .max_by_key(|info| info.next_sequence)
            .expect("quorum is non-empty"))
    }

    /// Obtains a certificate for `operation` on `id` at `sequence`.
    pub async fn certify_request(
        &self,
        key: &KeyPair,
        id: &AccountId,
        sequence: SequenceNumber,
        operation: Operation,
        evidence: Option<crate::assets::SpendEvidence>,
    ) -> Result<RequestCertificate, ClientError> {
        let request = Request::new(id.clone(), sequence, operation);
        let auth = crate::committee::Authenticated::new(request.clone(), key);
        self.certify(
            "request",
            ClientMessage::Request {
                request: auth,
                evidence,
            },
            &request,
        )
        .await
    }

    /// Certifies and confirms an `Execute` request. Returns the certificate
    /// and the responses to the confirmation.
    pub async fn execute(
        &self,
        key: &KeyPair,
        id: &AccountId,
        sequence: SequenceNumber,
        operation: Operation,
        evidence: Option<crate::assets::SpendEvidence>,
    ) -> Result<(RequestCertificate, Vec<(AuthorityIndex, Response)>), ClientError> {
        let cert = self
            .certify_request(key, id, sequence, operation, evidence)
            .await?;
        let responses = self.confirm(&cert).await?;
        Ok((cert, responses))
    }

    pub async fn confirm(
        &self,
        cert: &RequestCertificate,
    ) -> Result<Vec<(AuthorityIndex, Response)>, ClientError> {
        self.gather(
            "confirmation",
            ClientMessage::Confirmation { cert: cert.clone() },
            self.committee.quorum(),
            |_, response| matches!(response, Response::Done { .. }).then(|| response.clone()),
        )
        .await
    }

    /// Sends a transfer from `id` at its current sequence number.
    pub async fn transfer(
        &self,
        key: &KeyPair,
        id: &AccountId,
        recipient: &AccountId,
        amount: u64,
    ) -> Result<RequestCertificate, ClientError> {
        let info = self.account_info(id).await?;
        let (cert, _) = self
            .execute(
                key,
                id,
                info.next_sequence,
                Operation::Transfer {
                    recipient: recipient.clone(),
                    amount,
                },
                None,
            )
            .await?;
        Ok(cert)
    }
}

/// See [`ClientContext::wait_until`].
pub struct WaitUntil<'a, F> {
    context: &'a ClientContext,
    deadline: u64,
    condition: F,
    armed: bool,
}

impl<F: FnMut() -> bool + Unpin> Future for WaitUntil<'_, F> {
    type Output = bool;

    fn poll(mut self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<bool> {
        if (self.condition)() {
            return Poll::Ready(true);
        }
        if self.context.now() >= self.deadline {
            return Poll::Ready(false);
        }
        if !self.armed {
            self.armed = true;
            let deadline = self.deadline;
            self.context.mailbox.borrow_mut().wakeups.insert(deadline);
        }
        Poll::Pending
    }
}

/// Errors that may clear up on their own: state this authority has not
/// caught up with yet.
pub fn is_transient(error: &ProtocolError) -> bool {
    matches!(
        error,
        ProtocolError::UnknownAccount
            | ProtocolError::UnknownInstance
            | ProtocolError::UnknownAuction
            | ProtocolError::RoundUnavailable { .. }
            | ProtocolError::SequenceMismatch { .. }
            | ProtocolError::MissingLockCertificates
            | ProtocolError::InactiveAccount
            | ProtocolError::AccountBusy
    )
}

fn most_common(errors: &[&ProtocolError]) -> ProtocolError {
    let mut best = errors[0];
    let mut best_count = 0;
    for candidate in errors {
        let count = errors.iter().filter(|e| *e == candidate).count();
        if count > best_count {
            best = candidate;
            best_count = count;
        }
    }
    best.clone()
}

/// How a driver ended, as reported by the host.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientOutcome {
    pub summary: String,
    pub ok: bool,
}

impl ClientOutcome {
    pub fn ok(summary: impl Into<String>) -> Self {
        Self {
            summary: summary.into(),
            ok: true,
        }
    }

    pub fn failed(summary: impl Into<String>) -> Self {
        Self {
            summary: summary.into(),
            ok: false,
        }
    }
}

impl<E: std::fmt::Display> From<Result<String, E>> for ClientOutcome {
    fn from(result: Result<String, E>) -> Self {
        match result {
            Ok(summary) => ClientOutcome::ok(summary),
            Err(error) => ClientOutcome::failed(error.to_string()),
        }
    }
}

/// A payment driver: waits until `at`, then transfers.
pub async fn pay(
    context: ClientContext,
    key: KeyPair,
    from: AccountId,
    to: AccountId,
    amount: u64,
) -> ClientOutcome {
    let result = context.transfer(&key, &from, &to, amount).await;
    result
        .map(|cert| format!("paid {amount} from {from} to {to} at sequence {}", cert.value.sequence))
        .into()
}
