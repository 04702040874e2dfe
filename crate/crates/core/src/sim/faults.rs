//! Faulty authorities.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::auction::EndOfBidding;
use crate::authority::Authority;
use crate::protocol::{ClientMessage, Response};
use crate::types::{Commit, PreCommit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AuthorityFault {
    /// Stops at `at` and never comes back.
    Crash { at: u64 },
    /// Processes every message but drops each answer with this probability.
    WithholdVotes { probability: f64 },
    /// Runs the protocol but, whenever it would refuse, signs whatever it
    /// was asked to sign. It can only sign with its own key.
    ArbitrarySigner,
}

impl AuthorityFault {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            AuthorityFault::WithholdVotes { probability } if !(0.0..=1.0).contains(probability) => {
                Err(format!("withhold probability {probability} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }

    pub fn crashed_at(&self, now: u64) -> bool {
        matches!(self, AuthorityFault::Crash { at } if now >= *at)
    }

    /// Rewrites the honest answer. `None` means no answer is sent.
    pub fn tamper(
        &self,
        authority: &Authority,
        rng: &mut ChaCha8Rng,
        message: &ClientMessage,
        honest: Response,
    ) -> Option<Response> {
        match self {
            AuthorityFault::Crash { .. } => Some(honest),
            AuthorityFault::WithholdVotes { probability } => {
                (!rng.gen_bool(*probability)).then_some(honest)
            }
            AuthorityFault::ArbitrarySigner => match honest {
                Response::Error { .. } => Some(forge(authority, message).unwrap_or(honest)),
                other => Some(other),
            },
        }
    }
}

/// A vote on exactly what the message asks the authority to vote on.
fn forge(authority: &Authority, message: &ClientMessage) -> Option<Response> {
    let vote = match message {
        ClientMessage::Request { request, .. } => authority.sign(&request.value),
        ClientMessage::Proposal { proposal, .. } => authority.sign(&PreCommit {
            proposal: proposal.value.clone(),
        }),
        ClientMessage::PreCommit { cert } => authority.sign(&Commit {
            proposal: cert.value.proposal.clone(),
        }),
        ClientMessage::EndOfBidding { request } => authority.sign(&EndOfBidding::new(
            request.value.auction.clone(),
            request.value.bids.clone(),
        )),
        ClientMessage::EndOfAuction { request, .. } => authority.sign(&request.value),
        _ => return None,
    };
    Some(Response::Vote { vote })
}
