use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::committee::Authenticated;
use crate::swap::{RoundSchedule, SafetyRules};
use crate::testkit::{client_key, TestCommittee};
use crate::types::{Decision, Proposal, Request};

const ALICE: u64 = 1;
const BOB: u64 = 2;

fn fixture() -> (TestCommittee, Authority) {
    let tc = TestCommittee::new(4);
    let system = crate::tpke::setup(4, 2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let genesis = [ALICE, BOB]
        .map(|i| GenesisAccount {
            id: AccountId::root(i),
            owner: Some(client_key(i).public()),
            balance: 50,
        })
        .to_vec();
    let config = AuthorityConfig {
        shard_count: 2,
        swap: SwapConfig {
            schedule: RoundSchedule::default(),
            rules: SafetyRules::ALL,
        },
        genesis,
    };
    let authority = Authority::new(
        AuthorityIndex(0),
        tc.keys[0].clone(),
        tc.committee.clone(),
        system.shares[0].clone(),
        system.verification.clone(),
        config,
    );
    (tc, authority)
}

fn request(owner: u64, sequence: SequenceNumber, operation: Operation) -> Request {
    let kind = if operation.is_locking() {
        RequestKind::Lock
    } else {
        RequestKind::Execute
    };
    Request {
        kind,
        id: AccountId::root(owner),
        sequence,
        operation,
    }
}

fn transfer(sequence: SequenceNumber, amount: u64) -> Request {
    request(
        ALICE,
        sequence,
        Operation::Transfer {
            recipient: AccountId::root(BOB),
            amount,
        },
    )
}

fn account(authority: &Authority, id: u64) -> &AccountState {
    let id = AccountId::root(id);
    &authority.shard(&id).accounts[&id]
}

fn abort_cert(tc: &TestCommittee, round: u64) -> CommitCertificate {
    tc.certify(&Commit {
        proposal: Proposal {
            swid: AccountId::root(ALICE).child(0),
            round,
            decision: Decision::Abort,
        },
    })
}

#[test]
fn transfer_moves_funds_once() {
    let (tc, mut authority) = fixture();
    let cert = tc.certify(&transfer(0, 20));
    let message = ClientMessage::Confirmation { cert };
    let (response, effects) = authority.handle(0, &message);
    assert!(matches!(response, Response::Done { .. }));
    assert_eq!(effects.len(), 1);
    assert_eq!(account(&authority, ALICE).balance, 30);

    // Redelivery neither re-executes nor produces a second credit.
    let (_, again) = authority.handle(0, &message);
    assert!(again.is_empty());
    authority.apply_cross_shard(0, &effects[0]);
    authority.apply_cross_shard(0, &effects[0]);
    assert_eq!(account(&authority, BOB).balance, 70);
    assert_eq!(account(&authority, ALICE).next_sequence, 1);
}

#[test]
fn request_checks_owner_and_pending() {
    let (_, mut authority) = fixture();
    let forged = Authenticated::new(transfer(0, 5), &client_key(BOB));
    assert_eq!(authority.handle_request(&forged, None), Err(ProtocolError::BadAuth));

    let first = Authenticated::new(transfer(0, 5), &client_key(ALICE));
    let vote = authority.handle_request(&first, None).unwrap();
    // The same request gets the same vote back; a different one is refused.
    assert_eq!(authority.handle_request(&first, None).unwrap(), vote);
    let other = Authenticated::new(transfer(0, 6), &client_key(ALICE));
    assert_eq!(authority.handle_request(&other, None), Err(ProtocolError::AccountBusy));
}

#[test]
fn overdraft_refused() {
    let (_, mut authority) = fixture();
    let request = Authenticated::new(transfer(0, 51), &client_key(ALICE));
    assert!(authority.handle_request(&request, None).is_err());
}

#[test]
fn early_unlock_waits_for_sequence() {
    let (tc, mut authority) = fixture();
    let unlock = CrossShardRequest {
        target: AccountId::root(ALICE),
        origin: Digest::of(b"unlock"),
        effect: Effect::Unlock {
            sequence: 1,
            new_owner: None,
            commit: abort_cert(&tc, 0),
        },
    };
    authority.apply_cross_shard(0, &unlock);
    assert_eq!(account(&authority, ALICE).next_sequence, 0);

    let cert = tc.certify(&transfer(0, 1));
    authority.handle(0, &ClientMessage::Confirmation { cert });
    let alice = account(&authority, ALICE);
    assert_eq!(alice.next_sequence, 2);
    assert!(matches!(alice.confirmed.last(), Some(LogEntry::SwapCommit { .. })));
}

#[test]
fn abort_round_not_part_of_consistency_view() {
    let (tc, mut one) = fixture();
    let (_, mut other) = fixture();
    for (authority, round) in [(&mut one, 0), (&mut other, 1)] {
        authority.apply_cross_shard(
            0,
            &CrossShardRequest {
                target: AccountId::root(ALICE),
                origin: Digest::of(b"unlock"),
                effect: Effect::Unlock {
                    sequence: 0,
                    new_owner: None,
                    commit: abort_cert(&tc, round),
                },
            },
        );
    }
    assert_eq!(one.consistency_view(), other.consistency_view());
}
