//! Byte-exact vectors for the canonical encoding. The expected bytes live in
//! `tests/fixtures/encoding.txt` and are reproduced in `docs/encoding.md`.
//! Run with `UPDATE_FIXTURES=1` to rewrite the file after a deliberate
//! format change.

use std::path::Path;

use shardswap_core::committee::AuthorityIndex;
use shardswap_core::sim::trace::{Actor, Trace, TraceEvent};
use shardswap_core::testkit::{client_key, derived_key};
use shardswap_core::types::{Commit, Decision, Operation, Proposal, Request, RequestKind, Role};
use shardswap_core::{AccountId, Digest, Encode, Signable, Vote};

fn transfer() -> Request {
    Request {
        kind: RequestKind::Execute,
        id: AccountId::root(1),
        sequence: 0,
        operation: Operation::Transfer {
            recipient: AccountId::root(2).child(5),
            amount: 25,
        },
    }
}

fn vectors() -> Vec<(&'static str, Vec<u8>)> {
    let commit = Commit {
        proposal: Proposal {
            swid: AccountId::root(1).child(0),
            round: 2,
            decision: Decision::Abort,
        },
    };
    let lock = Request {
        kind: RequestKind::Lock,
        id: AccountId::root(3),
        sequence: 7,
        operation: Operation::LockInto {
            swid: AccountId::root(1).child(0),
            role: Role::Second,
            key: client_key(9).public(),
        },
    };
    let vote = Vote::sign(&transfer(), AuthorityIndex(2), &derived_key("authority-key", 2));
    let mut trace = Trace::default();
    trace.push(5, Actor::Authority { index: 1 }, "note", &"hi".to_string());
    vec![
        ("u64 300", 300u64.to_bytes()),
        ("account id 2:5", AccountId::root(2).child(5).to_bytes()),
        ("option none / some(1u8)", (None::<u8>, Some(1u8)).to_bytes()),
        ("transfer request", transfer().to_bytes()),
        ("transfer request signing digest", transfer().signing_digest().0.to_vec()),
        ("lock request", lock.to_bytes()),
        ("commit abort round 2", commit.to_bytes()),
        ("commit signing digest", commit.signing_digest().0.to_vec()),
        ("vote by authority 2 on transfer", vote.to_bytes()),
        (
            "trace event",
            TraceEvent {
                index: 0,
                time: 5,
                actor: Actor::Client { index: 4 },
                kind: "handle/request".into(),
                payload: Digest([0xab; 32]),
            }
            .to_bytes(),
        ),
        ("trace file with one note", trace.trace_bytes()),
        ("payload file with one note", trace.payload_bytes()),
    ]
}

fn render() -> String {
    let mut out = String::new();
    for (name, bytes) in vectors() {
        out += &format!("{name}\n{}\n\n", hex::encode(bytes));
    }
    out
}

#[test]
fn vectors_match_fixture_file() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/encoding.txt");
    let rendered = render();
    if std::env::var_os("UPDATE_FIXTURES").is_some() {
        std::fs::write(&path, &rendered).unwrap();
    }
    let expected = std::fs::read_to_string(&path).expect("fixture file");
    assert_eq!(rendered, expected);
}

#[test]
fn fixture_trace_decodes() {
    let mut trace = Trace::default();
    trace.push(5, Actor::Authority { index: 1 }, "note", &"hi".to_string());
    let back = Trace::from_bytes(&trace.trace_bytes(), &trace.payload_bytes()).unwrap();
    assert_eq!(back, trace);
}
