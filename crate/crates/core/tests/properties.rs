use proptest::prelude::*;

use shardswap_core::algebra::{AlgebraLedger, Balance};
use shardswap_core::auction::{settle, PriceRule, RevealedBid};
use shardswap_core::committee::check_certificate;
use shardswap_core::swap::RoundSchedule;
use shardswap_core::testkit::{client_key, TestCommittee};
use shardswap_core::types::{Operation, Request, RequestKind};
use shardswap_core::{AccountId, Decode, Digest, Encode};

fn account_id() -> impl Strategy<Value = AccountId> {
    (1u64..50, proptest::collection::vec(0u64..5, 0..3)).prop_map(|(root, path)| {
        path.into_iter().fold(AccountId::root(root), |id, n| id.child(n))
    })
}

fn request() -> impl Strategy<Value = Request> {
    let operation = prop_oneof![
        (account_id(), 1u64..1_000).prop_map(|(recipient, amount)| Operation::Transfer { recipient, amount }),
        any::<u64>().prop_map(|seed| Operation::ChangeKey { owner: client_key(seed % 16).public() }),
        proptest::collection::vec(any::<u8>(), 0..40).prop_map(|data| Operation::BindAsset { data }),
        any::<[u8; 32]>().prop_map(|bytes| Operation::Spend { commitment: Digest(bytes) }),
    ];
    (account_id(), any::<u64>(), operation).prop_map(|(id, sequence, operation)| Request {
        kind: RequestKind::Execute,
        id,
        sequence,
        operation,
    })
}

proptest! {
    #[test]
    fn requests_survive_encoding(request in request()) {
        let bytes = request.to_bytes();
        prop_assert_eq!(Request::from_bytes(&bytes).unwrap(), request);
    }

    #[test]
    fn truncated_encoding_rejected(request in request(), cut in any::<prop::sample::Index>()) {
        let bytes = request.to_bytes();
        let cut = cut.index(bytes.len());
        prop_assert!(Request::from_bytes(&bytes[..cut]).is_err());
    }

    #[test]
    fn quorum_certificates_check(request in request(), signers in prop::sample::subsequence(vec![0usize, 1, 2, 3], 0..=4)) {
        let tc = TestCommittee::new(4);
        let cert = tc.certify_by(&request, &signers);
        prop_assert_eq!(check_certificate(&tc.committee, &cert), signers.len() >= 3);
    }

    #[test]
    fn duplicate_votes_do_not_count(request in request()) {
        let tc = TestCommittee::new(4);
        let cert = tc.certify_by(&request, &[0, 1, 1]);
        prop_assert!(!check_certificate(&tc.committee, &cert));
    }

    #[test]
    fn remote_updates_commute(
        start in proptest::collection::vec(0i128..100, 3),
        credits in proptest::collection::vec((0usize..3, 0i64..50), 0..20),
        seed in any::<u64>(),
    ) {
        let ids: Vec<AccountId> = (1..=3).map(AccountId::root).collect();
        let deliver = |order: &[(usize, (usize, i64))]| {
            let mut ledger = AlgebraLedger::new(Balance);
            for (id, state) in ids.iter().zip(&start) {
                ledger.set(id.clone(), *state);
            }
            for (n, (target, amount)) in order {
                let cert = Digest::tagged("credit", &(*n as u64));
                ledger.deliver_remote(cert, &ids[*target], amount);
            }
            ledger.states
        };
        let mut order: Vec<_> = credits.iter().copied().enumerate().collect();
        let forward = deliver(&order);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        // Redelivery of the first credit must not count twice.
        if let Some(first) = order.first().copied() {
            order.push(first);
        }
        prop_assert_eq!(deliver(&order), forward);
    }

    #[test]
    fn winner_pays_at_most_its_bid(
        bids in proptest::collection::vec((1u64..6, 0u64..100, 0u64..120, any::<bool>()), 0..8),
        second in any::<bool>(),
    ) {
        let bids: Vec<RevealedBid> = bids
            .into_iter()
            .enumerate()
            .map(|(i, (bidder, value, deposit, revealed))| RevealedBid {
                bidder: AccountId::root(bidder),
                submission: Digest::tagged("bid", &(i as u64)),
                deposit,
                item_key: client_key(bidder).public(),
                value: revealed.then_some(value),
            })
            .collect();
        let rule = if second { PriceRule::SecondPrice } else { PriceRule::FirstPrice };
        let outcome = settle(rule, &bids);
        match outcome.winner {
            Some(w) => {
                let bid = bids[w].eligible_value().expect("winner is eligible");
                prop_assert!(outcome.price <= bid && outcome.price <= bids[w].deposit);
                prop_assert!(bids.iter().filter_map(RevealedBid::eligible_value).all(|v| v <= bid));
            }
            None => {
                prop_assert_eq!(outcome.price, 0);
                prop_assert!(bids.iter().all(|b| b.eligible_value().is_none()));
            }
        }
    }

    #[test]
    fn rounds_open_in_order(round in 0u64..40) {
        let schedule = RoundSchedule::default();
        let this = schedule.opens_at(round).unwrap();
        let next = schedule.opens_at(round + 1).unwrap();
        prop_assert!(this < next);
        prop_assert_eq!(schedule.highest_available(this), round);
    }
}
