//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one line; exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shardswap_core::accounts::{CrossShardRequest, Effect};
use shardswap_core::algebra::{
    Balance, CountedMultiset, Either, Holdings, NftFlag, NftMove, Product, StateAlgebra,
};
use shardswap_core::assets::transmute;
use shardswap_core::auction::{settle, EndOfAuction, HeldBid, PriceRule, RevealedBid, SettledAuction};
use shardswap_core::authority::Authority;
use shardswap_core::sim::executor::{account_id, account_key, build_authorities};
use shardswap_core::sim::trace::Record;
use shardswap_core::sim::{model_check_swap, run_scenario, Bounds, RunOutput, RunReport, Scenario};
use shardswap_core::protocol::{ClientMessage, Response};
use shardswap_core::swap::SafetyRules;
use shardswap_core::testkit::client_key;
use shardswap_core::tpke::{self, DecryptionShare, MESSAGE_BOUND};
use shardswap_core::types::{lock_terms, Role};
use shardswap_core::{
    AccountId, Certificate, Committee, Digest, Encode, KeyPair, Signable,
};

type Verdict = Result<String, String>;

fn check(condition: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        Err(message())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:.1?}, limit {limit:?}"))
}

fn scenario(text: &str) -> Scenario {
    Scenario::from_toml(text).expect("valid scenario")
}

fn run(text: &str, seed: u64) -> (RunOutput, RunReport) {
    run_scenario(&scenario(text), seed).expect("runs")
}

fn failed_audits(report: &RunReport) -> Vec<String> {
    report
        .audits
        .iter()
        .filter(|a| !a.passed)
        .map(|a| format!("{}: {:?}", a.name, a.violations.first()))
        .collect()
}

// 1 ---------------------------------------------------------------------

fn fuzz_scenario(index: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf1f0 + index);
    let behavior = |rng: &mut ChaCha8Rng, flip: f64| {
        if rng.gen_bool(flip) {
            "flip-flop"
        } else if rng.gen_bool(0.15) {
            "equivocator"
        } else {
            "honest"
        }
    };
    let mut text = format!(
        "version = 1\nname = \"fuzz-{index}\"\n\n\
         [consensus]\nescalation_round = {}\nparity_leaders = {}\n\n\
         [run]\ntime_budget = 60000\n\n\
         [network]\ngst = {}\nmax_delay = {}\ndrop = {:.2}\nduplicate = {:.2}\n\n",
        rng.gen_range(1..8),
        rng.gen_bool(0.5),
        rng.gen_range(0..8000),
        rng.gen_range(40..600),
        rng.gen_range(0.0..0.3),
        rng.gen_range(0.0..0.3),
    );
    let authority = rng.gen_range(0..4);
    match rng.gen_range(0..4) {
        0 => {}
        1 => text += &format!("[[faults]]\nauthority = {authority}\nkind = \"crash\"\nat = {}\n\n", rng.gen_range(0..3000)),
        2 => text += &format!(
            "[[faults]]\nauthority = {authority}\nkind = \"withhold-votes\"\nprobability = {:.2}\n\n",
            rng.gen_range(0.0..1.0)
        ),
        _ => text += &format!("[[faults]]\nauthority = {authority}\nkind = \"arbitrary-signer\"\n\n"),
    }
    let swaps = rng.gen_range(1..=2);
    for s in 0..swaps {
        text += &format!("[[accounts]]\nname = \"a{s}\"\nbalance = 10\n\n[[accounts]]\nname = \"b{s}\"\nbalance = 10\n\n");
    }
    for s in 0..swaps {
        let first = behavior(&mut rng, 0.6);
        let second = behavior(&mut rng, 0.4);
        text += &format!(
            "[[swaps]]\nname = \"s{s}\"\nfirst = \"a{s}\"\nsecond = \"b{s}\"\nfirst_behavior = \"{first}\"\n\
             second_behavior = \"{second}\"\nstart = {}\npatience = {}\n\n",
            rng.gen_range(0..500),
            rng.gen_range(500..4000),
        );
    }
    text
}

fn agreement_fuzz() -> Verdict {
    const RUNS: u64 = 200;
    let start = Instant::now();
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get()).min(8) as u64;
    let results: Vec<(u64, usize, Vec<String>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                scope.spawn(move || {
                    (t..RUNS)
                        .step_by(threads as usize)
                        .map(|i| {
                            let (output, report) = run(&fuzz_scenario(i), i);
                            (i, decided_instances(&output), failed_audits(&report))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("no panic")).collect()
    });
    let elapsed = start.elapsed();
    let violations: Vec<_> = results
        .iter()
        .filter(|(_, _, failed)| failed.iter().any(|f| f.starts_with("agreement") || f.starts_with("double-sign")))
        .collect();
    check(violations.is_empty(), || format!("violations: {:?}", violations.first()))?;
    let other: Vec<_> = results.iter().filter(|(_, _, failed)| !failed.is_empty()).collect();
    check(other.is_empty(), || format!("other audit failures: {:?}", other.first()))?;
    within(elapsed, Duration::from_secs(60))?;
    let decided: usize = results.iter().map(|(_, d, _)| d).sum();
    Ok(format!(
        "{RUNS} schedules, {decided} instances decided, 0 conflicting commit pairs, {elapsed:.1?}"
    ))
}

/// Instances with at least one valid commit certificate in the trace.
fn decided_instances(output: &RunOutput) -> usize {
    let mut decided = BTreeSet::new();
    for (_, record) in output.trace.records() {
        if let Record::Handled(handled) = record {
            if let ClientMessage::Commit { cert, .. } = &handled.message {
                decided.insert(cert.value.proposal.swid.clone());
            }
        }
    }
    decided.len()
}

// 2 ---------------------------------------------------------------------

fn bounded_model_check() -> Verdict {
    let start = Instant::now();
    let bounds = Bounds {
        max_round: 2,
        ..Bounds::default()
    };
    let safe = model_check_swap(SafetyRules::ALL, bounds).map_err(|e| e.to_string())?;
    check(safe.safe(), || format!("violation with all rules: {:?}", safe.counterexample))?;
    let mut ablations = Vec::new();
    for rule in ['a', 'b', 'c', 'd'] {
        let report = model_check_swap(SafetyRules::without(rule), bounds).map_err(|e| e.to_string())?;
        let steps = report
            .counterexample
            .ok_or_else(|| format!("no violation found without rule ({rule})"))?;
        ablations.push(format!("({rule}) {} steps", steps.len()));
    }
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "{} states safe; ablations: {}; {:.1?}",
        safe.states,
        ablations.join(", "),
        start.elapsed()
    ))
}

// 3 ---------------------------------------------------------------------

const CONFIRM_SWAP: &str = r#"
    version = 1
    name = "confirm"
    [[accounts]]
    name = "alice"
    balance = 70
    [[accounts]]
    name = "bob"
    balance = 30
    [[accounts]]
    name = "broker"
    [[swaps]]
    name = "swap"
    first = "alice"
    second = "bob"
    broker = "broker"
"#;

const LATE_LOCK_SWAP: &str = r#"
    version = 1
    name = "late-lock"
    [[accounts]]
    name = "alice"
    balance = 70
    [[accounts]]
    name = "bob"
    balance = 30
    [[accounts]]
    name = "broker"
    [[swaps]]
    name = "swap"
    first = "alice"
    second = "bob"
    broker = "broker"
    second_behavior = "late-lock"
    patience = 1500
"#;

/// Lock certificates attached to commit messages, by role.
fn lock_keys(output: &RunOutput) -> BTreeMap<Role, (AccountId, String)> {
    let mut keys = BTreeMap::new();
    for (_, record) in output.trace.records() {
        if let Record::Handled(handled) = record {
            if let ClientMessage::Commit { locks, .. } = &handled.message {
                for lock in locks.iter().flatten() {
                    let terms = lock_terms(lock).expect("lock certificate");
                    keys.insert(terms.role, (terms.id.clone(), hex::encode(terms.key.0)));
                }
            }
        }
    }
    keys
}

fn swap_end_to_end() -> Verdict {
    let alice = account_id(0).to_string();
    let bob = account_id(1).to_string();
    let genesis_owner = |i| Some(hex::encode(account_key(i).public().0));

    let (confirm, report) = run(CONFIRM_SWAP, 1);
    check(report.audits_passed(), || format!("confirm audits: {:?}", failed_audits(&report)))?;
    let keys = lock_keys(&confirm);
    let key_for = |role| keys.get(&role).map(|(_, key)| Some(key.clone()));
    check(keys.len() == 2, || format!("confirm path saw locks {keys:?}"))?;
    for snapshot in &confirm.snapshots {
        let a = &snapshot.accounts[&alice];
        let b = &snapshot.accounts[&bob];
        let which = snapshot.authority;
        check(Some(a.owner.clone()) == key_for(Role::Second), || {
            format!("authority {which}: alice owner is not bob's handover key")
        })?;
        check(Some(b.owner.clone()) == key_for(Role::First), || {
            format!("authority {which}: bob owner is not alice's handover key")
        })?;
        check(a.owner != genesis_owner(0) && b.owner != genesis_owner(1), || {
            format!("authority {which}: owners unchanged")
        })?;
        check(a.next_sequence == 1 && b.next_sequence == 1, || {
            format!("authority {which}: sequences {} and {}", a.next_sequence, b.next_sequence)
        })?;
        check((a.balance, b.balance) == (70, 30) && a.pending.is_none() && b.pending.is_none(), || {
            format!("authority {which}: balances or locks changed")
        })?;
    }

    let (abort, report) = run(LATE_LOCK_SWAP, 2);
    check(report.audits_passed(), || format!("abort audits: {:?}", failed_audits(&report)))?;
    let late = lock_keys(&abort);
    check(late.contains_key(&Role::Second), || "late lock never attached to a commit".into())?;
    for snapshot in &abort.snapshots {
        let which = snapshot.authority;
        check(snapshot.swaps.is_empty() && !snapshot.tombstones.is_empty(), || {
            format!("authority {which}: instance not deleted")
        })?;
        for (name, index, balance) in [(&alice, 0, 70), (&bob, 1, 30)] {
            let account = &snapshot.accounts[name];
            check(account.owner == genesis_owner(index), || format!("authority {which}: {name} owner changed"))?;
            check(account.balance == balance, || format!("authority {which}: {name} balance changed"))?;
            check(account.pending.is_none(), || format!("authority {which}: {name} still locked"))?;
            check(account.next_sequence == 1, || {
                format!("authority {which}: {name} at sequence {}", account.next_sequence)
            })?;
        }
    }
    Ok(format!(
        "confirm: owners exchanged, sequences 0->1 on {} snapshots; abort with late unlock restored both",
        confirm.snapshots.len()
    ))
}

// 4 ---------------------------------------------------------------------

const MIXED: &str = r#"
    version = 1
    name = "mixed"
    [network]
    gst = 3000
    max_delay = 300
    drop = 0.1
    duplicate = 0.1
    [[accounts]]
    name = "alice"
    balance = 100
    [[accounts]]
    name = "bob"
    balance = 100
    [[accounts]]
    name = "carol"
    balance = 100
    [[accounts]]
    name = "dave"
    balance = 100
    [[accounts]]
    name = "erin"
    balance = 100
    [[accounts]]
    name = "frank"
    balance = 100
    [[accounts]]
    name = "gina"
    balance = 100
    [[accounts]]
    name = "item"
    [[accounts]]
    name = "proceeds"
    [[accounts]]
    name = "left"
    [[accounts]]
    name = "right"
    [[swaps]]
    name = "confirmed"
    first = "alice"
    second = "bob"
    [[swaps]]
    name = "aborted"
    first = "carol"
    second = "dave"
    second_behavior = "late-lock"
    patience = 1500
    [[payments]]
    from = "erin"
    to = "carol"
    amount = 15
    at = 6000
    [[payments]]
    from = "frank"
    to = "bob"
    amount = 20
    at = 6000
    [[auctions]]
    name = "lot"
    item = "item"
    proceeds = "proceeds"
    rule = "second-price"
    start = 9000
    [[auctions.bids]]
    bidder = "gina"
    value = 40
    deposit = 50
    [[auctions.bids]]
    bidder = "erin"
    value = 55
    deposit = 60
    [[transmutations]]
    name = "merge"
    function = "concat"
    [[transmutations.inputs]]
    account = "left"
    data = "ab"
    [[transmutations.inputs]]
    account = "right"
    data = "cd"
"#;

/// Delivers `messages` to `authority` in a random order, interleaving the
/// resulting effects at random, until a full pass changes nothing.
fn replay(authority: &mut Authority, messages: &[ClientMessage], rng: &mut ChaCha8Rng) -> Vec<u8> {
    let fingerprint = |a: &Authority| serde_json::to_vec(&a.snapshot()).expect("serializable");
    for _ in 0..64 {
        let before = fingerprint(authority);
        let mut order: Vec<&ClientMessage> = messages.iter().collect();
        order.shuffle(rng);
        let mut effects: Vec<CrossShardRequest> = Vec::new();
        while !order.is_empty() || !effects.is_empty() {
            let pick_effect = !effects.is_empty() && (order.is_empty() || rng.gen_bool(0.5));
            if pick_effect {
                let i = rng.gen_range(0..effects.len());
                let effect = effects.swap_remove(i);
                effects.extend(authority.apply_cross_shard(0, &effect));
            } else {
                let message = order.pop().expect("non-empty");
                effects.extend(authority.handle(0, message).1);
            }
        }
        if fingerprint(authority) == before {
            return authority.consistency_view();
        }
    }
    panic!("replay did not settle");
}

fn eventual_consistency() -> Verdict {
    let scenario = scenario(MIXED);
    let (output, report) = run_scenario(&scenario, 4).map_err(|e| e.to_string())?;
    check(report.audits_passed(), || format!("audits: {:?}", failed_audits(&report)))?;
    let failed: Vec<_> = output.outcomes.iter().filter(|(_, o)| !o.ok).collect();
    check(failed.is_empty(), || format!("clients failed: {failed:?}"))?;
    let messages = &output.certified;
    let mut views = BTreeSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..20 {
        let (_, _, mut authorities) = build_authorities(&scenario, 4).map_err(|e| e.to_string())?;
        for authority in &mut authorities {
            views.insert(replay(authority, messages, &mut rng));
        }
    }
    check(views.len() == 1, || format!("{} distinct account states", views.len()))?;
    let view = views.into_iter().next().expect("one view");
    let live: BTreeSet<&str> = output.meta.live_honest().map(|s| s.consistency.as_str()).collect();
    let replayed = Digest::of(&view).to_hex();
    check(live.len() == 1 && live.contains(replayed.as_str()), || {
        "replayed state differs from the simulated authorities".into()
    })?;
    Ok(format!(
        "{} certificates x 20 orders x {} authorities: one account state",
        messages.len(),
        scenario.committee.n
    ))
}

// 5 ---------------------------------------------------------------------

fn shipped_scenarios() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .expect("scenarios directory")
        .map(|entry| entry.expect("entry").path())
        .filter(|path| path.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    paths
}

fn conservation() -> Verdict {
    let paths = shipped_scenarios();
    check(!paths.is_empty(), || "no shipped scenarios".into())?;
    let mut checkpoints = 0;
    for path in &paths {
        let scenario = Scenario::load(path).map_err(|e| e.to_string())?;
        let (output, report) = run_scenario(&scenario, scenario.seed).map_err(|e| e.to_string())?;
        let audit = report.audit("conservation").expect("audit present");
        check(audit.passed, || format!("{}: {:?}", path.display(), audit.violations.first()))?;
        let genesis: i64 = scenario.accounts.iter().map(|a| a.balance).sum();
        for (_, record) in output.trace.records() {
            if let Record::Checkpoint(c) = record {
                checkpoints += 1;
                check(c.funds + c.in_flight == genesis, || {
                    format!("{}: authority {} holds {}", path.display(), c.authority, c.funds + c.in_flight)
                })?;
            }
        }
        for state in &output.meta.finals {
            let total: i64 = state.balances.values().sum::<i64>() + state.escrow.values().sum::<i64>();
            let burned = state.funds - total;
            check(total + burned == genesis && burned >= 0, || {
                format!("{}: authority {} ends with {}", path.display(), state.authority, total)
            })?;
        }
    }
    Ok(format!("{} scenarios, {checkpoints} checkpoints, totals exact", paths.len()))
}

// 6 ---------------------------------------------------------------------

fn asset_replay() -> Verdict {
    let (output, report) = run(MIXED, 6);
    check(report.audits_passed(), || format!("audits: {:?}", failed_audits(&report)))?;
    let keys: Vec<KeyPair> = (0..4).map(shardswap_core::sim::executor::authority_key).collect();
    let committee = Committee::new(keys.iter().map(KeyPair::public).collect()).expect("committee");
    let mut outputs: BTreeMap<Digest, Vec<u8>> = BTreeMap::new();
    let mut handled = 0;
    for (_, record) in output.trace.records() {
        let Record::Handled(record) = record else { continue };
        let ClientMessage::Transmute { request } = &record.message else { continue };
        handled += 1;
        let first = transmute(&committee, request).map_err(|e| e.to_string())?;
        let second = transmute(&committee, request).map_err(|e| e.to_string())?;
        let bytes = first.to_bytes();
        check(bytes == second.to_bytes(), || "re-evaluation differs".into())?;
        let key = Digest::tagged("request", request);
        if let Some(previous) = outputs.insert(key, bytes.clone()) {
            check(previous == bytes, || "two authorities evaluated differently".into())?;
        }
        let voted: Vec<Digest> = match &record.response {
            Response::Votes { votes } => votes.iter().map(|v| v.digest).collect(),
            other => return Err(format!("transmute answered with {}", other.kind())),
        };
        let expected: Vec<Digest> = first.iter().map(Signable::signing_digest).collect();
        check(voted == expected, || "votes do not match the replayed outputs".into())?;
        check(first.iter().any(|b| b.data == b"abcd"), || format!("unexpected outputs {first:?}"))?;
    }
    check(handled >= 6, || format!("only {handled} transmute requests handled"))?;
    Ok(format!("{handled} certified transmutations replayed, outputs byte-identical"))
}

// 7 ---------------------------------------------------------------------

fn axioms<A>(name: &str, algebra: A, state: BoxedStrategy<A::State>, update: BoxedStrategy<A::Update>) -> Result<(), String>
where
    A: StateAlgebra,
    A::State: 'static,
    A::Update: 'static,
{
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&(state.clone(), update.clone(), update.clone()), |(s, u1, u2)| {
            let one = algebra.apply(&algebra.apply(&s, &u1), &u2);
            let other = algebra.apply(&algebra.apply(&s, &u2), &u1);
            prop_assert_eq!(one, other, "updates do not commute");
            Ok(())
        })
        .map_err(|e| format!("{name} axiom 1: {e}"))?;
    runner
        .run(&(state, update), |(s, u)| {
            if algebra.is_valid(&s) && algebra.is_safe(&u) {
                if !algebra.is_valid(&algebra.apply(&s, &u)) {
                    return Err(TestCaseError::fail("safe update broke a valid state"));
                }
            }
            Ok(())
        })
        .map_err(|e| format!("{name} axiom 2: {e}"))
}

fn balance_state() -> BoxedStrategy<i128> {
    prop_oneof![-1000i128..1000, any::<i64>().prop_map(i128::from), Just(0)].boxed()
}

fn balance_update() -> BoxedStrategy<i64> {
    prop_oneof![-1000i64..1000, any::<i64>()].boxed()
}

fn nft_state() -> BoxedStrategy<i64> {
    (-2i64..3).boxed()
}

fn nft_update() -> BoxedStrategy<NftMove> {
    prop_oneof![Just(NftMove::Take), Just(NftMove::Give)].boxed()
}

fn holdings() -> BoxedStrategy<Holdings> {
    (-2i64..10, proptest::collection::btree_map(1u32..8, -1i64..3, 0..5))
        .prop_map(|(coins, objects)| Holdings { coins, objects })
        .boxed()
}

fn either<L: Clone + std::fmt::Debug + 'static, R: Clone + std::fmt::Debug + 'static>(
    left: BoxedStrategy<L>,
    right: BoxedStrategy<R>,
) -> BoxedStrategy<Either<L, R>> {
    prop_oneof![left.prop_map(Either::Left), right.prop_map(Either::Right)].boxed()
}

fn algebra_axioms() -> Verdict {
    axioms("balance", Balance, balance_state(), balance_update())?;
    axioms("nft", NftFlag, nft_state(), nft_update())?;
    axioms("multiset", CountedMultiset, holdings(), holdings())?;
    axioms(
        "balance x nft",
        Product(Balance, NftFlag),
        (balance_state(), nft_state()).boxed(),
        either(balance_update(), nft_update()),
    )?;
    axioms(
        "balance x multiset",
        Product(Balance, CountedMultiset),
        (balance_state(), holdings()).boxed(),
        either(balance_update(), holdings()),
    )?;
    axioms(
        "(balance x nft) x multiset",
        Product(Product(Balance, NftFlag), CountedMultiset),
        ((balance_state(), nft_state()), holdings()).boxed(),
        either(either(balance_update(), nft_update()), holdings()),
    )?;
    Ok("3 algebras and 3 products, 1000 cases per axiom, no failures".into())
}

// 8 ---------------------------------------------------------------------

fn tampered(share: &DecryptionShare) -> Vec<DecryptionShare> {
    let body = share.body.clone().expect("honest share has a body");
    let mut variants = Vec::new();
    for field in 0..3 {
        for bit in [0usize, 9, 130, 255] {
            let mut b = body.clone();
            let bytes = match field {
                0 => &mut b.point,
                1 => &mut b.challenge,
                _ => &mut b.response,
            };
            bytes[bit / 8] ^= 1 << (bit % 8);
            variants.push(DecryptionShare {
                index: share.index,
                body: Some(b),
            });
        }
    }
    variants.push(DecryptionShare {
        index: share.index % 4 + 1,
        body: Some(body),
    });
    variants.push(DecryptionShare {
        index: share.index,
        body: None,
    });
    variants
}

fn tpke_subsets() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let system = tpke::setup(4, 2, &mut rng).map_err(|e| e.to_string())?;
    let vk = &system.verification;
    let mut checked = (0, 0, 0);
    for message in [0, 1, 42, 65_537, MESSAGE_BOUND - 1] {
        let label = Digest::tagged("acceptance", &message);
        let ciphertext = tpke::encrypt(&system.public, message, label, &mut rng).map_err(|e| e.to_string())?;
        let shares: Vec<DecryptionShare> = system
            .shares
            .iter()
            .map(|key| tpke::share_decrypt(key, &ciphertext))
            .collect();
        for share in &shares {
            check(tpke::share_verify(vk, &ciphertext, share), || "honest share rejected".into())?;
            check(tpke::combine(vk, &ciphertext, std::slice::from_ref(share)).is_none(), || {
                format!("one share decrypted {message}")
            })?;
            checked.1 += 1;
        }
        for i in 0..4 {
            for j in i + 1..4 {
                let pair = [shares[i].clone(), shares[j].clone()];
                check(tpke::combine(vk, &ciphertext, &pair) == Some(message), || {
                    format!("shares {i},{j} failed on {message}")
                })?;
                checked.0 += 1;
            }
        }
        for (i, share) in shares.iter().enumerate() {
            for bad in tampered(share) {
                check(!tpke::share_verify(vk, &ciphertext, &bad), || format!("tampered share {i} accepted"))?;
                let other = &shares[(i + 1) % 4];
                let mixed = [bad, other.clone()];
                check(tpke::combine(vk, &ciphertext, &mixed).is_none(), || {
                    "tampered share counted towards the threshold".into()
                })?;
                checked.2 += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "{} pairs decrypt, {} singles give nothing, {} tampered shares flagged, {:.1?}",
        checked.0,
        checked.1,
        checked.2,
        start.elapsed()
    ))
}

// 9 ---------------------------------------------------------------------

struct OracleResult {
    winner: Option<usize>,
    price: u64,
    balances: BTreeMap<AccountId, u64>,
}

/// Sorts eligible bids by value, bidder and submission; the first wins.
fn oracle(rule: PriceRule, bids: &[RevealedBid], proceeds: &AccountId) -> OracleResult {
    let mut eligible: Vec<usize> = (0..bids.len())
        .filter(|&i| bids[i].value.is_some_and(|v| v <= bids[i].deposit))
        .collect();
    eligible.sort_by(|&x, &y| {
        let (a, b) = (&bids[x], &bids[y]);
        b.value
            .cmp(&a.value)
            .then_with(|| a.bidder.cmp(&b.bidder))
            .then_with(|| a.submission.cmp(&b.submission))
    });
    let winner = eligible.first().copied();
    let price = match (winner, rule) {
        (None, _) => 0,
        (Some(w), PriceRule::FirstPrice) => bids[w].value.unwrap_or(0),
        (Some(_), PriceRule::SecondPrice) => eligible.get(1).map_or(0, |&i| bids[i].value.unwrap_or(0)),
    };
    let mut balances = BTreeMap::new();
    for (i, bid) in bids.iter().enumerate() {
        let owed = if Some(i) == winner { price } else { 0 };
        *balances.entry(bid.bidder.clone()).or_default() += bid.deposit - owed;
    }
    *balances.entry(proceeds.clone()).or_default() += price;
    OracleResult { winner, price, balances }
}

fn random_bids(rng: &mut ChaCha8Rng) -> Vec<RevealedBid> {
    let count = rng.gen_range(0..8);
    // Narrow value ranges make ties common.
    let top = if rng.gen_bool(0.5) { 4 } else { 1000 };
    (0..count)
        .map(|i| {
            let bidder = rng.gen_range(1..6u64);
            let value: u64 = rng.gen_range(0..=top);
            let deposit = if rng.gen_bool(0.8) { value + rng.gen_range(0..5) } else { value.saturating_sub(1) };
            RevealedBid {
                bidder: AccountId::root(bidder),
                submission: Digest::tagged("acceptance-bid", &(i as u64, rng.gen::<u64>())),
                deposit,
                item_key: client_key(bidder).public(),
                value: (!rng.gen_bool(0.1)).then_some(value),
            }
        })
        .collect()
}

fn auction_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let proceeds = AccountId::root(100);
    let mut ties = 0;
    let mut cases = 0;
    for rule in [PriceRule::FirstPrice, PriceRule::SecondPrice] {
        for case in 0..500 {
            let bids = random_bids(&mut rng);
            let expected = oracle(rule, &bids, &proceeds);
            let values: Vec<_> = bids.iter().filter_map(|b| b.eligible_value()).collect();
            if values.iter().filter(|v| Some(**v) == values.iter().max().copied()).count() > 1 {
                ties += 1;
            }
            let value = EndOfAuction {
                auction: AccountId::root(99).child(0),
                end_of_bidding: Digest::tagged("eob", &(case as u64)),
                item: AccountId::root(98),
                seller: client_key(98).public(),
                rule,
                proceeds: proceeds.clone(),
                bids: bids.clone(),
            };
            let settled = SettledAuction::new(Certificate { value, votes: Vec::new() });
            let outcome = settle(rule, &bids);
            check(outcome == settled.outcome, || "settlement outcome differs from settle()".into())?;
            check(outcome.winner == expected.winner && outcome.price == expected.price, || {
                format!(
                    "{rule:?} case {case}: got {:?}/{} expected {:?}/{}",
                    outcome.winner, outcome.price, expected.winner, expected.price
                )
            })?;
            if let Some(w) = outcome.winner {
                check(outcome.price <= bids[w].value.unwrap_or(0), || "price above winning bid".into())?;
            }
            let mut balances: BTreeMap<AccountId, u64> = BTreeMap::new();
            for bid in &bids {
                balances.entry(bid.bidder.clone()).or_default();
                let held = HeldBid {
                    bidder: bid.bidder.clone(),
                    deposit: bid.deposit,
                };
                for effect in settled.release(&bid.submission, &held) {
                    if let Effect::Credit { amount, .. } = effect.effect {
                        *balances.entry(effect.target).or_default() += amount;
                    }
                }
            }
            balances.entry(proceeds.clone()).or_default();
            check(balances == expected.balances, || {
                format!("{rule:?} case {case}: balances {balances:?} expected {:?}", expected.balances)
            })?;
            cases += 1;
        }
    }
    Ok(format!("{cases} bid vectors, {ties} with tied top bids, all match the sorting oracle"))
}

// 10 --------------------------------------------------------------------

fn determinism() -> Verdict {
    let mut compared = 0;
    for path in shipped_scenarios() {
        let scenario = Scenario::load(&path).map_err(|e| e.to_string())?;
        let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
        for dir in &dirs {
            let (output, report) = run_scenario(&scenario, scenario.seed).map_err(|e| e.to_string())?;
            shardswap_core::sim::write_run(dir.path(), &output, &report, Default::default())
                .map_err(|e| e.to_string())?;
        }
        for file in ["trace.bin", "payloads.bin", "meta.json"] {
            let a = std::fs::read(dirs[0].path().join(file)).map_err(|e| e.to_string())?;
            let b = std::fs::read(dirs[1].path().join(file)).map_err(|e| e.to_string())?;
            check(a == b, || format!("{}: {file} differs", path.display()))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} trace files byte-identical across two runs"))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("agreement fuzz", agreement_fuzz),
        ("bounded model check", bounded_model_check),
        ("swap end-to-end", swap_end_to_end),
        ("eventual consistency", eventual_consistency),
        ("conservation", conservation),
        ("asset replay determinism", asset_replay),
        ("state-algebra axioms", algebra_axioms),
        ("tpke subsets", tpke_subsets),
        ("auction oracle equivalence", auction_oracle),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (number, (name, criterion)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(criterion).unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {message}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", number + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", number + 1);
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
