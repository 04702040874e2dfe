//! Generalized account states: a set of states `S` with a validity
//! predicate, a set of updates `U` with a safety predicate, and an action
//! `S × U → S` such that updates commute and safe updates preserve validity.
//!
//! A payment is the pair `(−x, +x)`: the owner's local update must leave a
//! valid state, the remote update must be safe.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;

use thiserror::Error;

use crate::crypto::Digest;
use crate::ids::AccountId;

pub trait StateAlgebra {
    type State: Clone + PartialEq + Debug;
    type Update: Clone + PartialEq + Debug;

    /// State of a fresh account. Always valid.
    fn initial(&self) -> Self::State;
    fn apply(&self, state: &Self::State, update: &Self::Update) -> Self::State;
    fn is_valid(&self, state: &Self::State) -> bool;
    fn is_safe(&self, update: &Self::Update) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("remote update is not safe")]
    UnsafeRemote,
    #[error("local update leaves an invalid state")]
    InvalidLocalResult,
}

/// `Apply(id', u−, u+)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplyOperation<U> {
    pub target: AccountId,
    pub local: U,
    pub remote: U,
}

/// Whether the owner of an account in `state` may issue `op`.
pub fn validate_apply<A: StateAlgebra>(
    algebra: &A,
    state: &A::State,
    op: &ApplyOperation<A::Update>,
) -> Result<(), ApplyError> {
    if !algebra.is_safe(&op.remote) {
        return Err(ApplyError::UnsafeRemote);
    }
    if !algebra.is_valid(&algebra.apply(state, &op.local)) {
        return Err(ApplyError::InvalidLocalResult);
    }
    Ok(())
}

/// Fungible balance: integers, valid when non-negative, credits are safe.
/// Arithmetic wraps so that the action stays a commutative group action on
/// the whole state space.
#[derive(Debug, Clone, Copy, Default)]
pub struct Balance;

impl StateAlgebra for Balance {
    type State = i128;
    type Update = i64;

    fn initial(&self) -> i128 {
        0
    }

    fn apply(&self, state: &i128, update: &i64) -> i128 {
        state.wrapping_add(i128::from(*update))
    }

    fn is_valid(&self, state: &i128) -> bool {
        *state >= 0
    }

    fn is_safe(&self, update: &i64) -> bool {
        *update >= 0
    }
}

/// A single non-fungible token: the holder's count is 1, a sender may go
/// through −1 transiently. Only receiving (`+1`) is safe.
#[derive(Debug, Clone, Copy, Default)]
pub struct NftFlag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NftMove {
    Take,
    Give,
}

impl NftMove {
    pub fn delta(self) -> i64 {
        match self {
            NftMove::Take => -1,
            NftMove::Give => 1,
        }
    }
}

impl StateAlgebra for NftFlag {
    type State = i64;
    type Update = NftMove;

    fn initial(&self) -> i64 {
        0
    }

    fn apply(&self, state: &i64, update: &NftMove) -> i64 {
        state.wrapping_add(update.delta())
    }

    fn is_valid(&self, state: &i64) -> bool {
        *state >= 0
    }

    fn is_safe(&self, update: &NftMove) -> bool {
        *update == NftMove::Give
    }
}

/// Independent composition: `S = S1 × S2`, `U = U1 ⊎ U2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Product<A, B>(pub A, pub B);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Either<L, R> {
    Left(L),
    Right(R),
}

impl<A: StateAlgebra, B: StateAlgebra> StateAlgebra for Product<A, B> {
    type State = (A::State, B::State);
    type Update = Either<A::Update, B::Update>;

    fn initial(&self) -> Self::State {
        (self.0.initial(), self.1.initial())
    }

    fn apply(&self, (a, b): &Self::State, update: &Self::Update) -> Self::State {
        match update {
            Either::Left(u) => (self.0.apply(a, u), b.clone()),
            Either::Right(u) => (a.clone(), self.1.apply(b, u)),
        }
    }

    fn is_valid(&self, (a, b): &Self::State) -> bool {
        self.0.is_valid(a) && self.1.is_valid(b)
    }

    fn is_safe(&self, update: &Self::Update) -> bool {
        match update {
            Either::Left(u) => self.0.is_safe(u),
            Either::Right(u) => self.1.is_safe(u),
        }
    }
}

/// Objects arranged in a tree (`parent(x) = x / 2`, root `1`) plus coins.
/// Owning an object requires owning its parent and at least
/// [`CountedMultiset::COINS_PER_OBJECT`] coins.
///
/// An update is a bundle of count deltas. A bundle is safe when it only adds
/// and is self-supporting: it brings the parent of every object it adds, and
/// enough coins, so it cannot break validity whatever the receiver holds.
#[derive(Debug, Clone, Copy, Default)]
pub struct CountedMultiset;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Holdings {
    pub coins: i64,
    pub objects: BTreeMap<u32, i64>,
}

impl CountedMultiset {
    pub const COINS_PER_OBJECT: i64 = 3;

    pub fn parent(object: u32) -> Option<u32> {
        (object > 1).then_some(object / 2)
    }

    fn owns(holdings: &Holdings, object: u32) -> bool {
        holdings.objects.get(&object).is_some_and(|count| *count > 0)
    }
}

impl StateAlgebra for CountedMultiset {
    type State = Holdings;
    type Update = Holdings;

    fn initial(&self) -> Holdings {
        Holdings::default()
    }

    fn apply(&self, state: &Holdings, update: &Holdings) -> Holdings {
        let mut result = state.clone();
        result.coins = result.coins.wrapping_add(update.coins);
        for (object, delta) in &update.objects {
            let count = result.objects.entry(*object).or_insert(0);
            *count = count.wrapping_add(*delta);
            if *count == 0 {
                result.objects.remove(object);
            }
        }
        result
    }

    fn is_valid(&self, state: &Holdings) -> bool {
        if state.coins < 0 || state.objects.values().any(|count| *count < 0) {
            return false;
        }
        state.objects.iter().all(|(object, count)| {
            *count == 0
                || (state.coins >= Self::COINS_PER_OBJECT
                    && Self::parent(*object).is_none_or(|p| Self::owns(state, p)))
        })
    }

    fn is_safe(&self, update: &Holdings) -> bool {
        update.coins >= 0
            && update.objects.values().all(|delta| *delta >= 0)
            && self.is_valid(update)
    }
}

/// Static per-authority conversion rates for cross-unit payments: the
/// authority accepts giving `give` of one unit for `receive` of another when
/// `receive ≤ give · numerator / denominator`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RateTable {
    rates: BTreeMap<(String, String), (u64, u64)>,
}

impl RateTable {
    pub fn with_rate(mut self, from: &str, to: &str, numerator: u64, denominator: u64) -> Self {
        assert!(denominator > 0, "zero denominator");
        self.rates
            .insert((from.to_owned(), to.to_owned()), (numerator, denominator));
        self
    }

    pub fn accepts(&self, from: &str, to: &str, give: u64, receive: u64) -> bool {
        if from == to {
            return receive <= give;
        }
        self.rates
            .get(&(from.to_owned(), to.to_owned()))
            .is_some_and(|(num, den)| {
                u128::from(receive) * u128::from(*den) <= u128::from(give) * u128::from(*num)
            })
    }
}

/// Generalized accounts replicated at one authority: certified `Apply`
/// operations execute their local half immediately and deliver the remote
/// half asynchronously, at most once per certificate.
#[derive(Debug, Clone)]
pub struct AlgebraLedger<A: StateAlgebra> {
    pub algebra: A,
    pub states: BTreeMap<AccountId, A::State>,
    executed: BTreeSet<Digest>,
    delivered: BTreeSet<Digest>,
}

impl<A: StateAlgebra> AlgebraLedger<A> {
    pub fn new(algebra: A) -> Self {
        Self {
            algebra,
            states: BTreeMap::new(),
            executed: BTreeSet::new(),
            delivered: BTreeSet::new(),
        }
    }

    pub fn state(&self, id: &AccountId) -> A::State {
        self.states
            .get(id)
            .cloned()
            .unwrap_or_else(|| self.algebra.initial())
    }

    pub fn set(&mut self, id: AccountId, state: A::State) {
        self.states.insert(id, state);
    }

    /// Owner-side check, as done before voting.
    pub fn validate(&self, id: &AccountId, op: &ApplyOperation<A::Update>) -> Result<(), ApplyError> {
        validate_apply(&self.algebra, &self.state(id), op)
    }

    /// Executes the local half of a certified operation. Returns whether it
    /// was new.
    pub fn execute_local(&mut self, certificate: Digest, id: &AccountId, local: &A::Update) -> bool {
        if !self.executed.insert(certificate) {
            return false;
        }
        let next = self.algebra.apply(&self.state(id), local);
        self.states.insert(id.clone(), next);
        true
    }

    /// Applies the remote half of a certified operation, once.
    pub fn deliver_remote(&mut self, certificate: Digest, target: &AccountId, remote: &A::Update) -> bool {
        if !self.delivered.insert(certificate) {
            return false;
        }
        let next = self.algebra.apply(&self.state(target), remote);
        self.states.insert(target.clone(), next);
        true
    }

    pub fn all_valid(&self) -> bool {
        self.states.values().all(|s| self.algebra.is_valid(s))
    }
}
