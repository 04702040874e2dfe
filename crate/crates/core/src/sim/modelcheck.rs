//! Exhaustive exploration of one swap instance.
//!
//! Four authorities: three honest ones running the real safety rules and one
//! byzantine authority that votes for everything. Both owners are byzantine
//! within their signing power: they may send any proposal for rounds
//! `0..=max_round`, and any certificate that can be assembled from votes cast
//! so far, to any honest authority at any time. Timing plays no part in
//! safety, so round availability is not modelled and every delivery order is
//! reachable.
//!
//! States are compared up to permutation of the honest authorities.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::ids::AccountId;
use crate::swap::{is_safe_pre_commit, is_safe_proposal, SafetyRules};
use crate::types::{Decision, Proposal};

const HONEST: usize = 3;
/// Honest votes that, with the byzantine vote, make a quorum of 3.
const HONEST_QUORUM: u32 = 2;
pub const MAX_ROUND_LIMIT: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub max_round: u64,
    /// Longest delivery sequence explored; `None` for no limit.
    pub max_steps: Option<u32>,
    /// Distinct states after which exploration gives up.
    pub state_budget: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            max_round: 2,
            max_steps: None,
            state_budget: 20_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelCheckError {
    #[error("bounds too large: {0}")]
    BoundsTooLarge(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelCheckReport {
    pub max_round: u64,
    pub disabled_rules: Vec<char>,
    pub states: usize,
    pub transitions: usize,
    pub depth: u32,
    /// Deliveries leading to commit quorums for both decisions.
    pub counterexample: Option<Vec<String>>,
}

impl ModelCheckReport {
    pub fn safe(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Per honest authority: proposal slots are `1 + index`, `0` meaning none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Replica {
    proposed: u8,
    locked: u8,
    /// Bit `i`: voted `PreCommit` on proposal `i`.
    pre_votes: u8,
    /// Bit `i`: voted `Commit` on proposal `i`.
    commit_votes: u8,
}

type State = [Replica; HONEST];

#[derive(Debug, Clone, Copy)]
enum Action {
    Propose { to: usize, proposal: usize },
    PreCommit { to: usize, proposal: usize },
}

struct Model {
    rules: SafetyRules,
    proposals: Vec<Proposal>,
}

impl Model {
    fn new(rules: SafetyRules, max_round: u64) -> Model {
        let swid = AccountId::root(1).child(0);
        let proposals = (0..=max_round)
            .flat_map(|round| {
                [Decision::Confirm, Decision::Abort].map(|decision| Proposal {
                    swid: swid.clone(),
                    round,
                    decision,
                })
            })
            .collect();
        Model { rules, proposals }
    }

    fn slot(&self, slot: u8) -> Option<&Proposal> {
        slot.checked_sub(1).map(|i| &self.proposals[usize::from(i)])
    }

    fn votes(state: &State, proposal: usize, commit: bool) -> u32 {
        state
            .iter()
            .filter(|r| {
                let mask = if commit { r.commit_votes } else { r.pre_votes };
                mask & (1 << proposal) != 0
            })
            .count() as u32
    }

    fn certified(state: &State, proposal: usize, commit: bool) -> bool {
        Self::votes(state, proposal, commit) >= HONEST_QUORUM
    }

    fn step(&self, state: &State, action: Action) -> Option<State> {
        let mut next = *state;
        match action {
            Action::Propose { to, proposal } => {
                let replica = &mut next[to];
                let p = &self.proposals[proposal];
                if !is_safe_proposal(self.rules, self.slot(replica.proposed), self.slot(replica.locked), p) {
                    return None;
                }
                replica.proposed = proposal as u8 + 1;
                replica.pre_votes |= 1 << proposal;
            }
            Action::PreCommit { to, proposal } => {
                if !Self::certified(state, proposal, false) {
                    return None;
                }
                let replica = &mut next[to];
                let p = &self.proposals[proposal];
                if !is_safe_pre_commit(self.rules, self.slot(replica.proposed), self.slot(replica.locked), p) {
                    return None;
                }
                replica.locked = proposal as u8 + 1;
                replica.commit_votes |= 1 << proposal;
            }
        }
        (next != *state).then_some(next)
    }

    fn violation(&self, state: &State) -> bool {
        let decided = |decision: Decision| {
            (0..self.proposals.len())
                .any(|i| self.proposals[i].decision == decision && Self::certified(state, i, true))
        };
        decided(Decision::Confirm) && decided(Decision::Abort)
    }

    fn describe(&self, action: Action) -> String {
        let show = |i: usize| {
            let p = &self.proposals[i];
            format!("{:?}@{}", p.decision, p.round)
        };
        match action {
            Action::Propose { to, proposal } => {
                format!("authority {to} votes PreCommit on proposal {}", show(proposal))
            }
            Action::PreCommit { to, proposal } => {
                format!("authority {to} locks {} and votes Commit", show(proposal))
            }
        }
    }
}

fn canonical(state: &State) -> State {
    let mut sorted = *state;
    sorted.sort();
    sorted
}

/// Breadth-first search over every reachable state.
pub fn model_check_swap(rules: SafetyRules, bounds: Bounds) -> Result<ModelCheckReport, ModelCheckError> {
    if bounds.max_round > MAX_ROUND_LIMIT {
        return Err(ModelCheckError::BoundsTooLarge(format!(
            "max_round {} exceeds {MAX_ROUND_LIMIT}",
            bounds.max_round
        )));
    }
    let model = Model::new(rules, bounds.max_round);
    let count = model.proposals.len();
    let disabled_rules = [('a', rules.a), ('b', rules.b), ('c', rules.c), ('d', rules.d)]
        .into_iter()
        .filter_map(|(name, on)| (!on).then_some(name))
        .collect();

    let initial: State = [Replica {
        proposed: 0,
        locked: 0,
        pre_votes: 0,
        commit_votes: 0,
    }; HONEST];
    // Canonical state -> (state as reached, parent, action, depth).
    let mut seen: HashMap<State, (State, Option<(State, Action)>, u32)> = HashMap::new();
    seen.insert(canonical(&initial), (initial, None, 0));
    let mut queue = VecDeque::from([initial]);
    let mut transitions = 0;
    let mut depth = 0;
    while let Some(state) = queue.pop_front() {
        let key = canonical(&state);
        let level = seen[&key].2;
        depth = depth.max(level);
        if model.violation(&state) {
            let mut steps = Vec::new();
            let mut cursor = key;
            while let Some((parent, action)) = seen[&cursor].1 {
                steps.push(model.describe(action));
                cursor = canonical(&parent);
            }
            steps.reverse();
            return Ok(ModelCheckReport {
                max_round: bounds.max_round,
                disabled_rules,
                states: seen.len(),
                transitions,
                depth,
                counterexample: Some(steps),
            });
        }
        if bounds.max_steps.is_some_and(|max| level >= max) {
            continue;
        }
        for to in 0..HONEST {
            for proposal in 0..count {
                for action in [Action::Propose { to, proposal }, Action::PreCommit { to, proposal }] {
                    let Some(next) = model.step(&state, action) else {
                        continue;
                    };
                    transitions += 1;
                    let next_key = canonical(&next);
                    if seen.contains_key(&next_key) {
                        continue;
                    }
                    if seen.len() >= bounds.state_budget {
                        return Err(ModelCheckError::BoundsTooLarge(format!(
                            "more than {} states",
                            bounds.state_budget
                        )));
                    }
                    seen.insert(next_key, (next, Some((state, action)), level + 1));
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(ModelCheckReport {
        max_round: bounds.max_round,
        disabled_rules,
        states: seen.len(),
        transitions,
        depth,
        counterexample: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds(max_round: u64) -> Bounds {
        Bounds {
            max_round,
            ..Bounds::default()
        }
    }

    #[test]
    fn single_round_is_safe() {
        let report = model_check_swap(SafetyRules::ALL, bounds(0)).unwrap();
        assert!(report.safe());
        assert!(report.states > 1);
    }

    #[test]
    fn oversized_bounds_rejected() {
        assert!(model_check_swap(SafetyRules::ALL, bounds(4)).is_err());
        let tiny = Bounds {
            state_budget: 10,
            ..bounds(1)
        };
        assert!(matches!(
            model_check_swap(SafetyRules::ALL, tiny),
            Err(ModelCheckError::BoundsTooLarge(_))
        ));
    }

    #[test]
    fn dropping_rule_a_breaks_round_zero() {
        let report = model_check_swap(SafetyRules::without('a'), bounds(0)).unwrap();
        let steps = report.counterexample.expect("violation");
        assert!(steps.len() <= 8, "{steps:?}");
    }
}
