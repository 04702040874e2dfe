//! The voting rules that make commit certificates agree.
//!
//! Written over bare `(proposed, locked)` proposals so the same code is used
//! by swap instances and by the exhaustive model checker.

use crate::types::Proposal;

/// Which of the four rules are enforced. Everything is on in production; the
/// model checker switches rules off one at a time to show each is needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SafetyRules {
    /// A new proposal must be at a higher round than the last one voted for.
    pub a: bool,
    /// A proposal must be above the locked round and keep its decision.
    pub b: bool,
    /// A pre-commit certificate must not be below the last proposal voted for.
    pub c: bool,
    /// A pre-commit certificate must not be below the locked one.
    pub d: bool,
}

impl SafetyRules {
    pub const ALL: SafetyRules = SafetyRules {
        a: true,
        b: true,
        c: true,
        d: true,
    };

    /// All rules except the named one (`'a'..='d'`).
    pub fn without(rule: char) -> SafetyRules {
        let mut rules = Self::ALL;
        match rule {
            'a' => rules.a = false,
            'b' => rules.b = false,
            'c' => rules.c = false,
            'd' => rules.d = false,
            other => panic!("no safety rule named {other:?}"),
        }
        rules
    }
}

impl Default for SafetyRules {
    fn default() -> Self {
        Self::ALL
    }
}

/// `IsSafeProposal`. Re-submitting exactly the stored proposal is allowed so
/// that votes can be re-issued.
pub fn is_safe_proposal(
    rules: SafetyRules,
    proposed: Option<&Proposal>,
    locked: Option<&Proposal>,
    proposal: &Proposal,
) -> bool {
    if rules.a {
        if let Some(previous) = proposed {
            if previous != proposal && proposal.round <= previous.round {
                return false;
            }
        }
    }
    if rules.b {
        if let Some(locked) = locked {
            if proposal.round <= locked.round || proposal.decision != locked.decision {
                return false;
            }
        }
    }
    true
}

/// `IsSafePreCommit` for a certificate on `PreCommit(certified)`.
pub fn is_safe_pre_commit(
    rules: SafetyRules,
    proposed: Option<&Proposal>,
    locked: Option<&Proposal>,
    certified: &Proposal,
) -> bool {
    if rules.c && proposed.is_some_and(|p| certified.round < p.round) {
        return false;
    }
    if rules.d && locked.is_some_and(|l| certified.round < l.round) {
        return false;
    }
    true
}
