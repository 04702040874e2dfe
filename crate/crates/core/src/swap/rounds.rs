//! Which round numbers an authority accepts at a given local time.
//!
//! Rounds `0..=E` (with `E` the escalation round) open one per interval.
//! Beyond that, round `E + j` opens `interval · (2^j − 1)` after round `E`.

use serde::{Deserialize, Serialize};

use crate::types::RoundNumber;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundSchedule {
    /// Simulated milliseconds between consecutive rounds in the linear phase.
    pub interval: u64,
    pub escalation_round: RoundNumber,
    /// Require even rounds to be proposed by role 1 and odd rounds by role 2
    /// once escalation is active.
    pub parity_leaders: bool,
}

impl Default for RoundSchedule {
    fn default() -> Self {
        Self {
            interval: 1_000,
            escalation_round: 8,
            parity_leaders: false,
        }
    }
}

impl RoundSchedule {
    /// Time after instance creation at which `round` becomes available, or
    /// `None` if that time does not fit in 64 bits.
    pub fn opens_at(&self, round: RoundNumber) -> Option<u64> {
        let linear = round.min(self.escalation_round);
        let base = linear.checked_mul(self.interval)?;
        let extra = round - linear;
        if extra == 0 {
            return Some(base);
        }
        let doubling = 1u64.checked_shl(u32::try_from(extra).ok()?)?;
        base.checked_add((doubling - 1).checked_mul(self.interval)?)
    }

    pub fn is_available(&self, round: RoundNumber, created_at: u64, now: u64) -> bool {
        let elapsed = now.saturating_sub(created_at);
        self.opens_at(round).is_some_and(|opens| opens <= elapsed)
    }

    /// Highest round available after `elapsed` time units.
    pub fn highest_available(&self, elapsed: u64) -> RoundNumber {
        if self.interval == 0 {
            return RoundNumber::MAX;
        }
        let linear = (elapsed / self.interval).min(self.escalation_round);
        if linear < self.escalation_round {
            return linear;
        }
        let mut round = self.escalation_round;
        while self.opens_at(round + 1).is_some_and(|t| t <= elapsed) {
            round += 1;
        }
        round
    }

    pub fn escalated(&self, round: RoundNumber) -> bool {
        round > self.escalation_round
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_round_open_at_creation() {
        let schedule = RoundSchedule::default();
        assert!(schedule.is_available(0, 500, 500));
        assert!(!schedule.is_available(1, 500, 500));
    }

    #[test]
    fn linear_phase() {
        let schedule = RoundSchedule::default();
        // Two intervals elapsed: rounds up to 2 only.
        assert!(schedule.is_available(2, 0, 2_000));
        assert!(!schedule.is_available(3, 0, 2_000));
        assert_eq!(schedule.highest_available(2_999), 2);
    }

    #[test]
    fn exponential_phase_matches_geometric_sum() {
        let schedule = RoundSchedule::default();
        let e = schedule.escalation_round;
        for j in 0..10u64 {
            // Independent oracle: sum of interval · 2^i for i < j.
            let oracle: u64 = (0..j).map(|i| schedule.interval << i).sum::<u64>()
                + e * schedule.interval;
            assert_eq!(schedule.opens_at(e + j), Some(oracle));
            assert!(schedule.is_available(e + j, 10, 10 + oracle));
            assert!(!schedule.is_available(e + j, 10, 10 + oracle - 1));
            assert_eq!(schedule.highest_available(oracle), e + j);
        }
    }

    #[test]
    fn huge_rounds_never_open() {
        let schedule = RoundSchedule::default();
        assert_eq!(schedule.opens_at(u64::MAX), None);
        assert!(!schedule.is_available(200, 0, u64::MAX));
    }
}
