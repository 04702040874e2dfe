//! Point-to-point links between clients and authorities.
//!
//! Before GST a message may be dropped or duplicated and takes between
//! `min_delay` and `max_delay`; from GST on it always arrives, exactly once,
//! within `stable_max_delay`. Partitions cut an authority off for a window.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub min_delay: u64,
    pub max_delay: u64,
    pub stable_max_delay: u64,
    pub gst: u64,
    pub drop: f64,
    pub duplicate: f64,
    /// Latency of effects between shards of one authority.
    pub shard_delay: u64,
    pub partitions: Vec<Partition>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            min_delay: 2,
            max_delay: 100,
            stable_max_delay: 40,
            gst: 0,
            drop: 0.0,
            duplicate: 0.0,
            shard_delay: 1,
            partitions: Vec::new(),
        }
    }
}

/// Authorities unreachable in `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    pub start: u64,
    pub end: u64,
    pub isolated: Vec<u16>,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_delay == 0 {
            return Err("min_delay must be positive".into());
        }
        if self.min_delay > self.max_delay || self.min_delay > self.stable_max_delay {
            return Err("min_delay exceeds a maximum delay".into());
        }
        for p in [self.drop, self.duplicate] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("probability {p} outside [0, 1]"));
            }
        }
        if self.partitions.iter().any(|p| p.start > p.end) {
            return Err("partition ends before it starts".into());
        }
        Ok(())
    }

    /// One round trip after GST, the unit client timeouts are sized against.
    pub fn round_trip_bound(&self) -> u64 {
        2 * self.stable_max_delay
    }

    pub fn is_isolated(&self, authority: u16, now: u64) -> bool {
        self.partitions
            .iter()
            .any(|p| p.start <= now && now < p.end && p.isolated.contains(&authority))
    }

    /// Arrival times of the copies of a message sent at `now` to or from
    /// `authority`. Empty if it is lost.
    pub fn schedule(&self, rng: &mut ChaCha8Rng, now: u64, authority: u16) -> Vec<u64> {
        if self.is_isolated(authority, now) {
            return Vec::new();
        }
        let stable = now >= self.gst;
        let max = if stable { self.stable_max_delay } else { self.max_delay };
        let copies = if stable {
            1
        } else if rng.gen_bool(self.drop) {
            0
        } else if rng.gen_bool(self.duplicate) {
            2
        } else {
            1
        };
        (0..copies)
            .map(|_| now + rng.gen_range(self.min_delay..=max))
            .filter(|at| !self.is_isolated(authority, *at))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn stable_links_deliver_once_within_bound() {
        let network = NetworkConfig {
            gst: 100,
            drop: 1.0,
            ..NetworkConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(network.schedule(&mut rng, 50, 0).is_empty());
        for now in 100..200 {
            let arrivals = network.schedule(&mut rng, now, 0);
            assert_eq!(arrivals.len(), 1);
            assert!(arrivals[0] > now && arrivals[0] <= now + network.stable_max_delay);
        }
    }

    #[test]
    fn partitions_cut_both_ends() {
        let network = NetworkConfig {
            partitions: vec![Partition {
                start: 10,
                end: 20,
                isolated: vec![2],
            }],
            ..NetworkConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(network.schedule(&mut rng, 15, 2).is_empty());
        assert_eq!(network.schedule(&mut rng, 15, 1).len(), 1);
        assert_eq!(network.schedule(&mut rng, 25, 2).len(), 1);
    }
}
