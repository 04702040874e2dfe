//! Scenario files: TOML with a `version` header.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::faults::AuthorityFault;
use super::network::NetworkConfig;
use crate::auction::PriceRule;
use crate::client::auction::SellerBehavior;
use crate::client::swap::OwnerBehavior;
use crate::client::ClientConfig;
use crate::swap::{RoundSchedule, SafetyRules};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported scenario version {0} (expected {SCENARIO_VERSION})")]
    Version(u32),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(message.into())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub committee: CommitteeSection,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub consensus: ConsensusSection,
    #[serde(default)]
    pub client: ClientConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub faults: Vec<FaultEntry>,
    #[serde(default)]
    pub accounts: Vec<AccountEntry>,
    #[serde(default)]
    pub swaps: Vec<SwapEntry>,
    #[serde(default)]
    pub payments: Vec<PaymentEntry>,
    #[serde(default)]
    pub auctions: Vec<AuctionEntry>,
    #[serde(default)]
    pub transmutations: Vec<TransmuteEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommitteeSection {
    pub n: usize,
    pub shard_count: usize,
    /// Lets tests run with more than `f` faulty authorities.
    pub allow_excess_faults: bool,
}

impl Default for CommitteeSection {
    fn default() -> Self {
        Self {
            n: 4,
            shard_count: 2,
            allow_excess_faults: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusSection {
    pub interval: u64,
    pub escalation_round: u64,
    pub parity_leaders: bool,
    /// Safety rules to switch off, by letter. Only for mutation tests.
    pub disabled_rules: Vec<char>,
}

impl Default for ConsensusSection {
    fn default() -> Self {
        let schedule = RoundSchedule::default();
        Self {
            interval: schedule.interval,
            escalation_round: schedule.escalation_round,
            parity_leaders: schedule.parity_leaders,
            disabled_rules: Vec::new(),
        }
    }
}

impl ConsensusSection {
    pub fn schedule(&self) -> RoundSchedule {
        RoundSchedule {
            interval: self.interval,
            escalation_round: self.escalation_round,
            parity_leaders: self.parity_leaders,
        }
    }

    pub fn rules(&self) -> SafetyRules {
        let mut rules = SafetyRules::ALL;
        for rule in &self.disabled_rules {
            rules = match rule {
                'a' => SafetyRules { a: false, ..rules },
                'b' => SafetyRules { b: false, ..rules },
                'c' => SafetyRules { c: false, ..rules },
                'd' => SafetyRules { d: false, ..rules },
                _ => rules,
            };
        }
        rules
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Logical time after which the run stops.
    pub time_budget: u64,
    pub event_budget: u64,
    /// Replay certified messages to every live authority at the end.
    pub sync: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            time_budget: 600_000,
            event_budget: 2_000_000,
            sync: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct FaultEntry {
    pub authority: u16,
    #[serde(flatten)]
    pub fault: AuthorityFault,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountEntry {
    pub name: String,
    #[serde(default)]
    pub balance: i64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwapEntry {
    pub name: String,
    pub first: String,
    pub second: String,
    /// Account creating the instance; defaults to `first`.
    #[serde(default)]
    pub broker: Option<String>,
    #[serde(default)]
    pub start: u64,
    #[serde(default)]
    pub first_behavior: OwnerBehavior,
    #[serde(default)]
    pub second_behavior: OwnerBehavior,
    #[serde(default = "default_patience")]
    pub patience: u64,
    /// Delay before owner 2 starts, relative to `start`.
    #[serde(default)]
    pub second_offset: u64,
}

fn default_patience() -> u64 {
    3_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaymentEntry {
    pub from: String,
    pub to: String,
    pub amount: u64,
    #[serde(default)]
    pub at: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuctionEntry {
    pub name: String,
    /// The account put up for sale; its owner is the seller.
    pub item: String,
    pub proceeds: String,
    pub rule: PriceRule,
    #[serde(default = "default_bidding_time")]
    pub bidding_time: u64,
    #[serde(default)]
    pub start: u64,
    #[serde(default)]
    pub behavior: SellerBehavior,
    #[serde(default)]
    pub bids: Vec<BidEntry>,
}

fn default_bidding_time() -> u64 {
    3_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidEntry {
    pub bidder: String,
    pub value: u64,
    pub deposit: u64,
    #[serde(default)]
    pub at: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmuteEntry {
    pub name: String,
    pub function: String,
    /// Hex-encoded parameters.
    #[serde(default)]
    pub params: String,
    #[serde(default)]
    pub at: u64,
    pub inputs: Vec<TransmuteInput>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmuteInput {
    pub account: String,
    /// UTF-8 payload, or hex when prefixed with `0x`.
    pub data: String,
}

impl TransmuteInput {
    pub fn bytes(&self) -> Result<Vec<u8>, ConfigError> {
        match self.data.strip_prefix("0x") {
            Some(hex_data) => hex::decode(hex_data).map_err(|e| invalid(format!("input data: {e}"))),
            None => Ok(self.data.as_bytes().to_vec()),
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, ConfigError> {
        // Check the header first so that old files get a clear message.
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = toml::from_str(text)?;
        if header.version != SCENARIO_VERSION {
            return Err(ConfigError::Version(header.version));
        }
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn f(&self) -> usize {
        (self.committee.n - 1) / 3
    }

    pub fn account_index(&self, name: &str) -> Option<usize> {
        self.accounts.iter().position(|a| a.name == name)
    }

    /// Authorities with a fault assigned.
    pub fn faulty(&self) -> BTreeSet<u16> {
        self.faults.iter().map(|f| f.authority).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != SCENARIO_VERSION {
            return Err(ConfigError::Version(self.version));
        }
        let n = self.committee.n;
        if n < 4 || n > usize::from(u16::MAX) {
            return Err(invalid(format!("committee size {n} must be at least 4")));
        }
        if self.committee.shard_count == 0 {
            return Err(invalid("shard_count must be positive"));
        }
        self.network.validate().map_err(invalid)?;
        let mut seen = BTreeSet::new();
        for fault in &self.faults {
            if usize::from(fault.authority) >= n {
                return Err(invalid(format!("fault on unknown authority {}", fault.authority)));
            }
            if !seen.insert(fault.authority) {
                return Err(invalid(format!("authority {} has two faults", fault.authority)));
            }
            fault.fault.validate().map_err(invalid)?;
        }
        if seen.len() > self.f() && !self.committee.allow_excess_faults {
            return Err(invalid(format!(
                "{} faulty authorities exceed f = {}",
                seen.len(),
                self.f()
            )));
        }
        for rule in &self.consensus.disabled_rules {
            if !('a'..='d').contains(rule) {
                return Err(invalid(format!("unknown safety rule {rule:?}")));
            }
        }

        let mut names = BTreeSet::new();
        for account in &self.accounts {
            if !names.insert(account.name.as_str()) {
                return Err(invalid(format!("duplicate account {}", account.name)));
            }
            if account.balance < 0 {
                return Err(invalid(format!("negative balance for {}", account.name)));
            }
        }
        let known = |name: &str, what: &str| {
            if names.contains(name) {
                Ok(())
            } else {
                Err(invalid(format!("{what} refers to unknown account {name}")))
            }
        };
        let mut drivers = BTreeSet::new();
        let mut unique = |name: &str| {
            if drivers.insert(name.to_owned()) {
                Ok(())
            } else {
                Err(invalid(format!("duplicate name {name}")))
            }
        };
        for swap in &self.swaps {
            unique(&swap.name)?;
            known(&swap.first, "swap")?;
            known(&swap.second, "swap")?;
            if let Some(broker) = &swap.broker {
                known(broker, "swap broker")?;
            }
            if swap.first == swap.second {
                return Err(invalid(format!("swap {} uses one account twice", swap.name)));
            }
        }
        for payment in &self.payments {
            known(&payment.from, "payment")?;
            known(&payment.to, "payment")?;
        }
        for auction in &self.auctions {
            unique(&auction.name)?;
            known(&auction.item, "auction")?;
            known(&auction.proceeds, "auction")?;
            for bid in &auction.bids {
                known(&bid.bidder, "bid")?;
                if bid.value >= crate::tpke::MESSAGE_BOUND {
                    return Err(invalid(format!("bid value {} is too large", bid.value)));
                }
            }
        }
        for transmutation in &self.transmutations {
            unique(&transmutation.name)?;
            if transmutation.inputs.is_empty() {
                return Err(invalid(format!("{} has no inputs", transmutation.name)));
            }
            for input in &transmutation.inputs {
                known(&input.account, "transmutation")?;
                input.bytes()?;
            }
            hex::decode(&transmutation.params).map_err(|e| invalid(format!("params: {e}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        version = 1
        name = "minimal"

        [[accounts]]
        name = "alice"
        balance = 10

        [[accounts]]
        name = "bob"
    "#;

    #[test]
    fn defaults_fill_in() {
        let scenario = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(scenario.committee.n, 4);
        assert_eq!(scenario.f(), 1);
        assert!(scenario.run.sync);
        assert_eq!(scenario.consensus.rules(), SafetyRules::ALL);
    }

    #[test]
    fn version_is_checked_first() {
        let text = MINIMAL.replace("version = 1", "version = 2");
        assert!(matches!(Scenario::from_toml(&text), Err(ConfigError::Version(2))));
    }

    #[test]
    fn too_many_faults_rejected() {
        let text = format!(
            "{MINIMAL}\n[[faults]]\nauthority = 0\nkind = \"arbitrary-signer\"\n\
             [[faults]]\nauthority = 1\nkind = \"crash\"\nat = 5\n"
        );
        let error = Scenario::from_toml(&text).unwrap_err();
        assert!(error.to_string().contains("exceed f"), "{error}");
        let allowed = text.replace("name = \"minimal\"", "name = \"m\"\n[committee]\nallow_excess_faults = true");
        Scenario::from_toml(&allowed).unwrap();
    }

    #[test]
    fn unknown_references_rejected() {
        let text = format!("{MINIMAL}\n[[payments]]\nfrom = \"alice\"\nto = \"carol\"\namount = 1\n");
        assert!(Scenario::from_toml(&text).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = MINIMAL.replace("name = \"minimal\"", "name = \"m\"\ncolour = 3");
        assert!(matches!(Scenario::from_toml(&text), Err(ConfigError::Parse(_))));
    }
}
