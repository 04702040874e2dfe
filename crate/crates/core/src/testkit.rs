//! Deterministic keys and certificates for tests, benches and examples.

use crate::committee::{AuthorityIndex, Certificate, Committee, Signable, Vote};
use crate::crypto::{Digest, KeyPair};

/// Key pair derived from a label and an index, stable across runs.
pub fn derived_key(label: &str, index: u64) -> KeyPair {
    KeyPair::from_seed(Digest::tagged(label, &index).0)
}

pub fn client_key(index: u64) -> KeyPair {
    derived_key("client-key", index)
}

/// A committee whose secret keys are all known.
pub struct TestCommittee {
    pub keys: Vec<KeyPair>,
    pub committee: Committee,
}

impl TestCommittee {
    pub fn new(n: usize) -> Self {
        let keys: Vec<KeyPair> = (0..n as u64)
            .map(|i| derived_key("authority-key", i))
            .collect();
        let committee =
            Committee::new(keys.iter().map(KeyPair::public).collect()).expect("valid size");
        Self { keys, committee }
    }

    pub fn vote<T: Signable>(&self, signer: usize, value: &T) -> Vote {
        Vote::sign(value, AuthorityIndex(signer as u16), &self.keys[signer])
    }

    /// Certificate signed by the given authorities (not checked for quorum).
    pub fn certify_by<T: Signable + Clone>(&self, value: &T, signers: &[usize]) -> Certificate<T> {
        Certificate {
            value: value.clone(),
            votes: signers.iter().map(|&i| self.vote(i, value)).collect(),
        }
    }

    /// Certificate signed by the first quorum of authorities.
    pub fn certify<T: Signable + Clone>(&self, value: &T) -> Certificate<T> {
        let signers: Vec<usize> = (0..self.committee.quorum()).collect();
        self.certify_by(value, &signers)
    }
}
