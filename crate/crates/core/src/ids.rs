use std::fmt;

use serde::Serialize;

use crate::crypto::Digest;
use crate::encoding::{Decode, DecodeError, Encode, Reader};

/// A hierarchical, never-reused identifier. The first component is a root
/// tag; every further component is the sequence number at which the parent
/// created the child (`child = parent :: n`).
///
/// Accounts, swap instances and auctions all live in the same id space.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccountId(Vec<u64>);

impl AccountId {
    pub fn root(tag: u64) -> Self {
        Self(vec![tag])
    }

    /// `self :: sequence`
    pub fn child(&self, sequence: u64) -> Self {
        let mut path = self.0.clone();
        path.push(sequence);
        Self(path)
    }

    pub fn parent(&self) -> Option<Self> {
        (self.0.len() > 1).then(|| Self(self.0[..self.0.len() - 1].to_vec()))
    }

    pub fn path(&self) -> &[u64] {
        &self.0
    }

    /// Shard assignment: digest of the canonical encoding modulo the shard count.
    pub fn shard(&self, shard_count: usize) -> usize {
        let digest = Digest::of(&self.to_bytes());
        let prefix = u64::from_le_bytes(digest.0[..8].try_into().expect("8 bytes"));
        (prefix % shard_count.max(1) as u64) as usize
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        f.write_str(&parts.join(":"))
    }
}

impl fmt::Debug for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{self}")
    }
}

impl Serialize for AccountId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl Encode for AccountId {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.0.encode_to(out);
    }
}

impl Decode for AccountId {
    fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let path = Vec::<u64>::decode_from(reader)?;
        if path.is_empty() {
            return Err(DecodeError::InvalidValue("empty account id"));
        }
        Ok(Self(path))
    }
}
