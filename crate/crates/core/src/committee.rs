//! Committee membership, votes and quorum certificates.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::crypto::{Digest, KeyPair, PublicKey, Signature};
use crate::encoding::{Decode, DecodeError, Encode, Reader};

/// Position of an authority in the committee.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AuthorityIndex(pub u16);

impl fmt::Debug for AuthorityIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}", self.0)
    }
}

impl fmt::Display for AuthorityIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}", self.0)
    }
}

impl Encode for AuthorityIndex {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.0.encode_to(out);
    }
}

impl Decode for AuthorityIndex {
    fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self(u16::decode_from(reader)?))
    }
}

/// A value authorities or clients sign. The domain string keeps signatures
/// over different types apart even when their encodings coincide.
pub trait Signable: Encode {
    const DOMAIN: &'static str;

    fn signing_digest(&self) -> Digest {
        Digest::tagged(Self::DOMAIN, self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommitteeError {
    #[error("committee size {n} is not 3f+1 for any f >= 1")]
    BadSize { n: usize },
    #[error("duplicate authority key at index {0}")]
    DuplicateKey(usize),
    #[error("quorum not reached: {have} valid distinct votes, need {need}")]
    QuorumNotReached { have: usize, need: usize },
}

/// `n = 3f + 1` authorities; any `2f + 1` form a quorum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Committee {
    authorities: Vec<PublicKey>,
    f: usize,
}

impl Committee {
    pub fn new(authorities: Vec<PublicKey>) -> Result<Self, CommitteeError> {
        let n = authorities.len();
        if n < 4 || (n - 1) % 3 != 0 {
            return Err(CommitteeError::BadSize { n });
        }
        let mut seen = BTreeMap::new();
        for (index, key) in authorities.iter().enumerate() {
            if seen.insert(*key, index).is_some() {
                return Err(CommitteeError::DuplicateKey(index));
            }
        }
        Ok(Self {
            authorities,
            f: (n - 1) / 3,
        })
    }

    pub fn n(&self) -> usize {
        self.authorities.len()
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn quorum(&self) -> usize {
        2 * self.f + 1
    }

    /// Any set this large contains at least one honest authority.
    pub fn validity_threshold(&self) -> usize {
        self.f + 1
    }

    pub fn key(&self, index: AuthorityIndex) -> Option<&PublicKey> {
        self.authorities.get(index.0 as usize)
    }

    pub fn indices(&self) -> impl Iterator<Item = AuthorityIndex> + '_ {
        (0..self.authorities.len()).map(|i| AuthorityIndex(i as u16))
    }

    pub fn keys(&self) -> &[PublicKey] {
        &self.authorities
    }
}

/// One authority's signature on the signing digest of a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vote {
    pub signer: AuthorityIndex,
    pub digest: Digest,
    pub signature: Signature,
}

crate::codec_struct!(Vote {
    signer,
    digest,
    signature
});

impl Vote {
    pub fn sign<T: Signable>(value: &T, signer: AuthorityIndex, key: &KeyPair) -> Self {
        let digest = value.signing_digest();
        Self {
            signer,
            digest,
            signature: key.sign(digest.as_bytes()),
        }
    }

    /// Checks the signature against the committee key and that the vote is
    /// over exactly `digest`.
    pub fn verify_digest(&self, committee: &Committee, digest: &Digest) -> bool {
        self.digest == *digest
            && committee
                .key(self.signer)
                .is_some_and(|key| key.verify(digest.as_bytes(), &self.signature))
    }

    pub fn verify<T: Signable>(&self, committee: &Committee, value: &T) -> bool {
        self.verify_digest(committee, &value.signing_digest())
    }
}

/// A value together with votes from a quorum of distinct authorities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate<T> {
    pub value: T,
    pub votes: Vec<Vote>,
}

impl<T: Encode> Encode for Certificate<T> {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.value.encode_to(out);
        self.votes.encode_to(out);
    }
}

impl<T: Decode> Decode for Certificate<T> {
    fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            value: T::decode_from(reader)?,
            votes: Vec::decode_from(reader)?,
        })
    }
}

impl<T: Signable> Certificate<T> {
    /// Identifies the certified value; two certificates over the same value
    /// with different vote subsets share a digest.
    pub fn digest(&self) -> Digest {
        self.value.signing_digest()
    }

    pub fn signers(&self) -> impl Iterator<Item = AuthorityIndex> + '_ {
        self.votes.iter().map(|vote| vote.signer)
    }
}

/// Keeps the valid votes on `value` (one per signer, invalid ones dropped) and
/// builds a certificate if at least a quorum remains.
pub fn aggregate_certificate<T: Signable + Clone>(
    committee: &Committee,
    value: &T,
    votes: impl IntoIterator<Item = Vote>,
) -> Result<Certificate<T>, CommitteeError> {
    let digest = value.signing_digest();
    let mut valid = BTreeMap::new();
    for vote in votes {
        if !valid.contains_key(&vote.signer) && vote.verify_digest(committee, &digest) {
            valid.insert(vote.signer, vote);
        }
    }
    if valid.len() < committee.quorum() {
        return Err(CommitteeError::QuorumNotReached {
            have: valid.len(),
            need: committee.quorum(),
        });
    }
    Ok(Certificate {
        value: value.clone(),
        votes: valid.into_values().collect(),
    })
}

/// True iff the certificate carries a quorum of distinct, valid votes over
/// the canonical encoding of its value.
pub fn check_certificate<T: Signable>(committee: &Committee, cert: &Certificate<T>) -> bool {
    let digest = cert.value.signing_digest();
    let mut signers = std::collections::BTreeSet::new();
    for vote in &cert.votes {
        if !signers.insert(vote.signer) || !vote.verify_digest(committee, &digest) {
            return false;
        }
    }
    signers.len() >= committee.quorum()
}

/// A value signed by a client key (`auth_pk[value]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Authenticated<T> {
    pub value: T,
    pub signer: PublicKey,
    pub signature: Signature,
}

impl<T: Signable> Authenticated<T> {
    pub fn new(value: T, key: &KeyPair) -> Self {
        let signature = key.sign(value.signing_digest().as_bytes());
        Self {
            value,
            signer: key.public(),
            signature,
        }
    }

    pub fn verify(&self) -> bool {
        self.signer
            .verify(self.value.signing_digest().as_bytes(), &self.signature)
    }
}

impl<T: Encode> Encode for Authenticated<T> {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.value.encode_to(out);
        self.signer.encode_to(out);
        self.signature.encode_to(out);
    }
}

impl<T: Decode> Decode for Authenticated<T> {
    fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            value: T::decode_from(reader)?,
            signer: PublicKey::decode_from(reader)?,
            signature: Signature::decode_from(reader)?,
        })
    }
}
