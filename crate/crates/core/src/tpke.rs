//! Threshold public-key encryption for sealed bids.
//!
//! Exponential ElGamal over the Ristretto group with a trusted dealer that
//! Shamir-shares the secret key. Messages are small integers (`m < 2^20`),
//! recovered from `m·G` by baby-step/giant-step search after combining.
//!
//! * A ciphertext is `(label, c1 = r·G, c2 = m·G + r·PK)` plus a Schnorr proof
//!   of knowledge of `r` whose challenge commits to the label. The proof is
//!   the well-formedness evidence: a ciphertext cannot be moved to another
//!   label (auction) without knowing `r`.
//! * A decryption share is `μ_i = x_i·c1` with a Chaum-Pedersen proof that
//!   `log_G(VK_i) = log_c1(μ_i)`. The nonce is derived from the key share and
//!   the ciphertext, so re-requesting a share returns the same bytes.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT as G;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use rand::{CryptoRng, RngCore};
use sha2::{Digest as _, Sha512};
use thiserror::Error;

use crate::crypto::Digest;
use crate::encoding::{Decode, DecodeError, Encode, Reader};

/// Exclusive upper bound on plaintexts.
pub const MESSAGE_BOUND: u64 = 1 << 20;
const BABY_STEPS: u64 = 1 << 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TpkeError {
    #[error("threshold {k} outside 1..={n}")]
    BadThreshold { n: usize, k: usize },
    #[error("message {0} is not below the bound {MESSAGE_BOUND}")]
    MessageOutOfRange(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncryptionKey(RistrettoPoint);

impl EncryptionKey {
    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.compress().to_bytes()
    }
}

/// Per-server verification keys `VK_i = x_i·G`, indexed from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationKey {
    shares: Vec<RistrettoPoint>,
    threshold: usize,
}

impl VerificationKey {
    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn servers(&self) -> usize {
        self.shares.len()
    }

    fn share(&self, index: u32) -> Option<&RistrettoPoint> {
        (index as usize)
            .checked_sub(1)
            .and_then(|i| self.shares.get(i))
    }
}

/// Private key share `(i, SK_i)`.
#[derive(Clone)]
pub struct KeyShare {
    pub index: u32,
    secret: Scalar,
}

impl std::fmt::Debug for KeyShare {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyShare").field("index", &self.index).finish()
    }
}

#[derive(Debug, Clone)]
pub struct TpkeSystem {
    pub public: EncryptionKey,
    pub verification: VerificationKey,
    pub shares: Vec<KeyShare>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ciphertext {
    pub label: Digest,
    pub c1: [u8; 32],
    pub c2: [u8; 32],
    pub challenge: [u8; 32],
    pub response: [u8; 32],
}

crate::codec_struct!(Ciphertext {
    label,
    c1,
    c2,
    challenge,
    response
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareProof {
    pub point: [u8; 32],
    pub challenge: [u8; 32],
    pub response: [u8; 32],
}

crate::codec_struct!(ShareProof {
    point,
    challenge,
    response
});

/// `(i, μ̂)`, or `(i, ⊥)` when the ciphertext was malformed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecryptionShare {
    pub index: u32,
    pub body: Option<ShareProof>,
}

crate::codec_struct!(DecryptionShare { index, body });

fn hash_to_scalar(domain: &[u8], parts: &[&[u8]]) -> Scalar {
    let mut hasher = Sha512::new();
    hasher.update(domain);
    for part in parts {
        hasher.update((part.len() as u32).to_le_bytes());
        hasher.update(part);
    }
    Scalar::from_bytes_mod_order_wide(&hasher.finalize().into())
}

fn decompress(bytes: &[u8; 32]) -> Option<RistrettoPoint> {
    CompressedRistretto(*bytes).decompress()
}

fn canonical_scalar(bytes: &[u8; 32]) -> Option<Scalar> {
    Option::from(Scalar::from_canonical_bytes(*bytes))
}

/// `Setup(n, k)`: deals `n` key shares, any `k` of which decrypt.
pub fn setup<R: RngCore + CryptoRng>(
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<TpkeSystem, TpkeError> {
    if k == 0 || k > n {
        return Err(TpkeError::BadThreshold { n, k });
    }
    let coefficients: Vec<Scalar> = (0..k).map(|_| Scalar::random(rng)).collect();
    let evaluate = |x: u64| {
        let x = Scalar::from(x);
        coefficients
            .iter()
            .rev()
            .fold(Scalar::ZERO, |acc, c| acc * x + c)
    };
    let shares: Vec<KeyShare> = (1..=n as u32)
        .map(|index| KeyShare {
            index,
            secret: evaluate(u64::from(index)),
        })
        .collect();
    Ok(TpkeSystem {
        public: EncryptionKey(G * coefficients[0]),
        verification: VerificationKey {
            shares: shares.iter().map(|s| G * s.secret).collect(),
            threshold: k,
        },
        shares,
    })
}

fn encryption_challenge(label: &Digest, c1: &[u8; 32], c2: &[u8; 32], commitment: &[u8; 32]) -> Scalar {
    hash_to_scalar(b"tpke-encrypt", &[label.as_bytes(), c1, c2, commitment])
}

/// `Encrypt(PK, m)` under a label that the ciphertext is bound to.
pub fn encrypt<R: RngCore + CryptoRng>(
    key: &EncryptionKey,
    message: u64,
    label: Digest,
    rng: &mut R,
) -> Result<Ciphertext, TpkeError> {
    if message >= MESSAGE_BOUND {
        return Err(TpkeError::MessageOutOfRange(message));
    }
    let r = Scalar::random(rng);
    let c1 = (G * r).compress().to_bytes();
    let c2 = (G * Scalar::from(message) + key.0 * r).compress().to_bytes();
    let nonce = Scalar::random(rng);
    let commitment = (G * nonce).compress().to_bytes();
    let challenge = encryption_challenge(&label, &c1, &c2, &commitment);
    let response = nonce + challenge * r;
    Ok(Ciphertext {
        label,
        c1,
        c2,
        challenge: challenge.to_bytes(),
        response: response.to_bytes(),
    })
}

impl Ciphertext {
    /// Structural check: both points decode and the proof of knowledge of the
    /// encryption randomness verifies against the label.
    pub fn is_well_formed(&self) -> bool {
        self.points().is_some()
    }

    fn points(&self) -> Option<(RistrettoPoint, RistrettoPoint)> {
        let c1 = decompress(&self.c1)?;
        let c2 = decompress(&self.c2)?;
        let challenge = canonical_scalar(&self.challenge)?;
        let response = canonical_scalar(&self.response)?;
        let commitment = (G * response - c1 * challenge).compress().to_bytes();
        (encryption_challenge(&self.label, &self.c1, &self.c2, &commitment) == challenge)
            .then_some((c1, c2))
    }

    pub fn digest(&self) -> Digest {
        Digest::tagged("tpke-ciphertext", self)
    }
}

fn share_challenge(
    ciphertext: &Digest,
    verification: &RistrettoPoint,
    point: &[u8; 32],
    a1: &[u8; 32],
    a2: &[u8; 32],
) -> Scalar {
    hash_to_scalar(
        b"tpke-share",
        &[
            ciphertext.as_bytes(),
            verification.compress().as_bytes(),
            point,
            a1,
            a2,
        ],
    )
}

/// `ShareDecrypt(PK, i, SK_i, c)`.
pub fn share_decrypt(share: &KeyShare, ciphertext: &Ciphertext) -> DecryptionShare {
    let Some((c1, _)) = ciphertext.points() else {
        return DecryptionShare {
            index: share.index,
            body: None,
        };
    };
    let digest = ciphertext.digest();
    let mu = c1 * share.secret;
    let point = mu.compress().to_bytes();
    let nonce = hash_to_scalar(b"tpke-share-nonce", &[share.secret.as_bytes(), digest.as_bytes()]);
    let a1 = (G * nonce).compress().to_bytes();
    let a2 = (c1 * nonce).compress().to_bytes();
    let verification = G * share.secret;
    let challenge = share_challenge(&digest, &verification, &point, &a1, &a2);
    DecryptionShare {
        index: share.index,
        body: Some(ShareProof {
            point,
            challenge: challenge.to_bytes(),
            response: (nonce + challenge * share.secret).to_bytes(),
        }),
    }
}

/// `ShareVerify(PK, VK, c, μ)`.
pub fn share_verify(
    verification: &VerificationKey,
    ciphertext: &Ciphertext,
    share: &DecryptionShare,
) -> bool {
    verified_point(verification, ciphertext, share).is_some()
}

fn verified_point(
    verification: &VerificationKey,
    ciphertext: &Ciphertext,
    share: &DecryptionShare,
) -> Option<RistrettoPoint> {
    let body = share.body.as_ref()?;
    let vk = verification.share(share.index)?;
    let (c1, _) = ciphertext.points()?;
    let mu = decompress(&body.point)?;
    let challenge = canonical_scalar(&body.challenge)?;
    let response = canonical_scalar(&body.response)?;
    let a1 = (G * response - vk * challenge).compress().to_bytes();
    let a2 = (c1 * response - mu * challenge).compress().to_bytes();
    (share_challenge(&ciphertext.digest(), vk, &body.point, &a1, &a2) == challenge).then_some(mu)
}

fn lagrange_at_zero(index: u32, indices: &[u32]) -> Scalar {
    let xi = Scalar::from(u64::from(index));
    indices
        .iter()
        .filter(|&&j| j != index)
        .fold(Scalar::ONE, |acc, &j| {
            let xj = Scalar::from(u64::from(j));
            acc * xj * (xj - xi).invert()
        })
}

/// `Combine(PK, VK, c, shares)`: plaintext if at least `k` distinct shares
/// verify, `None` otherwise. Invalid shares are ignored.
pub fn combine(
    verification: &VerificationKey,
    ciphertext: &Ciphertext,
    shares: &[DecryptionShare],
) -> Option<u64> {
    let (_, c2) = ciphertext.points()?;
    let mut valid = BTreeMap::new();
    for share in shares {
        if valid.contains_key(&share.index) {
            continue;
        }
        if let Some(point) = verified_point(verification, ciphertext, share) {
            valid.insert(share.index, point);
        }
    }
    if valid.len() < verification.threshold {
        return None;
    }
    let chosen: Vec<(u32, RistrettoPoint)> =
        valid.into_iter().take(verification.threshold).collect();
    let indices: Vec<u32> = chosen.iter().map(|(i, _)| *i).collect();
    let blinding = chosen
        .iter()
        .fold(RistrettoPoint::identity(), |acc, (i, mu)| {
            acc + mu * lagrange_at_zero(*i, &indices)
        });
    discrete_log(c2 - blinding)
}

fn baby_steps() -> &'static HashMap<[u8; 32], u64> {
    static TABLE: OnceLock<HashMap<[u8; 32], u64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = HashMap::with_capacity(BABY_STEPS as usize);
        let mut point = RistrettoPoint::identity();
        for j in 0..BABY_STEPS {
            table.insert(point.compress().to_bytes(), j);
            point += G;
        }
        table
    })
}

/// Finds `m < MESSAGE_BOUND` with `m·G = point`.
fn discrete_log(point: RistrettoPoint) -> Option<u64> {
    let table = baby_steps();
    let giant = G * Scalar::from(BABY_STEPS);
    let mut current = point;
    for i in 0..MESSAGE_BOUND / BABY_STEPS {
        if let Some(j) = table.get(current.compress().as_bytes()) {
            return Some(i * BABY_STEPS + j);
        }
        current -= giant;
    }
    None
}

impl Encode for EncryptionKey {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.to_bytes().encode_to(out);
    }
}

impl Decode for EncryptionKey {
    fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError> {
        decompress(&<[u8; 32]>::decode_from(reader)?)
            .map(Self)
            .ok_or(DecodeError::InvalidValue("ristretto point"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn system(n: usize, k: usize) -> (TpkeSystem, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (setup(n, k, &mut rng).unwrap(), rng)
    }

    fn label() -> Digest {
        Digest::of(b"auction")
    }

    #[test]
    fn setup_rejects_bad_thresholds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            setup(4, 5, &mut rng).unwrap_err(),
            TpkeError::BadThreshold { n: 4, k: 5 }
        );
        assert!(setup(4, 0, &mut rng).is_err());
        let sys = setup(4, 2, &mut rng).unwrap();
        assert_eq!(sys.shares.len(), 4);
        assert_eq!(sys.verification.threshold(), 2);
    }

    #[test]
    fn encryption_is_randomized_and_bounded() {
        let (sys, mut rng) = system(4, 2);
        let a = encrypt(&sys.public, 5, label(), &mut rng).unwrap();
        let b = encrypt(&sys.public, 5, label(), &mut rng).unwrap();
        assert_ne!(a, b);
        for c in [&a, &b] {
            let shares: Vec<_> = sys.shares[..2].iter().map(|s| share_decrypt(s, c)).collect();
            assert_eq!(combine(&sys.verification, c, &shares), Some(5));
        }
        assert_eq!(
            encrypt(&sys.public, MESSAGE_BOUND, label(), &mut rng).unwrap_err(),
            TpkeError::MessageOutOfRange(MESSAGE_BOUND)
        );
    }

    #[test]
    fn largest_message_round_trips() {
        let (sys, mut rng) = system(4, 2);
        let c = encrypt(&sys.public, MESSAGE_BOUND - 1, label(), &mut rng).unwrap();
        let shares: Vec<_> = sys.shares.iter().map(|s| share_decrypt(s, &c)).collect();
        assert_eq!(combine(&sys.verification, &c, &shares), Some(MESSAGE_BOUND - 1));
    }

    #[test]
    fn corrupted_ciphertext_yields_bottom_share() {
        let (sys, mut rng) = system(4, 2);
        let mut c = encrypt(&sys.public, 9, label(), &mut rng).unwrap();
        assert!(c.is_well_formed());
        c.label = Digest::of(b"other auction");
        assert!(!c.is_well_formed());
        let share = share_decrypt(&sys.shares[0], &c);
        assert_eq!(share.index, 1);
        assert!(share.body.is_none());
    }

    #[test]
    fn share_verification() {
        let (sys, mut rng) = system(4, 2);
        let c = encrypt(&sys.public, 3, label(), &mut rng).unwrap();
        let share = share_decrypt(&sys.shares[1], &c);
        assert!(share_verify(&sys.verification, &c, &share));
        assert_eq!(share, share_decrypt(&sys.shares[1], &c));

        // Claimed under the wrong index.
        let mut relabelled = share.clone();
        relabelled.index = 3;
        assert!(!share_verify(&sys.verification, &c, &relabelled));

        // Bit flip in the share point.
        let mut flipped = share.clone();
        flipped.body.as_mut().unwrap().point[0] ^= 1;
        assert!(!share_verify(&sys.verification, &c, &flipped));

        // Replayed against another ciphertext.
        let other = encrypt(&sys.public, 3, label(), &mut rng).unwrap();
        assert!(!share_verify(&sys.verification, &other, &share));
    }

    #[test]
    fn combine_needs_threshold_valid_shares() {
        let (sys, mut rng) = system(4, 2);
        let c = encrypt(&sys.public, 77, label(), &mut rng).unwrap();
        let shares: Vec<_> = sys.shares.iter().map(|s| share_decrypt(s, &c)).collect();
        assert_eq!(combine(&sys.verification, &c, &shares[..1]), None);
        assert_eq!(combine(&sys.verification, &c, &[shares[0].clone(), shares[0].clone()]), None);
        let mut bad = shares[1].clone();
        bad.body.as_mut().unwrap().response[0] ^= 1;
        assert_eq!(combine(&sys.verification, &c, &[shares[0].clone(), bad.clone()]), None);
        assert_eq!(
            combine(&sys.verification, &c, &[bad, shares[0].clone(), shares[3].clone()]),
            Some(77)
        );
    }
}
