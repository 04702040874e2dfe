//! Sealed-bid first- and second-price auctions.
//!
//! The item is an account frozen by `CreateAuction`; the auction object lives
//! at the derived id `item :: n` and doubles as the escrow account for bid
//! deposits. Bids are threshold-encrypted under the committee key. The seller
//! closes bidding with a certified list of bids, collects decryption shares,
//! and submits the revealed values; settlement pays the seller out of the
//! winner's deposit, refunds everything else and hands over the item.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::accounts::{effect_origin, CrossShardRequest, Effect, LogEntry};
use crate::committee::{check_certificate, Authenticated, Certificate, Committee, Signable};
use crate::crypto::{Digest, PublicKey};
use crate::error::ProtocolError;
use crate::ids::AccountId;
use crate::tpke::{self, Ciphertext, DecryptionShare, KeyShare, VerificationKey};
use crate::types::{Amount, Operation, RequestCertificate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriceRule {
    FirstPrice,
    SecondPrice,
}

crate::codec_enum!(PriceRule {
    0 => FirstPrice,
    1 => SecondPrice,
});

/// Label binding a bid ciphertext to one auction.
pub fn bid_label(auction: &AccountId) -> Digest {
    Digest::tagged("bid-label", auction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Bidding,
    Revealing,
    Settled,
}

/// The fields of a certified `SubmitBid` request.
#[derive(Debug, Clone, Copy)]
pub struct SealedBid<'a> {
    pub auction: &'a AccountId,
    pub bidder: &'a AccountId,
    pub deposit: Amount,
    pub ciphertext: &'a Ciphertext,
    pub item_key: PublicKey,
}

pub fn sealed_bid(cert: &RequestCertificate) -> Option<SealedBid<'_>> {
    match &cert.value.operation {
        Operation::SubmitBid {
            auction,
            deposit,
            ciphertext,
            item_key,
        } => Some(SealedBid {
            auction,
            bidder: &cert.value.id,
            deposit: *deposit,
            ciphertext,
            item_key: *item_key,
        }),
        _ => None,
    }
}

/// The seller's end-of-bidding message: the submission certificates it
/// chose to include, sorted by digest without duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndOfBidding {
    pub auction: AccountId,
    pub bids: Vec<RequestCertificate>,
}

crate::codec_struct!(EndOfBidding { auction, bids });

impl Signable for EndOfBidding {
    const DOMAIN: &'static str = "end-of-bidding";
}

impl EndOfBidding {
    pub fn new(auction: AccountId, mut bids: Vec<RequestCertificate>) -> Self {
        bids.sort_by_cached_key(|cert| cert.digest());
        bids.dedup_by_key(|cert| cert.digest());
        Self { auction, bids }
    }

    pub fn is_canonical(&self) -> bool {
        self.bids
            .windows(2)
            .all(|pair| pair[0].digest() < pair[1].digest())
    }
}

/// An included bid with its decrypted value (`None` if the plaintext is out
/// of range).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RevealedBid {
    pub bidder: AccountId,
    pub submission: Digest,
    pub deposit: Amount,
    pub item_key: PublicKey,
    pub value: Option<u64>,
}

crate::codec_struct!(RevealedBid {
    bidder,
    submission,
    deposit,
    item_key,
    value
});

impl RevealedBid {
    /// Bids above their deposit cannot be paid for and are ignored.
    pub fn eligible_value(&self) -> Option<u64> {
        self.value.filter(|value| *value <= self.deposit)
    }
}

/// The seller's end-of-auction message. Everything settlement needs is in
/// here, so any authority can settle from the certificate alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndOfAuction {
    pub auction: AccountId,
    pub end_of_bidding: Digest,
    pub item: AccountId,
    pub seller: PublicKey,
    pub rule: PriceRule,
    pub proceeds: AccountId,
    /// In the order of the end-of-bidding certificate.
    pub bids: Vec<RevealedBid>,
}

crate::codec_struct!(EndOfAuction {
    auction,
    end_of_bidding,
    item,
    seller,
    rule,
    proceeds,
    bids
});

impl Signable for EndOfAuction {
    const DOMAIN: &'static str = "end-of-auction";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Outcome {
    /// Index into the revealed bids.
    pub winner: Option<usize>,
    pub price: Amount,
}

/// Winner and price. The highest eligible bid wins, ties going to the
/// smallest bidder id and then the smallest submission digest. First price
/// pays its bid; second price pays the best other eligible bid, or 0.
pub fn settle(rule: PriceRule, bids: &[RevealedBid]) -> Outcome {
    let key = |i: usize| {
        let bid = &bids[i];
        (
            std::cmp::Reverse(bid.eligible_value()),
            &bid.bidder,
            bid.submission,
        )
    };
    let mut best: Option<usize> = None;
    let mut runner_up: Option<u64> = None;
    for (i, bid) in bids.iter().enumerate() {
        let Some(value) = bid.eligible_value() else {
            continue;
        };
        match best {
            Some(b) if key(b) <= key(i) => {
                runner_up = runner_up.max(Some(value));
            }
            Some(b) => {
                runner_up = runner_up.max(bids[b].eligible_value());
                best = Some(i);
            }
            None => best = Some(i),
        }
    }
    let price = match (best, rule) {
        (None, _) => 0,
        (Some(b), PriceRule::FirstPrice) => bids[b].eligible_value().unwrap_or(0),
        (Some(_), PriceRule::SecondPrice) => runner_up.unwrap_or(0),
    };
    Outcome {
        winner: best,
        price,
    }
}

/// A deposit held in escrow by the auction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HeldBid {
    pub bidder: AccountId,
    pub deposit: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuctionState {
    pub seller: PublicKey,
    pub item: AccountId,
    pub rule: PriceRule,
    pub proceeds: AccountId,
    pub phase: Phase,
    /// Deposits by submission digest.
    pub escrow: BTreeMap<Digest, HeldBid>,
    /// The end-of-bidding value this authority signed, if any.
    pub voted_end_of_bidding: Option<EndOfBidding>,
    pub end_of_bidding: Option<Certificate<EndOfBidding>>,
    /// This authority's decryption shares, one per included bid.
    pub shares: Option<Vec<DecryptionShare>>,
}

/// What remains of an auction after settlement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SettledAuction {
    pub settlement: Certificate<EndOfAuction>,
    pub outcome: Outcome,
}

impl AuctionState {
    pub fn new(seller: PublicKey, item: AccountId, rule: PriceRule, proceeds: AccountId) -> Self {
        Self {
            seller,
            item,
            rule,
            proceeds,
            phase: Phase::Bidding,
            escrow: BTreeMap::new(),
            voted_end_of_bidding: None,
            end_of_bidding: None,
            shares: None,
        }
    }

    pub fn escrow_total(&self) -> u128 {
        self.escrow.values().map(|bid| u128::from(bid.deposit)).sum()
    }

    fn check_seller<T: Signable>(&self, auth: &Authenticated<T>) -> Result<(), ProtocolError> {
        if !auth.verify() {
            return Err(ProtocolError::BadAuth);
        }
        if auth.signer != self.seller {
            return Err(ProtocolError::NotSeller);
        }
        Ok(())
    }

    /// Seller asks to close bidding. On success the caller votes for the
    /// returned canonical value and this authority accepts no more bids.
    pub fn handle_end_of_bidding(
        &mut self,
        committee: &Committee,
        auction: &AccountId,
        request: &Authenticated<EndOfBidding>,
    ) -> Result<EndOfBidding, ProtocolError> {
        self.check_seller(request)?;
        if &request.value.auction != auction {
            return Err(ProtocolError::UnknownAuction);
        }
        let value = EndOfBidding::new(auction.clone(), request.value.bids.clone());
        for cert in &value.bids {
            let valid = sealed_bid(cert).is_some_and(|bid| bid.auction == auction)
                && check_certificate(committee, cert);
            if !valid {
                return Err(ProtocolError::BadBidCert);
            }
        }
        let already_agreed = self.voted_end_of_bidding.as_ref() == Some(&value)
            || self
                .end_of_bidding
                .as_ref()
                .is_some_and(|cert| cert.value == value);
        match self.phase {
            Phase::Bidding => {
                self.phase = Phase::Revealing;
                self.voted_end_of_bidding = Some(value.clone());
                Ok(value)
            }
            Phase::Revealing if already_agreed => Ok(value),
            _ => Err(ProtocolError::WrongPhase),
        }
    }

    /// Records a certified end of bidding (idempotent).
    pub fn record_end_of_bidding(
        &mut self,
        committee: &Committee,
        auction: &AccountId,
        cert: &Certificate<EndOfBidding>,
    ) -> Result<(), ProtocolError> {
        if &cert.value.auction != auction
            || !cert.value.is_canonical()
            || !check_certificate(committee, cert)
        {
            return Err(ProtocolError::BadCertificate);
        }
        match &self.end_of_bidding {
            Some(existing) if existing.value == cert.value => Ok(()),
            Some(_) => Err(ProtocolError::BadCertificate),
            None => {
                self.phase = self.phase.max(Phase::Revealing);
                self.end_of_bidding = Some(cert.clone());
                Ok(())
            }
        }
    }

    /// This authority's decryption share for every included bid, computed
    /// once and cached.
    pub fn release_shares(&mut self, key: &KeyShare) -> Result<Vec<DecryptionShare>, ProtocolError> {
        let cert = self
            .end_of_bidding
            .as_ref()
            .ok_or(ProtocolError::BadCertificate)?;
        let shares = self.shares.get_or_insert_with(|| {
            cert.value
                .bids
                .iter()
                .map(|bid| {
                    let ciphertext = sealed_bid(bid).expect("checked at end of bidding").ciphertext;
                    tpke::share_decrypt(key, ciphertext)
                })
                .collect()
        });
        Ok(shares.clone())
    }

    /// Seller submits the revealed bids. `shares[i]` must hold enough valid
    /// decryption shares of bid `i` to pin down its plaintext, and the
    /// plaintexts must match the claimed values. On success the caller votes
    /// on the request's value.
    pub fn handle_end_of_auction(
        &mut self,
        committee: &Committee,
        verification: &VerificationKey,
        auction: &AccountId,
        request: &Authenticated<EndOfAuction>,
        end_of_bidding: &Certificate<EndOfBidding>,
        shares: &[Vec<DecryptionShare>],
    ) -> Result<(), ProtocolError> {
        self.check_seller(request)?;
        if self.phase == Phase::Settled {
            return Err(ProtocolError::WrongPhase);
        }
        self.record_end_of_bidding(committee, auction, end_of_bidding)?;
        let value = &request.value;
        let included = &end_of_bidding.value.bids;
        let header_matches = &value.auction == auction
            && value.end_of_bidding == end_of_bidding.digest()
            && value.item == self.item
            && value.seller == self.seller
            && value.rule == self.rule
            && value.proceeds == self.proceeds
            && value.bids.len() == included.len()
            && shares.len() == included.len();
        if !header_matches {
            return Err(ProtocolError::DecryptionMismatch);
        }
        for ((revealed, cert), bid_shares) in value.bids.iter().zip(included).zip(shares) {
            let bid = sealed_bid(cert).expect("checked at end of bidding");
            let same_bid = revealed.bidder == *bid.bidder
                && revealed.submission == cert.digest()
                && revealed.deposit == bid.deposit
                && revealed.item_key == bid.item_key;
            if !same_bid {
                return Err(ProtocolError::DecryptionMismatch);
            }
            let mut valid: Vec<u32> = bid_shares
                .iter()
                .filter(|share| tpke::share_verify(verification, bid.ciphertext, share))
                .map(|share| share.index)
                .collect();
            valid.sort_unstable();
            valid.dedup();
            if valid.len() < verification.threshold() {
                return Err(ProtocolError::DecryptionMismatch);
            }
            if tpke::combine(verification, bid.ciphertext, bid_shares) != revealed.value {
                return Err(ProtocolError::DecryptionMismatch);
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> AuctionSummary {
        AuctionSummary {
            seller: hex::encode(self.seller.0),
            item: self.item.to_string(),
            rule: self.rule,
            proceeds: self.proceeds.to_string(),
            phase: self.phase,
            escrow: self
                .escrow
                .iter()
                .map(|(digest, bid)| (digest.to_hex(), bid.clone()))
                .collect(),
            end_of_bidding: self.end_of_bidding.as_ref().map(|cert| cert.digest()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuctionSummary {
    pub seller: String,
    pub item: String,
    pub rule: PriceRule,
    pub proceeds: String,
    pub phase: Phase,
    pub escrow: BTreeMap<String, HeldBid>,
    pub end_of_bidding: Option<Digest>,
}

fn credit(
    target: &AccountId,
    origin: Digest,
    amount: Amount,
    settlement: &Certificate<EndOfAuction>,
) -> Option<CrossShardRequest> {
    (amount > 0).then(|| CrossShardRequest {
        target: target.clone(),
        origin,
        effect: Effect::Credit {
            amount,
            log: LogEntry::Settlement {
                cert: settlement.clone(),
            },
        },
    })
}

impl SettledAuction {
    pub fn new(settlement: Certificate<EndOfAuction>) -> Self {
        let outcome = settle(settlement.value.rule, &settlement.value.bids);
        Self {
            settlement,
            outcome,
        }
    }

    /// Credits releasing one escrowed deposit: the bidder gets back what it
    /// does not owe and the winner's price goes to the seller's proceeds
    /// account. Bids left out by the seller are refunded in full.
    pub fn release(&self, submission: &Digest, held: &HeldBid) -> Vec<CrossShardRequest> {
        let digest = self.settlement.digest();
        let won = self
            .outcome
            .winner
            .is_some_and(|w| self.settlement.value.bids[w].submission == *submission);
        let price = if won { self.outcome.price } else { 0 };
        let refund = Digest::tagged("auction-refund", &(digest, *submission));
        let proceeds = Digest::tagged("auction-proceeds", &(digest, *submission));
        [
            credit(&held.bidder, refund, held.deposit - price, &self.settlement),
            credit(&self.settlement.value.proceeds, proceeds, price, &self.settlement),
        ]
        .into_iter()
        .flatten()
        .collect()
    }

    /// The effect handing the item account to the winner, or back to the
    /// seller when nobody won.
    pub fn reassign_item(&self) -> CrossShardRequest {
        let value = &self.settlement.value;
        let owner = match self.outcome.winner {
            Some(w) => value.bids[w].item_key,
            None => value.seller,
        };
        CrossShardRequest {
            target: value.item.clone(),
            origin: effect_origin(&self.settlement.digest(), 0),
            effect: Effect::Reassign {
                owner,
                settlement: self.settlement.clone(),
            },
        }
    }
}

/// Checks a settlement certificate for `auction`.
pub fn check_settlement(
    committee: &Committee,
    auction: &AccountId,
    cert: &Certificate<EndOfAuction>,
) -> Result<(), ProtocolError> {
    if &cert.value.auction != auction {
        return Err(ProtocolError::UnknownAuction);
    }
    if !check_certificate(committee, cert) {
        return Err(ProtocolError::BadCertificate);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::client_key;

    fn bid(bidder: u64, value: Option<u64>, deposit: u64) -> RevealedBid {
        RevealedBid {
            bidder: AccountId::root(bidder),
            submission: Digest::tagged("test-submission", &bidder),
            deposit,
            item_key: client_key(bidder).public(),
            value,
        }
    }

    fn values(values: &[u64]) -> Vec<RevealedBid> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| bid(i as u64 + 1, Some(*v), 100))
            .collect()
    }

    #[test]
    fn second_price_pays_runner_up() {
        let outcome = settle(PriceRule::SecondPrice, &values(&[5, 3, 2]));
        assert_eq!(outcome, Outcome { winner: Some(0), price: 3 });
        let outcome = settle(PriceRule::SecondPrice, &values(&[2, 3, 5]));
        assert_eq!(outcome, Outcome { winner: Some(2), price: 3 });
    }

    #[test]
    fn first_price_pays_own_bid() {
        let outcome = settle(PriceRule::FirstPrice, &values(&[5, 3, 2]));
        assert_eq!(outcome, Outcome { winner: Some(0), price: 5 });
    }

    #[test]
    fn single_second_price_bid_is_free() {
        let outcome = settle(PriceRule::SecondPrice, &values(&[5]));
        assert_eq!(outcome, Outcome { winner: Some(0), price: 0 });
    }

    #[test]
    fn no_bids_no_sale() {
        assert_eq!(
            settle(PriceRule::FirstPrice, &[]),
            Outcome { winner: None, price: 0 }
        );
    }

    #[test]
    fn ties_go_to_smallest_bidder_and_price_is_the_tied_value() {
        let bids = vec![bid(7, Some(5), 10), bid(3, Some(5), 10), bid(5, Some(1), 10)];
        let outcome = settle(PriceRule::SecondPrice, &bids);
        assert_eq!(outcome, Outcome { winner: Some(1), price: 5 });
    }

    #[test]
    fn bids_above_deposit_or_unreadable_are_ignored() {
        let bids = vec![bid(1, Some(9), 8), bid(2, None, 50), bid(3, Some(4), 4)];
        let outcome = settle(PriceRule::SecondPrice, &bids);
        assert_eq!(outcome, Outcome { winner: Some(2), price: 0 });
    }

    #[test]
    fn end_of_bidding_is_canonical() {
        let a = EndOfBidding::new(AccountId::root(1), Vec::new());
        assert!(a.is_canonical());
    }
}
