//! Sellers and bidders of a sealed-bid auction.

use serde::Deserialize;

use super::swap::wait_for_board;
use super::{ClientContext, ClientError, ClientOutcome};
use crate::auction::{bid_label, sealed_bid, EndOfAuction, EndOfBidding, PriceRule, RevealedBid};
use crate::committee::{Authenticated, Certificate};
use crate::crypto::KeyPair;
use crate::error::ProtocolError;
use crate::ids::AccountId;
use crate::protocol::{ClientMessage, Response};
use crate::tpke::{self, DecryptionShare, VerificationKey};
use crate::types::{Amount, Operation, RequestCertificate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SellerBehavior {
    #[default]
    Honest,
    /// Disappears once bidding is closed.
    Stall,
    /// First claims a lower value for the best bid, then gives up and
    /// reports truthfully.
    Misreport,
}

#[derive(Debug, Clone)]
pub struct SellerSide {
    pub name: String,
    pub item: AccountId,
    pub key: KeyPair,
    pub rule: PriceRule,
    pub proceeds: AccountId,
    pub bidding_time: u64,
    pub behavior: SellerBehavior,
    pub verification: VerificationKey,
}

#[derive(Debug, Clone)]
pub struct BidderSide {
    pub name: String,
    pub auction: String,
    pub account: AccountId,
    pub key: KeyPair,
    pub deposit: Amount,
    pub value: u64,
    /// How long to wait for the auction to be announced.
    pub patience: u64,
}

pub async fn run_seller(context: ClientContext, side: SellerSide) -> ClientOutcome {
    let name = side.name.clone();
    seller(&context, &side)
        .await
        .map_err(|error| format!("{name}: {error}"))
        .into()
}

async fn seller(context: &ClientContext, side: &SellerSide) -> Result<String, ClientError> {
    let name = side.name.as_str();
    let info = context.account_info(&side.item).await?;
    let auction = side.item.child(info.next_sequence);
    context
        .execute(
            &side.key,
            &side.item,
            info.next_sequence,
            Operation::CreateAuction {
                auction: auction.clone(),
                rule: side.rule,
                proceeds: side.proceeds.clone(),
            },
            None,
        )
        .await?;
    context
        .board
        .borrow_mut()
        .auctions
        .entry(name.to_owned())
        .or_default()
        .auction = Some(auction.clone());
    context.sleep(side.bidding_time).await;

    let bids: Vec<RequestCertificate> = context
        .board
        .borrow()
        .auctions
        .get(name)
        .map(|post| post.bids.clone())
        .unwrap_or_default();
    let bids: Vec<RequestCertificate> = bids
        .into_iter()
        .filter(|cert| sealed_bid(cert).is_some_and(|bid| *bid.auction == auction))
        .collect();
    let value = EndOfBidding::new(auction.clone(), bids);
    let end_of_bidding = context
        .certify(
            "end of bidding",
            ClientMessage::EndOfBidding {
                request: Authenticated::new(value.clone(), &side.key),
            },
            &value,
        )
        .await?;
    if side.behavior == SellerBehavior::Stall {
        return Ok(format!(
            "{name}: closed bidding on {auction} with {} bids and stopped",
            value.bids.len()
        ));
    }

    let shares = reveal_shares(context, &end_of_bidding).await?;
    let revealed: Vec<RevealedBid> = end_of_bidding
        .value
        .bids
        .iter()
        .zip(&shares)
        .map(|(cert, shares)| {
            let bid = sealed_bid(cert).expect("filtered above");
            RevealedBid {
                bidder: bid.bidder.clone(),
                submission: cert.digest(),
                deposit: bid.deposit,
                item_key: bid.item_key,
                value: tpke::combine(&side.verification, bid.ciphertext, shares),
            }
        })
        .collect();

    let mut rejected_lie = false;
    if side.behavior == SellerBehavior::Misreport {
        let best = (0..revealed.len()).max_by_key(|&i| revealed[i].eligible_value());
        if let Some(best) = best {
            let mut lie = revealed.clone();
            lie[best].value = Some(lie[best].value.unwrap_or(0) / 2);
            let result = end_of_auction(context, side, &end_of_bidding, lie, &shares).await;
            match result {
                Err(ClientError::Rejected {
                    error: ProtocolError::DecryptionMismatch,
                    ..
                }) => rejected_lie = true,
                Err(error) => return Err(error),
                Ok(_) => {
                    return Err(ClientError::Protocol(
                        "misreported values were certified".into(),
                    ))
                }
            }
        }
    }

    let settlement = end_of_auction(context, side, &end_of_bidding, revealed, &shares).await?;
    context
        .acknowledge(
            "settlement",
            ClientMessage::Settle {
                cert: settlement.clone(),
            },
        )
        .await?;
    context
        .board
        .borrow_mut()
        .auctions
        .entry(name.to_owned())
        .or_default()
        .settlement = Some(settlement.clone());
    let outcome = crate::auction::settle(side.rule, &settlement.value.bids);
    let winner = outcome
        .winner
        .map(|w| settlement.value.bids[w].bidder.to_string())
        .unwrap_or_else(|| "nobody".into());
    let lie = if rejected_lie { " after a rejected misreport" } else { "" };
    Ok(format!(
        "{name}: settled {auction}{lie}; winner {winner} at price {}",
        outcome.price
    ))
}

/// Decryption shares of every included bid from a quorum, indexed by bid.
async fn reveal_shares(
    context: &ClientContext,
    end_of_bidding: &Certificate<EndOfBidding>,
) -> Result<Vec<Vec<DecryptionShare>>, ClientError> {
    let count = end_of_bidding.value.bids.len();
    let answers = context
        .gather(
            "share reveal",
            ClientMessage::RevealShares {
                cert: end_of_bidding.clone(),
            },
            context.committee.quorum(),
            |_, response| match response {
                Response::Shares { shares } if shares.len() == count => Some(shares.clone()),
                _ => None,
            },
        )
        .await?;
    let mut by_bid = vec![Vec::new(); count];
    for (_, shares) in answers {
        for (slot, share) in by_bid.iter_mut().zip(shares) {
            slot.push(share);
        }
    }
    Ok(by_bid)
}

async fn end_of_auction(
    context: &ClientContext,
    side: &SellerSide,
    end_of_bidding: &Certificate<EndOfBidding>,
    bids: Vec<RevealedBid>,
    shares: &[Vec<DecryptionShare>],
) -> Result<Certificate<EndOfAuction>, ClientError> {
    let value = EndOfAuction {
        auction: end_of_bidding.value.auction.clone(),
        end_of_bidding: end_of_bidding.digest(),
        item: side.item.clone(),
        seller: side.key.public(),
        rule: side.rule,
        proceeds: side.proceeds.clone(),
        bids,
    };
    context
        .certify(
            "end of auction",
            ClientMessage::EndOfAuction {
                request: Authenticated::new(value.clone(), &side.key),
                end_of_bidding: end_of_bidding.clone(),
                shares: shares.to_vec(),
            },
            &value,
        )
        .await
}

pub async fn run_bidder(context: ClientContext, side: BidderSide) -> ClientOutcome {
    let name = side.name.clone();
    bidder(&context, &side)
        .await
        .map_err(|error| format!("{name}: {error}"))
        .into()
}

async fn bidder(context: &ClientContext, side: &BidderSide) -> Result<String, ClientError> {
    let deadline = context.now() + side.patience;
    let auction = wait_for_board(context, deadline, |board| {
        board.auctions.get(&side.auction).and_then(|post| post.auction.clone())
    })
    .await
    .ok_or_else(|| ClientError::Stalled(format!("auction {} never opened", side.auction)))?;
    let label = bid_label(&auction);
    let ciphertext = context
        .with_rng(|rng| tpke::encrypt(&context.encryption, side.value, label, rng))
        .map_err(|e| ClientError::Protocol(e.to_string()))?;
    let item_key = context.fresh_key();
    let info = context.account_info(&side.account).await?;
    let (cert, _) = context
        .execute(
            &side.key,
            &side.account,
            info.next_sequence,
            Operation::SubmitBid {
                auction: auction.clone(),
                deposit: side.deposit,
                ciphertext,
                item_key: item_key.public(),
            },
            None,
        )
        .await?;
    context
        .board
        .borrow_mut()
        .auctions
        .entry(side.auction.clone())
        .or_default()
        .bids
        .push(cert);
    Ok(format!(
        "{}: bid {} with deposit {} on {auction}",
        side.name, side.value, side.deposit
    ))
}
