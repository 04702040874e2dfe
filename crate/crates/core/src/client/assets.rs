//! Binding, spending and transmuting off-chain assets.

use super::{ClientContext, ClientError, ClientOutcome};
use crate::assets::{evaluate, output_ids, Asset, SpendEvidence, TransmuteCall, TransmuteRequest};
use crate::committee::{aggregate_certificate, Signable};
use crate::crypto::KeyPair;
use crate::encoding::Encode;
use crate::ids::AccountId;
use crate::protocol::{ClientMessage, Response};
use crate::types::{AssetBinding, Operation, RequestCertificate};

#[derive(Debug, Clone)]
pub struct TransmuteSide {
    pub name: String,
    /// Input accounts, their owner keys and the payload to bind to each.
    pub inputs: Vec<(AccountId, KeyPair, Vec<u8>)>,
    pub function: String,
    pub params: Vec<u8>,
}

/// Executes `BindAsset` and aggregates the asset votes returned with the
/// confirmations.
pub async fn bind_asset(
    context: &ClientContext,
    key: &KeyPair,
    id: &AccountId,
    data: Vec<u8>,
) -> Result<Asset, ClientError> {
    let info = context.account_info(id).await?;
    let cert = context
        .certify_request(
            key,
            id,
            info.next_sequence,
            Operation::BindAsset { data: data.clone() },
            None,
        )
        .await?;
    let binding = AssetBinding {
        id: id.clone(),
        data,
    };
    let digest = binding.signing_digest();
    let committee = context.committee.clone();
    let votes = context
        .gather(
            "asset binding",
            ClientMessage::Confirmation { cert },
            committee.quorum(),
            |from, response| match response {
                Response::Done {
                    asset_vote: Some(vote),
                } if vote.signer == from && vote.verify_digest(&committee, &digest) => Some(*vote),
                _ => None,
            },
        )
        .await?;
    aggregate_certificate(&committee, &binding, votes.into_iter().map(|(_, v)| v))
        .map_err(|e| ClientError::Protocol(e.to_string()))
}

/// Spends `id` with a commitment to `call`.
pub async fn spend(
    context: &ClientContext,
    key: &KeyPair,
    id: &AccountId,
    call: &TransmuteCall,
    inputs: &[Asset],
) -> Result<RequestCertificate, ClientError> {
    let info = context.account_info(id).await?;
    let evidence = SpendEvidence {
        call: call.clone(),
        inputs: inputs.to_vec(),
    };
    let (cert, _) = context
        .execute(
            key,
            id,
            info.next_sequence,
            Operation::Spend {
                commitment: call.commitment(),
            },
            Some(evidence),
        )
        .await?;
    Ok(cert)
}

/// Collects a quorum of votes on every output binding.
pub async fn request_outputs(
    context: &ClientContext,
    request: &TransmuteRequest,
) -> Result<Vec<Asset>, ClientError> {
    let payloads = evaluate(&request.call, &request.inputs).map_err(|error| ClientError::Rejected {
        what: "transmutation",
        error,
    })?;
    let first = &request.spends[0].value;
    let bindings: Vec<AssetBinding> = output_ids(&first.id, first.sequence, payloads.len())
        .into_iter()
        .zip(payloads)
        .map(|(id, data)| AssetBinding { id, data })
        .collect();
    let digests: Vec<_> = bindings.iter().map(Signable::signing_digest).collect();
    let committee = context.committee.clone();
    let answers = context
        .gather(
            "transmutation",
            ClientMessage::Transmute {
                request: request.clone(),
            },
            committee.quorum(),
            |from, response| match response {
                Response::Votes { votes }
                    if votes.len() == digests.len()
                        && votes.iter().zip(&digests).all(|(vote, digest)| {
                            vote.signer == from && vote.verify_digest(&committee, digest)
                        }) =>
                {
                    Some(votes.clone())
                }
                _ => None,
            },
        )
        .await?;
    bindings
        .iter()
        .enumerate()
        .map(|(i, binding)| {
            aggregate_certificate(&committee, binding, answers.iter().map(|(_, votes)| votes[i]))
                .map_err(|e| ClientError::Protocol(e.to_string()))
        })
        .collect()
}

pub async fn run_transmutation(context: ClientContext, side: TransmuteSide) -> ClientOutcome {
    let name = side.name.clone();
    transmutation(&context, &side)
        .await
        .map_err(|error| format!("{name}: {error}"))
        .into()
}

async fn transmutation(context: &ClientContext, side: &TransmuteSide) -> Result<String, ClientError> {
    let mut assets = Vec::new();
    for (id, key, data) in &side.inputs {
        assets.push(bind_asset(context, key, id, data.clone()).await?);
    }
    let call = TransmuteCall::new(&side.function, side.params.clone(), &assets);
    let mut spends = Vec::new();
    for (id, key, _) in &side.inputs {
        spends.push(spend(context, key, id, &call, &assets).await?);
    }
    let request = TransmuteRequest {
        call,
        inputs: assets,
        spends,
    };
    let outputs = request_outputs(context, &request).await?;
    // A second evaluation of the same spends must name the same outputs.
    let again = request_outputs(context, &request).await?;
    let values = |outputs: &[Asset]| -> Vec<u8> {
        outputs.iter().map(|a| a.value.clone()).collect::<Vec<_>>().to_bytes()
    };
    if values(&outputs) != values(&again) {
        return Err(ClientError::Protocol("replayed transmutation produced other outputs".into()));
    }
    let ids: Vec<String> = outputs.iter().map(|a| a.value.id.to_string()).collect();
    context.note(format!(
        "{}: outputs {}",
        side.name,
        crate::crypto::Digest::of(&values(&outputs)).short()
    ));
    Ok(format!(
        "{}: {} over {} inputs produced [{}]",
        side.name,
        side.function,
        side.inputs.len(),
        ids.join(", ")
    ))
}
