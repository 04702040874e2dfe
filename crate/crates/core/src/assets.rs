//! Off-chain assets: certificates binding data to account ids, and their
//! transmutation into new assets.
//!
//! Authorities never store asset payloads. An asset is created by executing a
//! `BindAsset` operation, whose confirmation is answered with a vote on the
//! binding. To transmute, the owner spends every input account with a
//! commitment to the call, then presents the spend certificates; authorities
//! evaluate the execution function and vote on the outputs.

use crate::committee::{check_certificate, Certificate, Committee, Signable};
use crate::crypto::Digest;
use crate::error::ProtocolError;
use crate::ids::AccountId;
use crate::types::{AssetBinding, Operation, RequestCertificate, RequestKind};

/// `A = cert[(id, x)]`.
pub type Asset = Certificate<AssetBinding>;

/// Valid certificate over a well-formed binding. Assets stay valid after
/// their account is deactivated.
pub fn verify_asset(committee: &Committee, asset: &Asset) -> bool {
    !asset.value.id.path().is_empty() && check_certificate(committee, asset)
}

/// `P`: the execution function, its parameters and the inputs it consumes.
/// Every input spend commits to the digest of this value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmuteCall {
    pub function: String,
    pub params: Vec<u8>,
    /// Digests of the input bindings, in argument order.
    pub inputs: Vec<Digest>,
}

crate::codec_struct!(TransmuteCall {
    function,
    params,
    inputs
});

impl Signable for TransmuteCall {
    const DOMAIN: &'static str = "transmute-call";
}

impl TransmuteCall {
    pub fn new(function: &str, params: Vec<u8>, inputs: &[Asset]) -> Self {
        Self {
            function: function.to_owned(),
            params,
            inputs: inputs.iter().map(|asset| asset.digest()).collect(),
        }
    }

    pub fn commitment(&self) -> Digest {
        self.signing_digest()
    }
}

/// Evidence sent along with a `Spend` request so that authorities can refuse
/// to deactivate an input whose transmutation would fail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpendEvidence {
    pub call: TransmuteCall,
    pub inputs: Vec<Asset>,
}

crate::codec_struct!(SpendEvidence { call, inputs });

/// Second step: the certified spends of every input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmuteRequest {
    pub call: TransmuteCall,
    pub inputs: Vec<Asset>,
    /// `spends[i]` deactivates `inputs[i]`'s account.
    pub spends: Vec<RequestCertificate>,
}

crate::codec_struct!(TransmuteRequest {
    call,
    inputs,
    spends
});

type Eval = fn(&[u8], &[&[u8]]) -> Option<Vec<Vec<u8>>>;

/// A deterministic partial function from `(P, x_1..x_l)` to `(x'_1..x'_d)`.
pub struct ExecutionFunction {
    pub name: &'static str,
    /// Accepted number of inputs, inclusive.
    pub arity: (usize, usize),
    pub eval: Eval,
}

/// The registry shared by every authority. Fixed at build time.
pub const REGISTRY: &[ExecutionFunction] = &[
    ExecutionFunction {
        name: "identity",
        arity: (1, 1),
        eval: |_, inputs| Some(vec![inputs[0].to_vec()]),
    },
    ExecutionFunction {
        name: "concat",
        arity: (1, 64),
        eval: |_, inputs| Some(vec![inputs.concat()]),
    },
    ExecutionFunction {
        name: "split",
        arity: (1, 1),
        eval: split,
    },
    ExecutionFunction {
        name: "sum-u64",
        arity: (1, 64),
        eval: sum_u64,
    },
];

/// Parameter: little-endian `u32` cut position, at most the input length.
fn split(params: &[u8], inputs: &[&[u8]]) -> Option<Vec<Vec<u8>>> {
    let at = u32::from_le_bytes(params.try_into().ok()?) as usize;
    let input = inputs[0];
    (at <= input.len()).then(|| vec![input[..at].to_vec(), input[at..].to_vec()])
}

/// Inputs are little-endian `u64` amounts; undefined on malformed inputs or
/// overflow.
fn sum_u64(params: &[u8], inputs: &[&[u8]]) -> Option<Vec<Vec<u8>>> {
    if !params.is_empty() {
        return None;
    }
    let mut total = 0u64;
    for input in inputs {
        total = total.checked_add(u64::from_le_bytes((*input).try_into().ok()?))?;
    }
    Some(vec![total.to_le_bytes().to_vec()])
}

pub fn lookup(name: &str) -> Option<&'static ExecutionFunction> {
    REGISTRY.iter().find(|f| f.name == name)
}

/// Evaluates `f_exec` on the input payloads.
pub fn evaluate(call: &TransmuteCall, inputs: &[Asset]) -> Result<Vec<Vec<u8>>, ProtocolError> {
    let function = lookup(&call.function).ok_or(ProtocolError::UnknownFunction)?;
    let (low, high) = function.arity;
    if inputs.len() < low || inputs.len() > high {
        return Err(ProtocolError::UndefinedExecution);
    }
    let payloads: Vec<&[u8]> = inputs.iter().map(|a| a.value.data.as_slice()).collect();
    (function.eval)(&call.params, &payloads).ok_or(ProtocolError::UndefinedExecution)
}

/// Checks that `inputs` are valid assets matching the call, pairwise distinct
/// accounts, and that `f_exec` is defined on them.
pub fn check_call(
    committee: &Committee,
    call: &TransmuteCall,
    inputs: &[Asset],
) -> Result<Vec<Vec<u8>>, ProtocolError> {
    let digests: Vec<Digest> = inputs.iter().map(|a| a.digest()).collect();
    if digests != call.inputs {
        return Err(ProtocolError::CommitmentMismatch);
    }
    if inputs.iter().any(|asset| !verify_asset(committee, asset)) {
        return Err(ProtocolError::BadAsset);
    }
    let mut ids: Vec<&AccountId> = inputs.iter().map(|a| &a.value.id).collect();
    ids.sort();
    ids.dedup();
    if ids.len() != inputs.len() {
        return Err(ProtocolError::BadAsset);
    }
    evaluate(call, inputs)
}

/// Authority-side check before voting on `Spend { commitment }` from `id`.
pub fn check_spend(
    committee: &Committee,
    id: &AccountId,
    commitment: &Digest,
    evidence: Option<&SpendEvidence>,
) -> Result<(), ProtocolError> {
    let evidence = evidence.ok_or(ProtocolError::MissingEvidence)?;
    if evidence.call.commitment() != *commitment {
        return Err(ProtocolError::CommitmentMismatch);
    }
    if !evidence.inputs.iter().any(|asset| &asset.value.id == id) {
        return Err(ProtocolError::BadAsset);
    }
    check_call(committee, &evidence.call, &evidence.inputs).map(|_| ())
}

/// Output ids: the first input's id, extended by its spend sequence number
/// and then by the output index.
pub fn output_ids(first_input: &AccountId, spend_sequence: u64, count: usize) -> Vec<AccountId> {
    let base = first_input.child(spend_sequence);
    (0..count as u64).map(|i| base.child(i)).collect()
}

/// Authority-side handling of a transmutation: returns the bindings to vote
/// on. Stateless: nothing about the assets is stored.
pub fn transmute(
    committee: &Committee,
    request: &TransmuteRequest,
) -> Result<Vec<AssetBinding>, ProtocolError> {
    let outputs = check_call(committee, &request.call, &request.inputs)?;
    if request.spends.len() != request.inputs.len() {
        return Err(ProtocolError::MissingEvidence);
    }
    let commitment = request.call.commitment();
    for (asset, spend) in request.inputs.iter().zip(&request.spends) {
        let matches = spend.value.kind == RequestKind::Execute
            && spend.value.id == asset.value.id
            && matches!(&spend.value.operation, Operation::Spend { commitment: c } if *c == commitment);
        if !matches {
            return Err(ProtocolError::CommitmentMismatch);
        }
        if !check_certificate(committee, spend) {
            return Err(ProtocolError::BadCertificate);
        }
    }
    let first = &request.spends[0].value;
    let ids = output_ids(&first.id, first.sequence, outputs.len());
    Ok(ids
        .into_iter()
        .zip(outputs)
        .map(|(id, data)| AssetBinding { id, data })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::TestCommittee;

    fn asset(tc: &TestCommittee, id: u64, data: &[u8]) -> Asset {
        tc.certify(&AssetBinding {
            id: AccountId::root(id),
            data: data.to_vec(),
        })
    }

    fn spend(tc: &TestCommittee, id: u64, sequence: u64, call: &TransmuteCall) -> RequestCertificate {
        tc.certify(&crate::types::Request::new(
            AccountId::root(id),
            sequence,
            Operation::Spend {
                commitment: call.commitment(),
            },
        ))
    }

    #[test]
    fn identity_keeps_payload_under_new_id() {
        let tc = TestCommittee::new(4);
        let input = asset(&tc, 1, b"meta");
        let call = TransmuteCall::new("identity", Vec::new(), &[input.clone()]);
        let request = TransmuteRequest {
            spends: vec![spend(&tc, 1, 2, &call)],
            call,
            inputs: vec![input],
        };
        let outputs = transmute(&tc.committee, &request).unwrap();
        assert_eq!(
            outputs,
            vec![AssetBinding {
                id: AccountId::root(1).child(2).child(0),
                data: b"meta".to_vec(),
            }]
        );
        // Replaying yields identical outputs.
        assert_eq!(transmute(&tc.committee, &request).unwrap(), outputs);
    }

    #[test]
    fn partial_functions_are_rejected() {
        let tc = TestCommittee::new(4);
        let input = asset(&tc, 1, b"abc");
        let call = TransmuteCall::new("split", 9u32.to_le_bytes().to_vec(), &[input.clone()]);
        assert_eq!(
            check_call(&tc.committee, &call, &[input.clone()]),
            Err(ProtocolError::UndefinedExecution)
        );
        let call = TransmuteCall::new("split", 1u32.to_le_bytes().to_vec(), &[input.clone()]);
        assert_eq!(
            check_call(&tc.committee, &call, &[input.clone()]).unwrap(),
            vec![b"a".to_vec(), b"bc".to_vec()]
        );
        let call = TransmuteCall::new("sum-u64", Vec::new(), &[input.clone()]);
        assert_eq!(
            check_call(&tc.committee, &call, &[input.clone()]),
            Err(ProtocolError::UndefinedExecution)
        );
        let call = TransmuteCall::new("nope", Vec::new(), &[input.clone()]);
        assert_eq!(
            check_call(&tc.committee, &call, &[input]),
            Err(ProtocolError::UnknownFunction)
        );
    }

    #[test]
    fn spend_evidence_must_match_commitment() {
        let tc = TestCommittee::new(4);
        let input = asset(&tc, 1, b"x");
        let call = TransmuteCall::new("identity", Vec::new(), &[input.clone()]);
        let evidence = SpendEvidence {
            call: call.clone(),
            inputs: vec![input],
        };
        let id = AccountId::root(1);
        assert_eq!(
            check_spend(&tc.committee, &id, &call.commitment(), Some(&evidence)),
            Ok(())
        );
        assert_eq!(
            check_spend(&tc.committee, &id, &Digest([0; 32]), Some(&evidence)),
            Err(ProtocolError::CommitmentMismatch)
        );
        assert_eq!(
            check_spend(&tc.committee, &id, &call.commitment(), None),
            Err(ProtocolError::MissingEvidence)
        );
        assert_eq!(
            check_spend(&tc.committee, &AccountId::root(2), &call.commitment(), Some(&evidence)),
            Err(ProtocolError::BadAsset)
        );
    }

    #[test]
    fn forged_assets_fail_verification() {
        let tc = TestCommittee::new(4);
        let mut forged = asset(&tc, 1, b"x");
        assert!(verify_asset(&tc.committee, &forged));
        forged.value.data.push(0);
        assert!(!verify_asset(&tc.committee, &forged));
    }
}
