//! Trace files.
//!
//! A trace is an append-only list of [`TraceEvent`]s in scheduler order.
//! Each event names its payload by digest; payloads live in a separate
//! content-addressed store so that repeated messages are stored once.
//! Both files use the canonical encoding (see `docs/encoding.md`).

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::accounts::CrossShardRequest;
use crate::crypto::Digest;
use crate::encoding::{Decode, DecodeError, Encode, Reader};
use crate::ids::AccountId;
use crate::protocol::{ClientMessage, Response};

pub const TRACE_MAGIC: [u8; 8] = *b"SSWTRACE";
pub const PAYLOAD_MAGIC: [u8; 8] = *b"SSWPAYLD";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Actor {
    Authority { index: u16 },
    Client { index: u32 },
    Simulator,
}

crate::codec_enum!(Actor {
    0 => Authority { index },
    1 => Client { index },
    2 => Simulator,
});

impl std::fmt::Display for Actor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Actor::Authority { index } => write!(f, "authority {index}"),
            Actor::Client { index } => write!(f, "client {index}"),
            Actor::Simulator => write!(f, "simulator"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    /// Position in the trace.
    pub index: u64,
    pub time: u64,
    pub actor: Actor,
    pub kind: String,
    pub payload: Digest,
}

crate::codec_struct!(TraceEvent {
    index,
    time,
    actor,
    kind,
    payload
});

/// An authority processed a client message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandledRecord {
    pub client: u32,
    pub request: u64,
    pub message: ClientMessage,
    pub response: Response,
    /// False if a fault kept the answer from being sent.
    pub sent: bool,
}

crate::codec_struct!(HandledRecord {
    client,
    request,
    message,
    response,
    sent
});

/// A message that never reached its authority.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedRecord {
    pub client: u32,
    pub request: u64,
    pub authority: u16,
    pub reason: String,
}

crate::codec_struct!(DroppedRecord {
    client,
    request,
    authority,
    reason
});

/// A response handed to a client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplyRecord {
    pub request: u64,
    pub from: u16,
    pub response: Digest,
}

crate::codec_struct!(ReplyRecord {
    request,
    from,
    response
});

/// State summary of one authority after it took a step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    pub authority: u16,
    /// Balances, held deposits and burned funds.
    pub funds: i64,
    /// Funds carried by effects sent but not yet applied.
    pub in_flight: i64,
    pub min_balance: i64,
    pub sequences: Vec<(AccountId, u64)>,
    /// `0` bidding, `1` revealing; settled auctions disappear.
    pub phases: Vec<(AccountId, u8)>,
    /// Rounds of `proposed` and `locked` per live instance.
    pub instances: Vec<(AccountId, (Option<u64>, Option<u64>))>,
}

crate::codec_struct!(Checkpoint {
    authority,
    funds,
    in_flight,
    min_balance,
    sequences,
    phases,
    instances
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeRecord {
    pub name: String,
    pub ok: bool,
    pub summary: String,
}

crate::codec_struct!(OutcomeRecord { name, ok, summary });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncRecord {
    pub authority: u16,
    pub pass: u32,
    pub replayed: u32,
    pub changed: bool,
}

crate::codec_struct!(SyncRecord {
    authority,
    pass,
    replayed,
    changed
});

/// Decoded payload of an event, chosen by the event kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    Handled(HandledRecord),
    Dropped(DroppedRecord),
    Reply(ReplyRecord),
    Effect(CrossShardRequest),
    Checkpoint(Checkpoint),
    Outcome(OutcomeRecord),
    Sync(SyncRecord),
    Text(String),
}

impl Record {
    pub fn decode(kind: &str, bytes: &[u8]) -> Result<Record, DecodeError> {
        let family = kind.split('/').next().unwrap_or(kind);
        Ok(match family {
            "handle" => Record::Handled(HandledRecord::from_bytes(bytes)?),
            "drop" => Record::Dropped(DroppedRecord::from_bytes(bytes)?),
            "reply" => Record::Reply(ReplyRecord::from_bytes(bytes)?),
            "effect" => Record::Effect(CrossShardRequest::from_bytes(bytes)?),
            "checkpoint" => Record::Checkpoint(Checkpoint::from_bytes(bytes)?),
            "outcome" => Record::Outcome(OutcomeRecord::from_bytes(bytes)?),
            "sync" => Record::Sync(SyncRecord::from_bytes(bytes)?),
            _ => Record::Text(String::from_bytes(bytes)?),
        })
    }
}

pub fn payload_digest(bytes: &[u8]) -> Digest {
    Digest::tagged("trace-payload", bytes)
}

/// Trace events plus their payloads.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    payload_order: Vec<Digest>,
    payloads: BTreeMap<Digest, Vec<u8>>,
}

impl Trace {
    pub fn push<T: Encode>(&mut self, time: u64, actor: Actor, kind: impl Into<String>, payload: &T) {
        let bytes = payload.to_bytes();
        let digest = payload_digest(&bytes);
        if !self.payloads.contains_key(&digest) {
            self.payload_order.push(digest);
            self.payloads.insert(digest, bytes);
        }
        self.events.push(TraceEvent {
            index: self.events.len() as u64,
            time,
            actor,
            kind: kind.into(),
            payload: digest,
        });
    }

    pub fn payload(&self, digest: &Digest) -> Option<&[u8]> {
        self.payloads.get(digest).map(Vec::as_slice)
    }

    pub fn record(&self, event: &TraceEvent) -> Result<Record, DecodeError> {
        let bytes = self
            .payload(&event.payload)
            .ok_or(DecodeError::InvalidValue("missing payload"))?;
        Record::decode(&event.kind, bytes)
    }

    /// Events with their decoded payloads. Undecodable events are skipped.
    pub fn records(&self) -> impl Iterator<Item = (&TraceEvent, Record)> + '_ {
        self.events
            .iter()
            .filter_map(|event| self.record(event).ok().map(|record| (event, record)))
    }

    pub fn trace_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&TRACE_MAGIC);
        FORMAT_VERSION.encode_to(&mut out);
        for event in &self.events {
            let bytes = event.to_bytes();
            (bytes.len() as u32).encode_to(&mut out);
            out.extend_from_slice(&bytes);
        }
        out
    }

    pub fn payload_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&PAYLOAD_MAGIC);
        FORMAT_VERSION.encode_to(&mut out);
        for digest in &self.payload_order {
            digest.encode_to(&mut out);
            self.payloads[digest].encode_to(&mut out);
        }
        out
    }

    pub fn from_bytes(trace: &[u8], payloads: &[u8]) -> Result<Trace, DecodeError> {
        let mut result = Trace::default();
        let mut reader = header(trace, &TRACE_MAGIC)?;
        while reader.remaining() > 0 {
            let len = u32::decode_from(&mut reader)? as usize;
            let event = TraceEvent::from_bytes(reader.take(len)?)?;
            if event.index != result.events.len() as u64 {
                return Err(DecodeError::InvalidValue("trace index out of order"));
            }
            result.events.push(event);
        }
        let mut reader = header(payloads, &PAYLOAD_MAGIC)?;
        while reader.remaining() > 0 {
            let digest = Digest::decode_from(&mut reader)?;
            let bytes = Vec::<u8>::decode_from(&mut reader)?;
            if payload_digest(&bytes) != digest {
                return Err(DecodeError::InvalidValue("payload digest"));
            }
            result.payload_order.push(digest);
            result.payloads.insert(digest, bytes);
        }
        Ok(result)
    }

    pub fn write_to(&self, directory: &Path) -> io::Result<()> {
        write_file(&directory.join("trace.bin"), &self.trace_bytes())?;
        write_file(&directory.join("payloads.bin"), &self.payload_bytes())
    }

    pub fn read_from(directory: &Path) -> io::Result<Trace> {
        let trace = read_file(&directory.join("trace.bin"))?;
        let payloads = read_file(&directory.join("payloads.bin"))?;
        Trace::from_bytes(&trace, &payloads).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

fn header<'a>(bytes: &'a [u8], magic: &[u8; 8]) -> Result<Reader<'a>, DecodeError> {
    let mut reader = Reader::new(bytes);
    if reader.take(8)? != magic {
        return Err(DecodeError::InvalidValue("magic"));
    }
    if u32::decode_from(&mut reader)? != FORMAT_VERSION {
        return Err(DecodeError::InvalidValue("format version"));
    }
    Ok(reader)
}

fn write_file(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(bytes)?;
    file.sync_all()
}

fn read_file(path: &Path) -> io::Result<Vec<u8>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payloads_are_stored_once() {
        let mut trace = Trace::default();
        trace.push(1, Actor::Simulator, "note", &"hello".to_string());
        trace.push(2, Actor::Client { index: 3 }, "note", &"hello".to_string());
        assert_eq!(trace.events.len(), 2);
        assert_eq!(trace.events[0].payload, trace.events[1].payload);
        let parsed = Trace::from_bytes(&trace.trace_bytes(), &trace.payload_bytes()).unwrap();
        assert_eq!(parsed, trace);
        assert_eq!(parsed.payload_order.len(), 1);
    }

    #[test]
    fn corrupted_payload_rejected() {
        let mut trace = Trace::default();
        trace.push(1, Actor::Simulator, "note", &"x".to_string());
        let mut payloads = trace.payload_bytes();
        let last = payloads.len() - 1;
        payloads[last] ^= 1;
        assert!(Trace::from_bytes(&trace.trace_bytes(), &payloads).is_err());
    }

    #[test]
    fn event_layout() {
        let event = TraceEvent {
            index: 1,
            time: 2,
            actor: Actor::Authority { index: 3 },
            kind: "x".into(),
            payload: Digest([7; 32]),
        };
        let bytes = event.to_bytes();
        assert_eq!(&bytes[..8], &1u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
        assert_eq!(&bytes[16..19], &[0, 3, 0]);
        assert_eq!(&bytes[19..24], &[1, 0, 0, 0, b'x']);
        assert_eq!(&bytes[24..], &[7; 32]);
    }
}
