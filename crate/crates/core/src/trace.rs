//! Round traces: the append-only event log of a run, its JSON-lines file
//! form, and the 64-bit FNV-1a digest over the canonical byte stream.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::engine::{MoveKind, RobotId};
use crate::grid::{NodeId, Port};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    /// Initial placement, emitted at round 0 before anything else.
    Placed {
        node: NodeId,
    },
    Moved {
        port: Port,
        kind: MoveKind,
    },
    Settled,
    Crashed,
    /// The robot joined the group keyed by `group`.
    Merged {
        group: RobotId,
    },
    Phase {
        tag: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub round: u64,
    pub robot: RobotId,
    pub kind: EventKind,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawEvent {
    r: u64,
    id: RobotId,
    ev: String,
    arg: Value,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: malformed event `{ev}`")]
    Malformed { line: usize, ev: String },
}

impl Event {
    fn to_raw(&self) -> RawEvent {
        let (ev, arg) = match &self.kind {
            EventKind::Placed { node } => ("placed", json!(node)),
            EventKind::Moved { port, kind } => ("moved", json!({"port": port, "kind": kind.as_str()})),
            EventKind::Settled => ("settled", Value::Null),
            EventKind::Crashed => ("crashed", Value::Null),
            EventKind::Merged { group } => ("merged", json!(group)),
            EventKind::Phase { tag } => ("phase", json!(tag)),
        };
        RawEvent {
            r: self.round,
            id: self.robot,
            ev: ev.to_string(),
            arg,
        }
    }

    fn from_raw(raw: RawEvent, line: usize) -> Result<Event, TraceError> {
        let bad = || TraceError::Malformed { line, ev: raw.ev.clone() };
        let kind = match raw.ev.as_str() {
            "placed" => EventKind::Placed {
                node: raw.arg.as_u64().ok_or_else(bad)? as NodeId,
            },
            "moved" => {
                let port = raw.arg.get("port").and_then(Value::as_u64).ok_or_else(bad)? as Port;
                let kind = raw.arg.get("kind").and_then(Value::as_str).and_then(MoveKind::parse).ok_or_else(bad)?;
                EventKind::Moved { port, kind }
            }
            "settled" => EventKind::Settled,
            "crashed" => EventKind::Crashed,
            "merged" => EventKind::Merged {
                group: raw.arg.as_u64().ok_or_else(bad)? as RobotId,
            },
            "phase" => EventKind::Phase {
                tag: raw.arg.as_str().ok_or_else(bad)?.to_string(),
            },
            _ => return Err(bad()),
        };
        Ok(Event {
            round: raw.r,
            robot: raw.id,
            kind,
        })
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_raw()).expect("event serializes")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<Event>,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

impl Trace {
    pub fn push(&mut self, round: u64, robot: RobotId, kind: EventKind) {
        self.events.push(Event { round, robot, kind });
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_json_line());
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, TraceError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawEvent = serde_json::from_str(line).map_err(|source| TraceError::Json { line: i + 1, source })?;
            events.push(Event::from_raw(raw, i + 1)?);
        }
        Ok(Trace { events })
    }

    /// FNV-1a over the JSON-lines encoding (each line terminated by `\n`).
    pub fn digest(&self) -> u64 {
        let mut h = FNV_OFFSET;
        for e in &self.events {
            for b in e.to_json_line().bytes().chain(std::iter::once(b'\n')) {
                h ^= u64::from(b);
                h = h.wrapping_mul(FNV_PRIME);
            }
        }
        h
    }

    pub fn digest_hex(&self) -> String {
        format!("{:016x}", self.digest())
    }
}
