//! Replay log: one JSON record per line.
//!
//! ```text
//! {"type":"header","v":1,"session_id":"…","seed":42,"settings":{…},"scene_sha256":"…",…}
//! {"type":"event","tick":0,"seq":1,"ts":12,"viewer":"v1","name":"Li","kind":"comment","text":"release lotus"}
//! {"type":"event","tick":31,"seq":2,"ts":1040,"viewer":"v2","name":"Su","kind":"gift","amount":"15.00"}
//! {"type":"end","tick":36000,"state_hash":"…","chain":"…"}
//! ```
//!
//! `tick` is the boundary the event was applied at. The end record is
//! written on clean shutdown; a log without one replays up to its last event.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Session, SessionConfig, SessionError, SessionSettings};
use crate::chatparse::{ChatEvent, EventKind, ViewerId};
use crate::protocol::PROTOCOL_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub v: u32,
    pub session_id: String,
    pub seed: u64,
    pub settings: SessionSettings,
    pub scene_sha256: String,
    pub corpus_sha256: String,
    pub aliases_sha256: String,
}

impl LogHeader {
    pub fn new(session_id: &str, seed: u64, config: &SessionConfig) -> Self {
        LogHeader {
            v: PROTOCOL_VERSION,
            session_id: session_id.to_string(),
            seed,
            settings: config.settings.clone(),
            scene_sha256: config.scene_digest(),
            corpus_sha256: config.corpus_digest(),
            aliases_sha256: config.aliases_digest(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub tick: u64,
    pub seq: u64,
    pub ts: u64,
    pub viewer: ViewerId,
    pub name: String,
    #[serde(flatten)]
    pub payload: EventKind,
}

impl EventRecord {
    pub fn new(tick: u64, event: &ChatEvent) -> Self {
        EventRecord {
            tick,
            seq: event.seq,
            ts: event.timestamp_ms,
            viewer: event.viewer_id.clone(),
            name: event.display_name.clone(),
            payload: event.kind.clone(),
        }
    }

    pub fn to_event(&self) -> ChatEvent {
        ChatEvent {
            seq: self.seq,
            timestamp_ms: self.ts,
            viewer_id: self.viewer.clone(),
            display_name: self.name.clone(),
            kind: self.payload.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Header(LogHeader),
    Event(EventRecord),
    End {
        tick: u64,
        state_hash: String,
        chain: String,
    },
}

pub struct ReplayWriter<W: Write> {
    out: W,
}

impl<W: Write> ReplayWriter<W> {
    pub fn new(mut out: W, header: LogHeader) -> io::Result<Self> {
        write_record(&mut out, &LogRecord::Header(header))?;
        Ok(ReplayWriter { out })
    }

    pub fn event(&mut self, tick: u64, event: &ChatEvent) -> io::Result<()> {
        write_record(&mut self.out, &LogRecord::Event(EventRecord::new(tick, event)))
    }

    pub fn end(mut self, session: &Session) -> io::Result<W> {
        write_record(
            &mut self.out,
            &LogRecord::End {
                tick: session.tick(),
                state_hash: hex::encode(session.state_hash()),
                chain: hex::encode(session.chain_hash()),
            },
        )?;
        self.out.flush()?;
        Ok(self.out)
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

fn write_record<W: Write>(out: &mut W, record: &LogRecord) -> io::Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("reading log: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: {message}")]
    Layout { line: usize, message: String },
    #[error("log has no header")]
    MissingHeader,
    #[error("{what} differs from the recorded session (log {logged}, given {given})")]
    Mismatch {
        what: &'static str,
        logged: String,
        given: String,
    },
    #[error("event seq {seq}: {source}")]
    Session { seq: u64, source: SessionError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayLog {
    pub header: LogHeader,
    pub events: Vec<EventRecord>,
    /// `(tick, state_hash, chain)` from the end record.
    pub end: Option<(u64, String, String)>,
}

impl ReplayLog {
    /// Last tick the log covers.
    pub fn final_tick(&self) -> u64 {
        match &self.end {
            Some((tick, _, _)) => *tick,
            None => self.events.last().map_or(0, |e| e.tick),
        }
    }
}

pub fn read_log<R: BufRead>(input: R) -> Result<ReplayLog, ReplayError> {
    let mut header = None;
    let mut events: Vec<EventRecord> = Vec::new();
    let mut end = None;
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let layout = |message: &str| ReplayError::Layout {
            line: line_no,
            message: message.to_string(),
        };
        let record: LogRecord = serde_json::from_str(&line).map_err(|source| ReplayError::Parse {
            line: line_no,
            source,
        })?;
        if end.is_some() {
            return Err(layout("record after end"));
        }
        match record {
            LogRecord::Header(h) => {
                if header.is_some() {
                    return Err(layout("second header"));
                }
                header = Some(h);
            }
            LogRecord::Event(e) => {
                if header.is_none() {
                    return Err(ReplayError::MissingHeader);
                }
                if let Some(prev) = events.last() {
                    if e.tick < prev.tick {
                        return Err(layout("event tick goes backwards"));
                    }
                }
                events.push(e);
            }
            LogRecord::End {
                tick,
                state_hash,
                chain,
            } => {
                if events.last().is_some_and(|e| e.tick > tick) {
                    return Err(layout("end tick precedes last event"));
                }
                end = Some((tick, state_hash, chain));
            }
        }
    }
    Ok(ReplayLog {
        header: header.ok_or(ReplayError::MissingHeader)?,
        events,
        end,
    })
}

pub struct ReplayOutcome {
    pub session: Session,
    /// Post-tick state hash for ticks 1..=final tick.
    pub tick_hashes: Vec<[u8; 32]>,
}

impl ReplayOutcome {
    pub fn final_hash(&self) -> String {
        hex::encode(self.session.state_hash())
    }

    pub fn chain(&self) -> String {
        hex::encode(self.session.chain_hash())
    }

    /// Whether the replayed chain equals the logged one; `None` if the log
    /// has no end record.
    pub fn matches(&self, log: &ReplayLog) -> Option<bool> {
        log.end.as_ref().map(|(_, _, chain)| *chain == self.chain())
    }
}

/// Re-runs a log against the given scene, corpus and aliases. Settings come
/// from the log header; the inputs must match the recorded digests.
pub fn replay(
    log: &ReplayLog,
    config: SessionConfig,
    seed: u64,
) -> Result<ReplayOutcome, ReplayError> {
    let h = &log.header;
    for (what, logged, given) in [
        ("scene", &h.scene_sha256, config.scene_digest()),
        ("corpus", &h.corpus_sha256, config.corpus_digest()),
        ("alias table", &h.aliases_sha256, config.aliases_digest()),
    ] {
        if *logged != given {
            return Err(ReplayError::Mismatch {
                what,
                logged: logged.clone(),
                given,
            });
        }
    }
    let mut session = Session::new(config.with_settings(h.settings.clone()), seed);
    let final_tick = log.final_tick();
    let mut tick_hashes = Vec::with_capacity(final_tick as usize);
    for record in &log.events {
        while session.tick() < record.tick {
            tick_hashes.push(session.step().hash);
        }
        session
            .apply(&record.to_event())
            .map_err(|source| ReplayError::Session {
                seq: record.seq,
                source,
            })?;
    }
    while session.tick() < final_tick {
        tick_hashes.push(session.step().hash);
    }
    Ok(ReplayOutcome {
        session,
        tick_hashes,
    })
}
