//! Timeline events and their JSON-lines export.
//!
//! One schema serves both the offline simulator and the online executor.
//! Field names are stable: `time_ms`, `kind`, `position`, `server_id`, plus
//! `label` for online thread events (omitted when absent).

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Event kinds, declared in tie-break order: events at equal `time_ms` sort
/// by this order, then by position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    DraftDone,
    VerifyDispatch,
    VerifyDone,
    Accept,
    Reject,
    TokenEmitted,
    ServerFreed,
    Spawn,
    Cancel,
    Relabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time_ms: f64,
    pub kind: EventKind,
    pub position: usize,
    pub server_id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl TraceEvent {
    pub fn new(time_ms: f64, kind: EventKind, position: usize) -> Self {
        TraceEvent {
            time_ms,
            kind,
            position,
            server_id: None,
            label: None,
        }
    }

    pub fn on_server(mut self, server: usize) -> Self {
        self.server_id = Some(server);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// Stable sort into the documented total order.
pub fn sort_events(events: &mut [TraceEvent]) {
    events.sort_by(|a, b| {
        a.time_ms
            .total_cmp(&b.time_ms)
            .then(a.kind.cmp(&b.kind))
            .then(a.position.cmp(&b.position))
    });
}

pub fn write_jsonl<W: Write>(events: &[TraceEvent], out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_jsonl_file(events: &[TraceEvent], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(events, file).map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<R: Read>(input: R, source_name: &str) -> Result<Vec<TraceEvent>> {
    let mut events = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line.map_err(|e| Error::io(source_name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}
