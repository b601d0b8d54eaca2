//! Audit trace of agent runs: one JSON Lines event per executed stage, with
//! the rendered prompt, the raw reply, the parsed value, and the attempt
//! history.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::election::ParticipantId;
use crate::protocol::StageId;

use super::provider::AttemptRecord;

/// One stage execution for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEvent {
    pub group_id: String,
    pub participant: ParticipantId,
    pub stage: StageId,
    pub prompt: String,
    pub raw_reply: String,
    /// JSON form of the parsed value; absent when parsing failed terminally.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed: Option<Value>,
    /// Provider attempts across all re-asks, in order.
    pub attempts: Vec<AttemptRecord>,
    /// Re-asks needed because a reply failed to parse.
    pub reasks: u32,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    /// "ok" or an error token.
    pub outcome: String,
}

pub(crate) fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Writes events as JSON Lines through a single writer.
pub fn write_trace_events<W: Write>(events: &[StageEvent], mut writer: W) -> std::io::Result<()> {
    for event in events {
        let line = serde_json::to_string(event).expect("trace event serializes");
        writeln!(writer, "{line}")?;
    }
    Ok(())
}
