//! Wire schema shared by the TCP line transport and the `/ws` endpoint.
//!
//! Requests are one JSON object per line:
//!
//! ```text
//! {"cmd":"set_input","code":1}   -> {"ok":true}
//! {"cmd":"get"}                  -> {"tick":0,"hex":"3218A6","mode":"traditional",...}
//! {"cmd":"subscribe"}            -> {"ok":true}, then one update per tick
//! {"cmd":"ping"}                 -> {"ok":true,"pong":true}
//! ```

use junction_core::controller::StepOutput;
use junction_core::{InputCode, ModeTag, TraceRecord};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// One tick of the live controller, as sent to clients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateUpdate {
    pub tick: u64,
    pub hex: String,
    pub mode: ModeTag,
    pub phase: Option<usize>,
    pub remaining: u32,
    pub input: u8,
    /// Command waiting for a hold to reach its minimum.
    pub latched: Option<u8>,
}

impl StateUpdate {
    pub fn from_step(tick: u64, input: InputCode, out: &StepOutput) -> Self {
        StateUpdate {
            tick,
            hex: out.word.to_hex(),
            mode: out.mode,
            phase: out.phase,
            remaining: out.remaining,
            input: input.get(),
            latched: out.latched.map(|c| c.code().get()),
        }
    }
}

impl From<&TraceRecord> for StateUpdate {
    fn from(r: &TraceRecord) -> Self {
        StateUpdate {
            tick: r.tick,
            hex: r.output.to_hex(),
            mode: r.mode,
            phase: r.phase,
            remaining: r.remaining,
            input: r.input.get(),
            latched: r.latched.map(InputCode::get),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Request {
    SetInput(InputCode),
    Get,
    Subscribe,
    Ping,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("malformed request")]
    Malformed,
    #[error("unknown command")]
    UnknownCommand,
    #[error("code out of range")]
    CodeOutOfRange,
    #[error("command queue full")]
    QueueFull,
    #[error("too many clients")]
    TooManyClients,
    #[error("client too slow")]
    Lagged,
    #[error("service stopped")]
    Stopped,
}

impl ProtocolError {
    pub fn to_line(&self) -> String {
        #[derive(Serialize)]
        struct Reply<'a> {
            ok: bool,
            error: &'a str,
        }
        let error = self.to_string();
        serde_json::to_string(&Reply { ok: false, error: &error }).expect("reply serializes")
    }
}

pub fn parse_request(line: &str) -> Result<Request, ProtocolError> {
    let value: Value = serde_json::from_str(line.trim()).map_err(|_| ProtocolError::Malformed)?;
    let obj = value.as_object().ok_or(ProtocolError::Malformed)?;
    let cmd = obj.get("cmd").and_then(Value::as_str).ok_or(ProtocolError::Malformed)?;
    match cmd {
        "set_input" => {
            let code = obj.get("code").ok_or(ProtocolError::Malformed)?;
            let code = code.as_i64().ok_or_else(|| {
                // 1e30 and 2^64 are numbers, just not ones we accept.
                if code.is_number() {
                    ProtocolError::CodeOutOfRange
                } else {
                    ProtocolError::Malformed
                }
            })?;
            InputCode::new(code)
                .map(Request::SetInput)
                .map_err(|_| ProtocolError::CodeOutOfRange)
        }
        "get" => Ok(Request::Get),
        "subscribe" => Ok(Request::Subscribe),
        "ping" => Ok(Request::Ping),
        _ => Err(ProtocolError::UnknownCommand),
    }
}

pub fn ok_line() -> String {
    r#"{"ok":true}"#.to_string()
}

pub fn pong_line() -> String {
    r#"{"ok":true,"pong":true}"#.to_string()
}

pub fn update_line(update: &StateUpdate) -> String {
    serde_json::to_string(update).expect("state update serializes")
}
