//! Scripted runs of the controller and the traces they produce.
//!
//! Inputs are level-triggered: an event sets the command input from its tick
//! onward, until the next event. Before the first event the input is 0.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{Controller, InputCode, ModeTag};
use crate::signal::OutputWord;
use crate::table::PhaseTable;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario must run for at least one tick")]
    NoTicks,
    #[error("event at tick {tick} is not after the previous event at tick {previous}")]
    EventOrder { tick: u64, previous: u64 },
    #[error("event at tick {tick} is outside the scenario's {total} ticks")]
    EventOutOfRange { tick: u64, total: u64 },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("traces differ in length: {left} vs {right} records")]
    LengthMismatch { left: usize, right: usize },
    #[error("trace CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace CSV row {row}: {message}")]
    CsvValue { row: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    name: String,
    total_ticks: u64,
    events: Vec<(u64, InputCode)>,
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        total_ticks: u64,
        events: Vec<(u64, InputCode)>,
    ) -> Result<Self, SimError> {
        if total_ticks == 0 {
            return Err(SimError::NoTicks);
        }
        for pair in events.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(SimError::EventOrder {
                    tick: pair[1].0,
                    previous: pair[0].0,
                });
            }
        }
        if let Some(&(tick, _)) = events.iter().find(|(t, _)| *t >= total_ticks) {
            return Err(SimError::EventOutOfRange {
                tick,
                total: total_ticks,
            });
        }
        Ok(Scenario {
            name: name.into(),
            total_ticks,
            events,
        })
    }

    /// A scenario whose input at tick `t` is `inputs[t]`.
    pub fn from_inputs(name: impl Into<String>, inputs: &[InputCode]) -> Result<Self, SimError> {
        let mut events = Vec::new();
        let mut current = InputCode::TRADITIONAL;
        for (tick, &code) in inputs.iter().enumerate() {
            if code != current {
                events.push((tick as u64, code));
                current = code;
            }
        }
        Scenario::new(name, inputs.len() as u64, events)
    }

    /// Parses the line format: `ticks <N>` once, then `at <tick> input
    /// <code>` lines. `#` starts a comment.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, SimError> {
        let mut total = None;
        let mut events = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let syntax = |message: String| SimError::Syntax { line, message };
            let number = |s: &str| {
                s.parse::<u64>()
                    .map_err(|_| syntax(format!("expected a non-negative integer, found {s:?}")))
            };
            let words: Vec<&str> = content.split_whitespace().collect();
            match words.as_slice() {
                ["ticks", n] => {
                    if total.is_some() {
                        return Err(syntax("duplicate 'ticks' directive".into()));
                    }
                    total = Some(number(n)?);
                }
                ["at", tick, "input", code] => {
                    if total.is_none() {
                        return Err(syntax("'at' before 'ticks'".into()));
                    }
                    let code = InputCode::new(number(code)?.min(i64::MAX as u64) as i64)
                        .map_err(|e| syntax(e.to_string()))?;
                    events.push((number(tick)?, code));
                }
                _ => {
                    return Err(syntax(format!(
                        "expected 'ticks <N>' or 'at <tick> input <code>', found {content:?}"
                    )))
                }
            }
        }
        let total = total.ok_or(SimError::Syntax {
            line: text.lines().count().max(1),
            message: "missing 'ticks' directive".into(),
        })?;
        Scenario::new(name, total, events)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("ticks {}\n", self.total_ticks);
        for (tick, code) in &self.events {
            let _ = writeln!(out, "at {tick} input {code}");
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn total_ticks(&self) -> u64 {
        self.total_ticks
    }

    pub fn events(&self) -> &[(u64, InputCode)] {
        &self.events
    }

    /// The input held at each tick.
    pub fn inputs(&self) -> impl Iterator<Item = InputCode> + '_ {
        let mut events = self.events.iter().peekable();
        let mut current = InputCode::TRADITIONAL;
        (0..self.total_ticks).map(move |tick| {
            while let Some(&&(at, code)) = events.peek() {
                if at > tick {
                    break;
                }
                current = code;
                events.next();
            }
            current
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: u64,
    pub input: InputCode,
    pub output: OutputWord,
    pub mode: ModeTag,
    pub phase: Option<usize>,
    pub remaining: u32,
    pub latched: Option<InputCode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub scenario: String,
    /// [`PhaseTable::content_hash`] of the table that produced it.
    pub table_hash: String,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn outputs(&self) -> impl Iterator<Item = OutputWord> + '_ {
        self.records.iter().map(|r| r.output)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `tick,input,hex,mode` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tick,input,hex,mode\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{}", r.tick, r.input, r.output, r.mode);
        }
        out
    }

    /// Reads the CSV export back. Only the exported columns are restored;
    /// phase, remaining and latch details are left empty.
    pub fn from_csv(
        scenario: impl Into<String>,
        table_hash: impl Into<String>,
        text: &str,
    ) -> Result<Self, SimError> {
        #[derive(Deserialize)]
        struct Row {
            tick: u64,
            input: i64,
            hex: String,
            mode: String,
        }
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut records = Vec::new();
        for (row, result) in reader.deserialize::<Row>().enumerate() {
            let r = result?;
            let bad = |message: String| SimError::CsvValue { row: row + 1, message };
            records.push(TraceRecord {
                tick: r.tick,
                input: InputCode::new(r.input).map_err(|e| bad(e.to_string()))?,
                output: OutputWord::from_hex(&r.hex).map_err(|e| bad(e.to_string()))?,
                mode: r.mode.parse().map_err(|e: crate::controller::ControllerError| bad(e.to_string()))?,
                phase: None,
                remaining: 0,
                latched: None,
            });
        }
        Ok(Trace {
            scenario: scenario.into(),
            table_hash: table_hash.into(),
            records,
        })
    }
}

pub fn run(scenario: &Scenario, table: &PhaseTable) -> Trace {
    let controller = Controller::new(table);
    let mut state = controller.init();
    let records = scenario
        .inputs()
        .enumerate()
        .map(|(tick, input)| {
            let (next, out) = controller.step(&state, input);
            state = next;
            TraceRecord {
                tick: tick as u64,
                input,
                output: out.word,
                mode: out.mode,
                phase: out.phase,
                remaining: out.remaining,
                latched: out.latched.map(|c| c.code()),
            }
        })
        .collect();
    Trace {
        scenario: scenario.name().to_string(),
        table_hash: table.content_hash(),
        records,
    }
}

/// A maximal run of ticks on which two traces disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub tick: u64,
    pub length: u64,
    pub left_input: InputCode,
    pub right_input: InputCode,
    pub left: OutputWord,
    pub right: OutputWord,
}

/// Compares the (input, output) streams. Mode tags and other diagnostics are
/// not compared.
pub fn compare_traces(left: &Trace, right: &Trace) -> Result<Vec<Divergence>, SimError> {
    if left.len() != right.len() {
        return Err(SimError::LengthMismatch {
            left: left.len(),
            right: right.len(),
        });
    }
    let mut out: Vec<Divergence> = Vec::new();
    let mut previous_differed = false;
    for (a, b) in left.records.iter().zip(&right.records) {
        let differs = a.input != b.input || a.output != b.output;
        if differs && previous_differed {
            if let Some(last) = out.last_mut() {
                last.length += 1;
            }
        } else if differs {
            out.push(Divergence {
                tick: a.tick,
                length: 1,
                left_input: a.input,
                right_input: b.input,
                left: a.output,
                right: b.output,
            });
        }
        previous_differed = differs;
    }
    Ok(out)
}
