//! Value change dump output for traces, and a reader for the subset we write.
//!
//! One tick is one second (`$timescale 1 s`). The dump declares 24 scalar
//! lamp wires `r<road>_<lamp>`, the packed 24-bit `lights` vector and the
//! 3-bit `state_in` command. A `$comment ticks <N> $end` header and a final
//! bare `#<N>` timestamp mark the trace length, so a truncated file is
//! rejected instead of read short.

use std::fmt::Write as _;

use thiserror::Error;

use crate::signal::{RoadId, LAMPS_PER_ROAD, ROAD_COUNT};
use crate::sim::Trace;

const LAMP_SUFFIXES: [&str; LAMPS_PER_ROAD] = ["R", "Y", "GS", "GR", "GL", "M"];
const SCOPE: &str = "junction";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VcdError {
    #[error("cannot dump an empty trace")]
    EmptyTrace,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcdSignal {
    pub name: String,
    pub id: String,
    pub width: u32,
    /// `(time, value)` pairs, strictly increasing in time, first at 0.
    pub changes: Vec<(u64, u32)>,
}

impl VcdSignal {
    pub fn value_at(&self, time: u64) -> Option<u32> {
        let idx = self.changes.partition_point(|&(t, _)| t <= time);
        idx.checked_sub(1).map(|i| self.changes[i].1)
    }

    /// Value at each tick `0..end`.
    pub fn samples(&self, end: u64) -> Vec<u32> {
        (0..end).map(|t| self.value_at(t).unwrap_or(0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcdDump {
    pub ticks: u64,
    pub signals: Vec<VcdSignal>,
}

fn id_code(index: usize) -> String {
    // Printable range '!'..='~', base 94, least significant first.
    let mut n = index;
    let mut out = String::new();
    loop {
        out.push((b'!' + (n % 94) as u8) as char);
        n /= 94;
        if n == 0 {
            break;
        }
        n -= 1;
    }
    out
}

impl VcdDump {
    pub fn signal(&self, name: &str) -> Option<&VcdSignal> {
        self.signals.iter().find(|s| s.name == name)
    }

    pub fn from_trace(trace: &Trace) -> Result<Self, VcdError> {
        if trace.is_empty() {
            return Err(VcdError::EmptyTrace);
        }
        let mut signals = Vec::new();
        for road in RoadId::ALL {
            for (lamp, suffix) in LAMP_SUFFIXES.iter().enumerate() {
                let shift = LAMPS_PER_ROAD * (ROAD_COUNT - road.slot()) - 1 - lamp;
                let values = trace.records.iter().map(|r| (r.output.bits() >> shift) & 1);
                signals.push(signal_from(format!("r{road}_{suffix}"), 1, values));
            }
        }
        let lights = trace.records.iter().map(|r| r.output.bits());
        signals.push(signal_from("lights".into(), 24, lights));
        let inputs = trace.records.iter().map(|r| u32::from(r.input.get()));
        signals.push(signal_from("state_in".into(), 3, inputs));
        for (i, s) in signals.iter_mut().enumerate() {
            s.id = id_code(i);
        }
        Ok(VcdDump {
            ticks: trace.len() as u64,
            signals,
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("$version junction-core $end\n");
        let _ = writeln!(out, "$comment ticks {} $end", self.ticks);
        out.push_str("$timescale 1 s $end\n");
        let _ = writeln!(out, "$scope module {SCOPE} $end");
        for s in &self.signals {
            let _ = writeln!(out, "$var wire {} {} {} $end", s.width, s.id, s.name);
        }
        out.push_str("$upscope $end\n$enddefinitions $end\n");

        // Merge every signal's changes into time order, declaration order
        // within a timestamp.
        let mut events: Vec<(u64, usize, u32)> = self
            .signals
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.changes.iter().map(move |&(t, v)| (t, i, v)))
            .collect();
        events.sort_unstable();

        let mut current = None;
        for (time, i, value) in events {
            if current != Some(time) {
                if current == Some(0) {
                    out.push_str("$end\n");
                }
                let _ = writeln!(out, "#{time}");
                if time == 0 {
                    out.push_str("$dumpvars\n");
                }
                current = Some(time);
            }
            let s = &self.signals[i];
            if s.width == 1 {
                let _ = writeln!(out, "{}{}", value & 1, s.id);
            } else {
                let _ = writeln!(out, "b{:0width$b} {}", value, s.id, width = s.width as usize);
            }
        }
        if current == Some(0) {
            out.push_str("$end\n");
        }
        let _ = writeln!(out, "#{}", self.ticks);
        out
    }
}

fn signal_from(name: String, width: u32, values: impl Iterator<Item = u32>) -> VcdSignal {
    let mut changes: Vec<(u64, u32)> = Vec::new();
    for (t, v) in values.enumerate() {
        if changes.last().map(|&(_, last)| last) != Some(v) {
            changes.push((t as u64, v));
        }
    }
    VcdSignal {
        name,
        id: String::new(),
        width,
        changes,
    }
}

pub fn write_vcd(trace: &Trace) -> Result<String, VcdError> {
    Ok(VcdDump::from_trace(trace)?.render())
}

pub fn read_vcd(text: &str) -> Result<VcdDump, VcdError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let err = |line: usize, message: String| VcdError::Parse { line, message };
    let mut declared_ticks = None;
    let mut timescale_ok = false;
    let mut signals: Vec<VcdSignal> = Vec::new();
    let mut last_line = 0;

    // Header.
    let mut finished_header = false;
    for (line, content) in lines.by_ref() {
        last_line = line;
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        if words.last() != Some(&"$end") {
            return Err(err(line, format!("header directive not closed with $end: {content:?}")));
        }
        match words.as_slice() {
            ["$version", ..] | ["$date", ..] | ["$upscope", "$end"] => {}
            ["$comment", "ticks", n, "$end"] => {
                declared_ticks = Some(n.parse::<u64>().map_err(|_| err(line, format!("bad tick count {n:?}")))?);
            }
            ["$comment", ..] => {}
            ["$timescale", "1", "s", "$end"] | ["$timescale", "1s", "$end"] => timescale_ok = true,
            ["$timescale", ..] => return Err(err(line, format!("unsupported timescale {content:?}"))),
            ["$scope", "module", _, "$end"] => {}
            ["$var", "wire", width, id, name, "$end"] => {
                let width: u32 = width
                    .parse()
                    .ok()
                    .filter(|w| (1..=32).contains(w))
                    .ok_or_else(|| err(line, format!("bad width {width:?}")))?;
                if signals.iter().any(|s| s.id == *id) {
                    return Err(err(line, format!("duplicate identifier code {id:?}")));
                }
                signals.push(VcdSignal {
                    name: name.to_string(),
                    id: id.to_string(),
                    width,
                    changes: Vec::new(),
                });
            }
            ["$enddefinitions", "$end"] => {
                finished_header = true;
                break;
            }
            _ => return Err(err(line, format!("unrecognised header directive {content:?}"))),
        }
    }
    if !finished_header {
        return Err(err(last_line, "missing $enddefinitions".into()));
    }
    if !timescale_ok {
        return Err(err(last_line, "missing $timescale".into()));
    }
    let ticks = declared_ticks.ok_or_else(|| err(last_line, "missing '$comment ticks <N> $end'".into()))?;

    // Body.
    let mut time: Option<u64> = None;
    let mut in_dumpvars = false;
    let mut changes_since_time = 0usize;
    for (line, content) in lines {
        last_line = line;
        if content.is_empty() {
            continue;
        }
        if let Some(t) = content.strip_prefix('#') {
            let t: u64 = t.parse().map_err(|_| err(line, format!("bad timestamp {content:?}")))?;
            if time.is_some_and(|prev| t <= prev) {
                return Err(err(line, format!("timestamp {t} does not advance")));
            }
            time = Some(t);
            changes_since_time = 0;
            continue;
        }
        match content {
            "$dumpvars" => {
                if time != Some(0) {
                    return Err(err(line, "$dumpvars outside time 0".into()));
                }
                in_dumpvars = true;
                continue;
            }
            "$end" if in_dumpvars => {
                in_dumpvars = false;
                continue;
            }
            _ => {}
        }
        let Some(t) = time else {
            return Err(err(line, "value change before first timestamp".into()));
        };
        let (value, id) = if let Some(rest) = content.strip_prefix('b') {
            let mut parts = rest.split_whitespace();
            let (Some(bits), Some(id), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err(line, format!("malformed vector change {content:?}")));
            };
            let value = u32::from_str_radix(bits, 2).map_err(|_| err(line, format!("bad binary value {bits:?}")))?;
            (value, id)
        } else {
            let (bit, id) = content.split_at(1);
            let value = match bit {
                "0" => 0,
                "1" => 1,
                _ => return Err(err(line, format!("malformed value change {content:?}"))),
            };
            (value, id)
        };
        let signal = signals
            .iter_mut()
            .find(|s| s.id == id)
            .ok_or_else(|| err(line, format!("unknown identifier code {id:?}")))?;
        if signal.width < 32 && value >> signal.width != 0 {
            return Err(err(line, format!("value wider than {} bits for {}", signal.width, signal.name)));
        }
        signal.changes.push((t, value));
        changes_since_time += 1;
    }

    if in_dumpvars {
        return Err(err(last_line, "unterminated $dumpvars".into()));
    }
    match time {
        Some(end) if end == ticks && changes_since_time == 0 => {}
        _ => {
            return Err(err(
                last_line,
                format!("file ends before the closing timestamp #{ticks}; truncated?"),
            ))
        }
    }
    if let Some(s) = signals.iter().find(|s| s.changes.first().map(|c| c.0) != Some(0)) {
        return Err(err(last_line, format!("signal {} has no initial value", s.name)));
    }
    Ok(VcdDump { ticks, signals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::InputCode;
    use crate::dsl::compile_builtin;
    use crate::sim::{run, Scenario};

    #[test]
    fn id_codes_are_printable_and_unique() {
        let ids: Vec<String> = (0..500).map(id_code).collect();
        assert_eq!(ids[0], "!");
        assert_eq!(ids[93], "~");
        assert_eq!(ids[94], "!!");
        let unique: std::collections::HashSet<_> = ids.iter().collect();
        assert_eq!(unique.len(), ids.len());
        assert!(ids.iter().flat_map(|s| s.chars()).all(|c| ('!'..='~').contains(&c)));
    }

    #[test]
    fn constant_trace() {
        let table = compile_builtin();
        let trace = run(&Scenario::new("one", 1, vec![]).unwrap(), &table);
        let text = write_vcd(&trace).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with('#') && l[1..].parse::<u64>().is_ok()).count(), 2, "{text}");
        assert!(text.contains("#0\n$dumpvars\n"));
        assert!(text.ends_with("$end\n#1\n"));
        assert!(text.contains("b001100100001100010100110 9\n"));
        let dump = read_vcd(&text).unwrap();
        assert_eq!(dump.signal("lights").unwrap().changes, vec![(0, 0x3218A6)]);
    }

    #[test]
    fn header() {
        let table = compile_builtin();
        let trace = run(&Scenario::new("one", 3, vec![]).unwrap(), &table);
        let text = write_vcd(&trace).unwrap();
        assert!(text.contains("$timescale 1 s $end\n"));
        assert!(text.contains("$var wire 1 ! r1_R $end\n"));
        assert!(text.contains("$var wire 1 8 r4_M $end\n"));
        assert!(text.contains("$var wire 24 9 lights $end\n"));
        assert!(text.contains("$var wire 3 : state_in $end\n"));
    }

    #[test]
    fn round_trip_with_inputs() {
        let table = compile_builtin();
        let s = Scenario::new("e", 200, vec![(3, InputCode::new(4).unwrap()), (150, InputCode::new(6).unwrap())])
            .unwrap();
        let trace = run(&s, &table);
        let dump = read_vcd(&write_vcd(&trace).unwrap()).unwrap();
        let inputs = dump.signal("state_in").unwrap().samples(dump.ticks);
        assert_eq!(inputs, trace.records.iter().map(|r| u32::from(r.input.get())).collect::<Vec<_>>());
    }

    #[test]
    fn empty_trace_rejected() {
        let trace = Trace {
            scenario: "empty".into(),
            table_hash: String::new(),
            records: vec![],
        };
        assert_eq!(write_vcd(&trace), Err(VcdError::EmptyTrace));
    }

    #[test]
    fn every_truncation_is_rejected() {
        let table = compile_builtin();
        let s = Scenario::new("e", 40, vec![(5, InputCode::new(1).unwrap())]).unwrap();
        let text = write_vcd(&run(&s, &table)).unwrap();
        let complete = text.trim_end().len();
        for cut in 0..complete {
            assert!(read_vcd(&text[..cut]).is_err(), "prefix of {cut} bytes accepted");
        }
        assert!(read_vcd(&text[..complete]).is_ok());
    }

    #[test]
    fn unknown_identifier() {
        let table = compile_builtin();
        let text = write_vcd(&run(&Scenario::new("t", 70, vec![]).unwrap(), &table)).unwrap();
        let broken = text.replace("\n1\"\n", "\n1@@\n");
        match read_vcd(&broken) {
            Err(VcdError::Parse { line, message }) => {
                assert!(message.contains("unknown identifier"), "{message}");
                assert_eq!(broken.lines().nth(line - 1), Some("1@@"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
