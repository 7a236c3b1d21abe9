//! Trace-level safety checks and exhaustive exploration of the controller.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::controller::{Controller, ControllerState, InputCode, ModeTag};
use crate::signal::{decode_word, OutputWord, RoadId};
use crate::sim::Trace;
use crate::table::PhaseTable;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SafetyError {
    #[error("trace was produced by table {trace}, not {table}")]
    TableMismatch { trace: String, table: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationKind {
    /// A word grants two movements the conflict matrix forbids together.
    Conflict,
    /// Two different green patterns without the safe word between them.
    Interposition,
    /// A road shows red together with its straight-ahead green.
    RedAndGreen,
    /// An emergency hold word ended before its minimum.
    ShortEmergencyHold,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Conflict => "conflict",
            ViolationKind::Interposition => "interposition",
            ViolationKind::RedAndGreen => "red_and_green",
            ViolationKind::ShortEmergencyHold => "short_emergency_hold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub tick: u64,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "VIOLATION {} tick={} detail={}",
            self.kind.as_str(),
            self.tick,
            self.detail
        )
    }
}

/// A maximal stretch of ticks with one output word.
#[derive(Debug, Clone, Copy)]
struct Run {
    word: OutputWord,
    start: u64,
    len: u64,
}

fn runs(trace: &Trace) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for record in &trace.records {
        match out.last_mut() {
            Some(run) if run.word == record.output => run.len += 1,
            _ => out.push(Run {
                word: record.output,
                start: record.tick,
                len: 1,
            }),
        }
    }
    out
}

fn is_green(word: OutputWord) -> bool {
    decode_word(word).iter().any(|road| road.grants_any())
}

pub fn check_trace(trace: &Trace, table: &PhaseTable) -> Result<Vec<Violation>, SafetyError> {
    let hash = table.content_hash();
    if trace.table_hash != hash {
        return Err(SafetyError::TableMismatch {
            trace: trace.table_hash.clone(),
            table: hash,
        });
    }
    Ok(check_records(trace, table))
}

/// The checks behind [`check_trace`], without the table identity guard.
/// Useful for hand-built traces.
pub fn check_records(trace: &Trace, table: &PhaseTable) -> Vec<Violation> {
    let runs = runs(trace);
    let mut violations = Vec::new();

    for run in &runs {
        let lights = decode_word(run.word);
        for (a, b) in table.conflicts().violations(&lights) {
            violations.push(Violation {
                kind: ViolationKind::Conflict,
                tick: run.start,
                detail: format!("{} grants {a} and {b}", run.word),
            });
        }
        for road in RoadId::ALL {
            let lamps = lights[road.slot()];
            if lamps.red && lamps.green_straight {
                violations.push(Violation {
                    kind: ViolationKind::RedAndGreen,
                    tick: run.start,
                    detail: format!("{} road {road} red with straight green", run.word),
                });
            }
        }
    }

    check_interposition(&runs, table, &mut violations);
    check_emergency_holds(&runs, trace.len() as u64, table, &mut violations);

    violations.sort_by_key(|v| (v.tick, v.kind));
    violations
}

/// Whether `from -> to` is a hand-over the traditional program performs on
/// its own, with only the program's own clearance words in between.
fn program_handover(table: &PhaseTable, from: OutputWord, to: OutputWord, gap: &[Run]) -> bool {
    let phases = table.traditional().phases();
    let n = phases.len();
    (0..n).filter(|&i| phases[i].word() == from).any(|i| {
        let mut between = Vec::new();
        for step in 1..=n {
            let word = phases[(i + step) % n].word();
            if is_green(word) {
                return word == to && gap.iter().all(|r| between.contains(&r.word));
            }
            between.push(word);
        }
        false
    })
}

fn check_interposition(runs: &[Run], table: &PhaseTable, violations: &mut Vec<Violation>) {
    let safe = table.safe_word();
    let required = u64::from(table.safe_transition_ticks());
    let mut last_green: Option<usize> = None;
    for (idx, run) in runs.iter().enumerate() {
        if !is_green(run.word) {
            continue;
        }
        if let Some(prev) = last_green {
            let from = runs[prev].word;
            if from != run.word {
                let gap = &runs[prev + 1..idx];
                let safe_ticks = gap
                    .iter()
                    .filter(|r| r.word == safe)
                    .map(|r| r.len)
                    .max()
                    .unwrap_or(0);
                if safe_ticks < required && !program_handover(table, from, run.word, gap) {
                    violations.push(Violation {
                        kind: ViolationKind::Interposition,
                        tick: run.start,
                        detail: format!(
                            "{from} -> {} with {safe_ticks} safe ticks between (need {required})",
                            run.word
                        ),
                    });
                }
            }
        }
        last_green = Some(idx);
    }
}

fn check_emergency_holds(runs: &[Run], trace_len: u64, table: &PhaseTable, violations: &mut Vec<Violation>) {
    let traditional: HashSet<OutputWord> = table.traditional().phases().iter().map(|p| p.word()).collect();
    for run in runs {
        if traditional.contains(&run.word) || run.start + run.len >= trace_len {
            continue;
        }
        if let Some(e) = table.emergencies().iter().find(|e| e.word() == run.word) {
            if run.len < u64::from(e.min_ticks) {
                violations.push(Violation {
                    kind: ViolationKind::ShortEmergencyHold,
                    tick: run.start,
                    detail: format!(
                        "{} for road {} held {} ticks (minimum {})",
                        run.word, e.road, run.len, e.min_ticks
                    ),
                });
            }
        }
    }
}

/// Result of exploring every state reachable from `init` under all inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reachability {
    /// Distinct (mode, word) pairs the controller can output.
    pub outputs: BTreeSet<(ModeTag, OutputWord)>,
    pub states: usize,
    pub transitions: usize,
    /// Reachable words that break the table's conflict matrix. Empty for a
    /// valid table.
    pub conflicting: Vec<OutputWord>,
}

impl Reachability {
    pub fn words(&self) -> BTreeSet<OutputWord> {
        self.outputs.iter().map(|&(_, w)| w).collect()
    }
}

/// Breadth-first closure of `step` over all eight input codes.
pub fn reachable_set(table: &PhaseTable) -> Reachability {
    let controller = Controller::new(table);
    let start = controller.init();
    let mut seen: HashSet<ControllerState> = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    let mut outputs = BTreeSet::new();
    let mut transitions = 0;

    while let Some(state) = queue.pop_front() {
        for input in InputCode::ALL {
            let (next, out) = controller.step(&state, input);
            transitions += 1;
            outputs.insert((out.mode, out.word));
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }

    let words: BTreeSet<OutputWord> = outputs.iter().map(|&(_, w)| w).collect();
    let conflicting = words
        .into_iter()
        .filter(|&w| !table.conflicts().violations(&decode_word(w)).is_empty())
        .collect();
    Reachability {
        outputs,
        states: seen.len(),
        transitions,
        conflicting,
    }
}
