//! The compiled, immutable controller table.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::conflict::ConflictMatrix;
use crate::signal::{OutputWord, Phase, PhaseProgram, RoadId, ROAD_COUNT};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EmergencyPattern {
    pub road: RoadId,
    /// Source phase name. Rotated patterns carry `<name>@road<k>`.
    pub name: String,
    pub phase: Phase,
    pub min_ticks: u32,
    /// Set when the pattern was produced by rotating another road's hold.
    pub rotated_from: Option<RoadId>,
}

impl EmergencyPattern {
    pub fn word(&self) -> OutputWord {
        self.phase.word()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhaseTable {
    pub(crate) name: String,
    pub(crate) traditional: PhaseProgram,
    pub(crate) traditional_names: Vec<String>,
    pub(crate) emergencies: [EmergencyPattern; ROAD_COUNT],
    pub(crate) safe_name: String,
    pub(crate) safe: Phase,
    pub(crate) safe_transition_ticks: u32,
    pub(crate) min_safe_hold_ticks: u32,
    pub(crate) conflicts: ConflictMatrix,
}

impl PhaseTable {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn traditional(&self) -> &PhaseProgram {
        &self.traditional
    }

    pub fn traditional_name(&self, index: usize) -> &str {
        &self.traditional_names[index]
    }

    pub fn emergency(&self, road: RoadId) -> &EmergencyPattern {
        &self.emergencies[road.slot()]
    }

    pub fn emergencies(&self) -> &[EmergencyPattern; ROAD_COUNT] {
        &self.emergencies
    }

    pub fn safe_name(&self) -> &str {
        &self.safe_name
    }

    pub fn safe_phase(&self) -> &Phase {
        &self.safe
    }

    pub fn safe_word(&self) -> OutputWord {
        self.safe.word()
    }

    pub fn safe_transition_ticks(&self) -> u32 {
        self.safe_transition_ticks
    }

    pub fn min_safe_hold_ticks(&self) -> u32 {
        self.min_safe_hold_ticks
    }

    pub fn conflicts(&self) -> &ConflictMatrix {
        &self.conflicts
    }

    /// Traditional phase words in program order, with durations.
    pub fn traditional_words(&self) -> Vec<(OutputWord, u32)> {
        self.traditional
            .phases()
            .iter()
            .map(|p| (p.word(), p.duration_ticks()))
            .collect()
    }

    /// Every word the table can drive: traditional phases, safe, emergency
    /// holds. Sorted, deduplicated.
    pub fn all_words(&self) -> Vec<OutputWord> {
        let mut words: Vec<OutputWord> = self
            .traditional
            .phases()
            .iter()
            .map(Phase::word)
            .chain(std::iter::once(self.safe_word()))
            .chain(self.emergencies.iter().map(EmergencyPattern::word))
            .collect();
        words.sort();
        words.dedup();
        words
    }

    pub fn is_emergency_word(&self, word: OutputWord) -> bool {
        self.emergencies.iter().any(|e| e.word() == word)
    }

    /// SHA-256 over a canonical rendering of everything that affects
    /// controller behaviour, as lowercase hex.
    pub fn content_hash(&self) -> String {
        let mut canon = String::new();
        let _ = writeln!(canon, "table {}", self.name);
        for (name, phase) in self.traditional_names.iter().zip(self.traditional.phases()) {
            let _ = writeln!(canon, "phase {name} {} {}", phase.word(), phase.duration_ticks());
        }
        for e in &self.emergencies {
            let _ = writeln!(canon, "emergency {} {} {}", e.road, e.word(), e.min_ticks);
        }
        let _ = writeln!(
            canon,
            "safe {} {} {}",
            self.safe_word(),
            self.safe_transition_ticks,
            self.min_safe_hold_ticks
        );
        for (a, b) in self.conflicts.pairs() {
            let _ = writeln!(canon, "conflict {a} x {b}");
        }
        Sha256::digest(canon.as_bytes())
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }
}
