//! Parsed junction description. Every node keeps the source span it came
//! from; spans are ignored by equality so a re-parsed pretty-print compares
//! equal to the original.

use std::hash::{Hash, Hasher};

use super::diagnostic::Span;
use crate::signal::MovementKind;

#[derive(Debug, Clone)]
pub struct Spanned<T> {
    pub value: T,
    pub span: Span,
}

impl<T> Spanned<T> {
    pub fn new(value: T, span: Span) -> Self {
        Spanned { value, span }
    }
}

impl<T: PartialEq> PartialEq for Spanned<T> {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl<T: Eq> Eq for Spanned<T> {}

impl<T: Hash> Hash for Spanned<T> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.value.hash(state)
    }
}

pub type Ident = Spanned<String>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JunctionSpec {
    pub name: Ident,
    pub road_count: Spanned<u32>,
    pub signal_names: Vec<Ident>,
    /// `None` selects the derived default conflict matrix.
    pub conflicts: Option<Vec<ConflictDecl>>,
    pub phases: Vec<PhaseDecl>,
    pub traditional: ProgramDecl,
    pub emergencies: Vec<EmergencyDecl>,
    pub safe: SafeDecl,
    pub timing: Option<TimingDecl>,
}

impl JunctionSpec {
    pub fn phase(&self, name: &str) -> Option<&PhaseDecl> {
        self.phases.iter().find(|p| p.name.value == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MovementRef {
    pub road: Spanned<u32>,
    pub kind: Spanned<MovementKind>,
}

impl MovementRef {
    pub fn span(&self) -> Span {
        let len = self.kind.span.column + self.kind.span.length - self.road.span.column;
        Span::new(self.road.span.line, self.road.span.column, len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictDecl {
    pub first: MovementRef,
    pub second: MovementRef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoadLightsDecl {
    pub road: Spanned<u32>,
    /// Names of the signals that are lit; everything else is dark.
    pub lit: Vec<Ident>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseDecl {
    pub name: Ident,
    pub duration: Spanned<u32>,
    pub roads: Vec<RoadLightsDecl>,
}

#[derive(Debug, Clone)]
pub struct ProgramDecl {
    pub keyword: Span,
    pub cycle: Vec<Ident>,
}

impl PartialEq for ProgramDecl {
    fn eq(&self, other: &Self) -> bool {
        self.cycle == other.cycle
    }
}

impl Eq for ProgramDecl {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmergencyDecl {
    pub road: Spanned<u32>,
    pub hold: Ident,
    pub min_ticks: Spanned<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafeDecl {
    pub phase: Ident,
    pub transition_ticks: Spanned<u32>,
}

/// Optional timing overrides. The only key is `safe_hold_min`, the minimum
/// number of ticks an operator safe hold lasts; without it the safe phase's
/// own duration is used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingDecl {
    pub entries: Vec<(Ident, Spanned<u32>)>,
}

pub const TIMING_SAFE_HOLD_MIN: &str = "safe_hold_min";
