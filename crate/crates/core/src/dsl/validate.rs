//! Semantic checks and lowering from [`JunctionSpec`] to [`PhaseTable`].

use std::collections::{BTreeMap, HashMap, HashSet};

use super::ast::*;
use super::diagnostic::{has_errors, Diagnostic, Span};
use crate::conflict::ConflictMatrix;
use crate::signal::{
    rotate_lights, JunctionLights, LightVector, Movement, Phase, PhaseProgram, RoadId,
    LAMPS_PER_ROAD, ROAD_COUNT,
};
use crate::table::{EmergencyPattern, PhaseTable};

/// A validated table plus any non-fatal findings.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub table: PhaseTable,
    pub warnings: Vec<Diagnostic>,
}

pub fn validate(spec: &JunctionSpec) -> Result<Compiled, Vec<Diagnostic>> {
    let mut cx = Checker::default();

    if spec.road_count.value as usize != ROAD_COUNT {
        cx.error(
            spec.road_count.span,
            format!(
                "junction must have exactly {ROAD_COUNT} roads, found {}",
                spec.road_count.value
            ),
        );
    }

    let lamp_index = cx.signals(&spec.signal_names);
    let conflicts = match &spec.conflicts {
        Some(decls) => cx.conflicts(decls),
        None => ConflictMatrix::derived_default(),
    };

    let mut phases: HashMap<&str, Phase> = HashMap::new();
    for decl in &spec.phases {
        if let Some(phase) = cx.phase(decl, &lamp_index) {
            cx.check_lights(phase.lights(), &conflicts, decl.name.span, &format!("phase '{}'", decl.name.value));
            phases.insert(&decl.name.value, phase);
        }
    }

    let mut traditional = Vec::new();
    for ident in &spec.traditional.cycle {
        if let Some(p) = phases.get(ident.value.as_str()) {
            traditional.push(p.clone());
        }
    }

    let safe = phases.get(spec.safe.phase.value.as_str()).cloned();
    if let Some(safe) = &safe {
        if safe.lights().iter().any(|road| *road != LightVector::YELLOW) {
            cx.error(
                spec.safe.phase.span,
                format!(
                    "safe phase '{}' must be all-yellow on every road",
                    spec.safe.phase.value
                ),
            );
        }
    }
    if spec.safe.transition_ticks.value == 0 {
        cx.error(spec.safe.transition_ticks.span, "safe transition must last at least one tick");
    }

    let emergencies = cx.emergencies(spec, &phases, &conflicts);
    let min_safe_hold = cx.timing(spec.timing.as_ref(), safe.as_ref());

    let referenced: HashSet<&str> = spec
        .traditional
        .cycle
        .iter()
        .chain(spec.emergencies.iter().map(|e| &e.hold))
        .chain(std::iter::once(&spec.safe.phase))
        .map(|i| i.value.as_str())
        .collect();
    for decl in &spec.phases {
        if !referenced.contains(decl.name.value.as_str()) {
            cx.diagnostics.push(Diagnostic::warning(
                decl.name.span,
                format!("phase '{}' is never used", decl.name.value),
            ));
        }
    }

    if has_errors(&cx.diagnostics) {
        cx.diagnostics.sort_by_key(|d| d.span);
        return Err(cx.diagnostics);
    }

    let (Some(safe), Some(emergencies), Some(min_safe_hold)) = (safe, emergencies, min_safe_hold) else {
        unreachable!("missing pieces always come with an error diagnostic");
    };
    let program = PhaseProgram::new(traditional, true).expect("grammar requires a non-empty cycle");
    let table = PhaseTable {
        name: spec.name.value.clone(),
        traditional: program,
        traditional_names: spec.traditional.cycle.iter().map(|i| i.value.clone()).collect(),
        emergencies,
        safe_name: spec.safe.phase.value.clone(),
        safe,
        safe_transition_ticks: spec.safe.transition_ticks.value,
        min_safe_hold_ticks: min_safe_hold,
        conflicts,
    };
    Ok(Compiled {
        table,
        warnings: cx.diagnostics,
    })
}

#[derive(Default)]
struct Checker {
    diagnostics: Vec<Diagnostic>,
}

impl Checker {
    fn error(&mut self, span: Span, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic::error(span, message));
    }

    fn road(&mut self, road: &Spanned<u32>) -> Option<RoadId> {
        match RoadId::new(i64::from(road.value)) {
            Ok(id) => Some(id),
            Err(_) => {
                self.error(
                    road.span,
                    format!("road {} is out of range 1..={ROAD_COUNT}", road.value),
                );
                None
            }
        }
    }

    fn signals(&mut self, names: &[Ident]) -> HashMap<String, usize> {
        if names.len() != LAMPS_PER_ROAD {
            let span = names.first().map(|n| n.span).unwrap_or_default();
            self.error(
                span,
                format!(
                    "expected {LAMPS_PER_ROAD} signals (red, yellow, straight, right, left, zebra), found {}",
                    names.len()
                ),
            );
        }
        let mut index = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.value.clone(), i).is_some() {
                self.error(name.span, format!("duplicate signal '{}'", name.value));
            }
        }
        index
    }

    fn conflicts(&mut self, decls: &[ConflictDecl]) -> ConflictMatrix {
        let mut pairs = Vec::new();
        for decl in decls {
            let first = self.road(&decl.first.road).map(|r| Movement::new(r, decl.first.kind.value));
            let second = self.road(&decl.second.road).map(|r| Movement::new(r, decl.second.kind.value));
            if let (Some(a), Some(b)) = (first, second) {
                if a == b {
                    self.error(decl.first.span(), format!("movement {a} cannot conflict with itself"));
                } else {
                    pairs.push((a, b));
                }
            }
        }
        ConflictMatrix::new(pairs)
    }

    fn phase(&mut self, decl: &PhaseDecl, lamp_index: &HashMap<String, usize>) -> Option<Phase> {
        let before = self.diagnostics.len();
        if decl.duration.value == 0 {
            self.error(
                decl.duration.span,
                format!("phase '{}' has zero duration; durations must be at least one tick", decl.name.value),
            );
        }
        let mut lights: [Option<LightVector>; ROAD_COUNT] = [None; ROAD_COUNT];
        for road_decl in &decl.roads {
            let Some(road) = self.road(&road_decl.road) else {
                continue;
            };
            let mut lamps = [false; LAMPS_PER_ROAD];
            for name in &road_decl.lit {
                match lamp_index.get(&name.value) {
                    Some(&i) if i < LAMPS_PER_ROAD => lamps[i] = true,
                    _ => self.error(name.span, format!("unknown signal '{}'", name.value)),
                }
            }
            if lights[road.slot()].is_some() {
                self.error(
                    road_decl.road.span,
                    format!("phase '{}' sets road {road} twice", decl.name.value),
                );
            }
            lights[road.slot()] = Some(LightVector::from_lamps(lamps));
        }
        for road in RoadId::ALL {
            if lights[road.slot()].is_none() {
                self.error(
                    decl.name.span,
                    format!("phase '{}' has no lamps for road {road}", decl.name.value),
                );
            }
        }
        if self.diagnostics.len() > before {
            return None;
        }
        Phase::new(lights.map(Option::unwrap), decl.duration.value).ok()
    }

    fn check_lights(&mut self, lights: &JunctionLights, conflicts: &ConflictMatrix, span: Span, what: &str) {
        for (a, b) in conflicts.violations(lights) {
            self.error(span, format!("{what} grants conflicting movements {a} and {b}"));
        }
        for road in RoadId::ALL {
            let lamps = lights[road.slot()];
            if lamps.red && lamps.green_straight {
                self.error(span, format!("{what} shows red and straight green together on road {road}"));
            }
        }
    }

    fn emergencies(
        &mut self,
        spec: &JunctionSpec,
        phases: &HashMap<&str, Phase>,
        conflicts: &ConflictMatrix,
    ) -> Option<[EmergencyPattern; ROAD_COUNT]> {
        let mut declared: BTreeMap<RoadId, (EmergencyPattern, Span)> = BTreeMap::new();
        for decl in &spec.emergencies {
            let road = self.road(&decl.road);
            if decl.min_ticks.value == 0 {
                self.error(decl.min_ticks.span, "emergency minimum hold must be at least one tick");
            }
            let (Some(road), Some(phase)) = (road, phases.get(decl.hold.value.as_str())) else {
                continue;
            };
            let pattern = EmergencyPattern {
                road,
                name: decl.hold.value.clone(),
                phase: phase.clone(),
                min_ticks: decl.min_ticks.value,
                rotated_from: None,
            };
            declared.insert(road, (pattern, decl.hold.span));
        }

        let Some((base, base_span)) = declared.values().next().cloned() else {
            if spec.emergencies.is_empty() {
                self.error(spec.name.span, "junction declares no emergency hold");
            }
            return None;
        };

        let mut out = Vec::with_capacity(ROAD_COUNT);
        for road in RoadId::ALL {
            if let Some((pattern, _)) = declared.get(&road) {
                out.push(pattern.clone());
                continue;
            }
            let k = road.slot() as i64 - base.road.slot() as i64;
            let lights = rotate_lights(base.phase.lights(), k);
            self.check_lights(
                &lights,
                conflicts,
                base_span,
                &format!("emergency hold for road {road} (rotated from road {})", base.road),
            );
            out.push(EmergencyPattern {
                road,
                name: format!("{}@road{road}", base.name),
                phase: Phase::new(lights, base.phase.duration_ticks()).ok()?,
                min_ticks: base.min_ticks,
                rotated_from: Some(base.road),
            });
        }
        out.try_into().ok()
    }

    fn timing(&mut self, timing: Option<&TimingDecl>, safe: Option<&Phase>) -> Option<u32> {
        let mut min_safe_hold = safe.map(Phase::duration_ticks);
        for (key, value) in timing.map(|t| t.entries.as_slice()).unwrap_or_default() {
            if key.value == TIMING_SAFE_HOLD_MIN {
                if value.value == 0 {
                    self.error(value.span, "safe hold minimum must be at least one tick");
                }
                min_safe_hold = Some(value.value);
            } else {
                self.error(
                    key.span,
                    format!("unknown timing key '{}', expected '{TIMING_SAFE_HOLD_MIN}'", key.value),
                );
            }
        }
        min_safe_hold
    }
}
