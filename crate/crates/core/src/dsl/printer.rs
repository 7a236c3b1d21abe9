//! Canonical text form of a [`JunctionSpec`].

use std::fmt::Write as _;

use super::ast::*;

fn join(idents: &[Ident]) -> String {
    idents.iter().map(|i| i.value.as_str()).collect::<Vec<_>>().join(", ")
}

fn movement(m: &MovementRef) -> String {
    format!("road {}.{}", m.road.value, m.kind.value.keyword())
}

pub fn pretty_print(spec: &JunctionSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "junction {} {{", spec.name.value);
    let _ = writeln!(out, "  roads {}", spec.road_count.value);
    let _ = writeln!(out, "  signals [{}]", join(&spec.signal_names));
    if let Some(conflicts) = &spec.conflicts {
        let _ = writeln!(out, "  conflicts {{");
        for pair in conflicts {
            let _ = writeln!(out, "    {} x {};", movement(&pair.first), movement(&pair.second));
        }
        let _ = writeln!(out, "  }}");
    }
    for phase in &spec.phases {
        let _ = writeln!(out, "  phase {} duration {} {{", phase.name.value, phase.duration.value);
        for road in &phase.roads {
            let _ = writeln!(out, "    road {}: [{}];", road.road.value, join(&road.lit));
        }
        let _ = writeln!(out, "  }}");
    }
    let _ = writeln!(out, "  program traditional cycle [{}]", join(&spec.traditional.cycle));
    for e in &spec.emergencies {
        let _ = writeln!(
            out,
            "  emergency road {} hold {} min {}",
            e.road.value, e.hold.value, e.min_ticks.value
        );
    }
    let _ = writeln!(
        out,
        "  safe {} transition {}",
        spec.safe.phase.value, spec.safe.transition_ticks.value
    );
    if let Some(timing) = &spec.timing {
        let _ = writeln!(out, "  timing {{");
        for (key, value) in &timing.entries {
            let _ = writeln!(out, "    {} {};", key.value, value.value);
        }
        let _ = writeln!(out, "  }}");
    }
    out.push_str("}\n");
    out
}
