//! Cycle-accurate simulator and tooling for a four-road, six-lamp Mealy
//! traffic controller.
//!
//! - [`signal`]: lamp vectors and the 24-bit output word.
//! - [`dsl`]: junction description language, validation, Verilog emission.
//! - [`controller`]: the per-tick step function.
//! - [`sim`]: scenarios and traces.
//! - [`safety`]: trace checks and exhaustive reachability.
//! - [`vcd`]: waveform dumps.

pub mod conflict;
pub mod controller;
pub mod dsl;
pub mod safety;
pub mod signal;
pub mod sim;
pub mod table;
pub mod vcd;

pub use conflict::ConflictMatrix;
pub use controller::{Controller, ControllerMode, ControllerState, InputCode, ModeTag};
pub use signal::{decode_word, encode_word, rotate_roads, LightVector, OutputWord, Phase, RoadId};
pub use sim::{compare_traces, run, Scenario, Trace, TraceRecord};
pub use table::PhaseTable;

/// Scenario files shipped with the crate.
pub mod fixtures {
    pub const TRADITIONAL_300: &str = include_str!("../fixtures/traditional_300.scn");
    pub const EMERGENCY_ROAD1: &str = include_str!("../fixtures/emergency_road1.scn");
    pub const SAFE_HOLD: &str = include_str!("../fixtures/safe_hold.scn");

    /// Looks up a shipped fixture by file name.
    pub fn by_name(name: &str) -> Option<&'static str> {
        match name {
            "paper.junction" => Some(crate::dsl::builtin_paper_junction()),
            "traditional_300.scn" => Some(TRADITIONAL_300),
            "emergency_road1.scn" => Some(EMERGENCY_ROAD1),
            "safe_hold.scn" => Some(SAFE_HOLD),
            _ => None,
        }
    }
}
