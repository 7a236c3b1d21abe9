//! The Mealy controller: one `step` per tick, output chosen from the current
//! state and the command sampled at the start of that tick.
//!
//! Command codes: `0` traditional, `1..=4` emergency for road 1..4, `5`
//! operator safe hold, `6` and `7` reserved (ignored).
//!
//! Every hand-over between green patterns passes through the all-yellow safe
//! word for the table's transition length. A preempting command turns the
//! output safe on the very tick it is sampled, and that tick counts as the
//! first transition tick. Emergency and safe holds last at least their
//! minimum; a different command that arrives earlier is latched and acted on
//! once the minimum is reached. Releasing to traditional restarts the cycle
//! at phase 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{OutputWord, RoadId};
use crate::table::PhaseTable;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControllerError {
    #[error("input code {0} out of range 0..=7")]
    CodeOutOfRange(i64),
    #[error("unknown mode tag {0:?}")]
    UnknownModeTag(String),
}

/// The 3-bit command input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct InputCode(u8);

impl InputCode {
    pub const TRADITIONAL: InputCode = InputCode(0);
    pub const SAFE_HOLD: InputCode = InputCode(5);
    pub const ALL: [InputCode; 8] = [
        InputCode(0),
        InputCode(1),
        InputCode(2),
        InputCode(3),
        InputCode(4),
        InputCode(5),
        InputCode(6),
        InputCode(7),
    ];

    pub fn new(code: i64) -> Result<Self, ControllerError> {
        if (0..8).contains(&code) {
            Ok(InputCode(code as u8))
        } else {
            Err(ControllerError::CodeOutOfRange(code))
        }
    }

    pub fn emergency(road: RoadId) -> Self {
        InputCode(road.get())
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn decode(self) -> InputCommand {
        match self.0 {
            0 => InputCommand::Traditional,
            c @ 1..=4 => InputCommand::Emergency(RoadId::new(i64::from(c)).expect("1..=4")),
            5 => InputCommand::SafeHold,
            c => InputCommand::Reserved(c),
        }
    }

    /// The command this code requests, or `None` for reserved codes.
    pub fn command(self) -> Option<Command> {
        match self.decode() {
            InputCommand::Traditional => Some(Command::Traditional),
            InputCommand::Emergency(road) => Some(Command::Emergency(road)),
            InputCommand::SafeHold => Some(Command::SafeHold),
            InputCommand::Reserved(_) => None,
        }
    }

    pub fn is_reserved(self) -> bool {
        self.0 >= 6
    }
}

impl TryFrom<i64> for InputCode {
    type Error = ControllerError;

    fn try_from(code: i64) -> Result<Self, Self::Error> {
        InputCode::new(code)
    }
}

impl From<InputCode> for u8 {
    fn from(code: InputCode) -> u8 {
        code.0
    }
}

impl fmt::Display for InputCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputCommand {
    Traditional,
    Emergency(RoadId),
    SafeHold,
    /// Codes 6 and 7: accepted and ignored.
    Reserved(u8),
}

impl fmt::Display for InputCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputCommand::Traditional => f.write_str("traditional"),
            InputCommand::Emergency(road) => write!(f, "emergency road {road}"),
            InputCommand::SafeHold => f.write_str("safe hold"),
            InputCommand::Reserved(code) => write!(f, "reserved {code} (no-op)"),
        }
    }
}

pub fn decode_input(code: i64) -> Result<InputCommand, ControllerError> {
    Ok(InputCode::new(code)?.decode())
}

/// A non-reserved command, used as a transition target or latched request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Command {
    Traditional,
    Emergency(RoadId),
    SafeHold,
}

impl Command {
    pub fn code(self) -> InputCode {
        match self {
            Command::Traditional => InputCode::TRADITIONAL,
            Command::Emergency(road) => InputCode::emergency(road),
            Command::SafeHold => InputCode::SAFE_HOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerMode {
    /// `remaining` counts this tick, so it is in `1..=duration`.
    Traditional { phase: usize, remaining: u32 },
    /// Safe word on the way to `target`; `remaining` counts this tick.
    SafeTransition { target: Command, remaining: u32 },
    /// `held` is the number of hold ticks already output, saturating at the
    /// road's minimum.
    EmergencyHold { road: RoadId, held: u32 },
    SafeHold { held: u32 },
}

impl ControllerMode {
    pub fn tag(self) -> ModeTag {
        match self {
            ControllerMode::Traditional { .. } => ModeTag::Traditional,
            ControllerMode::SafeTransition { .. } => ModeTag::SafeTransition,
            ControllerMode::EmergencyHold { .. } => ModeTag::EmergencyHold,
            ControllerMode::SafeHold { .. } => ModeTag::SafeHold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeTag {
    Traditional,
    SafeTransition,
    EmergencyHold,
    SafeHold,
}

impl ModeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeTag::Traditional => "traditional",
            ModeTag::SafeTransition => "safe_transition",
            ModeTag::EmergencyHold => "emergency_hold",
            ModeTag::SafeHold => "safe_hold",
        }
    }
}

impl fmt::Display for ModeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModeTag {
    type Err = ControllerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            ModeTag::Traditional,
            ModeTag::SafeTransition,
            ModeTag::EmergencyHold,
            ModeTag::SafeHold,
        ]
        .into_iter()
        .find(|t| t.as_str() == s)
        .ok_or_else(|| ControllerError::UnknownModeTag(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ControllerState {
    pub mode: ControllerMode,
    /// A request that arrived before the current hold reached its minimum.
    pub latched: Option<Command>,
}

/// What the controller drove during one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StepOutput {
    pub word: OutputWord,
    pub mode: ModeTag,
    /// Traditional phase index, when in traditional mode.
    pub phase: Option<usize>,
    /// Ticks left in the current phase, transition, or minimum hold,
    /// counting this one.
    pub remaining: u32,
    pub latched: Option<Command>,
}

/// Step function bound to one compiled table.
#[derive(Debug, Clone, Copy)]
pub struct Controller<'t> {
    table: &'t PhaseTable,
}

impl<'t> Controller<'t> {
    pub fn new(table: &'t PhaseTable) -> Self {
        Controller { table }
    }

    pub fn table(&self) -> &'t PhaseTable {
        self.table
    }

    pub fn init(&self) -> ControllerState {
        ControllerState {
            mode: self.traditional_start(),
            latched: None,
        }
    }

    fn traditional_start(&self) -> ControllerMode {
        ControllerMode::Traditional {
            phase: 0,
            remaining: self.table.traditional().phase(0).duration_ticks(),
        }
    }

    fn min_hold(&self, mode: ControllerMode) -> u32 {
        match mode {
            ControllerMode::EmergencyHold { road, .. } => self.table.emergency(road).min_ticks,
            ControllerMode::SafeHold { .. } => self.table.min_safe_hold_ticks(),
            _ => 0,
        }
    }

    fn begin_transition(&self, target: Command) -> ControllerMode {
        ControllerMode::SafeTransition {
            target,
            remaining: self.table.safe_transition_ticks(),
        }
    }

    fn arrive(&self, target: Command) -> ControllerMode {
        match target {
            Command::Traditional => self.traditional_start(),
            Command::Emergency(road) => ControllerMode::EmergencyHold { road, held: 0 },
            Command::SafeHold => ControllerMode::SafeHold { held: 0 },
        }
    }

    /// Advances one tick. Total over every state and input.
    pub fn step(&self, state: &ControllerState, input: InputCode) -> (ControllerState, StepOutput) {
        let mut mode = state.mode;
        let mut latched = state.latched;

        // React to the sampled command.
        match mode {
            ControllerMode::Traditional { .. } => {
                if let Some(cmd) = input.command().filter(|&c| c != Command::Traditional) {
                    mode = self.begin_transition(cmd);
                    latched = None;
                }
            }
            ControllerMode::SafeTransition { .. } => {}
            ControllerMode::EmergencyHold { held, .. } | ControllerMode::SafeHold { held } => {
                let own = match mode {
                    ControllerMode::EmergencyHold { road, .. } => Command::Emergency(road),
                    _ => Command::SafeHold,
                };
                if let Some(cmd) = input.command() {
                    latched = (cmd != own).then_some(cmd);
                }
                if let Some(target) = latched.filter(|_| held >= self.min_hold(mode)) {
                    mode = self.begin_transition(target);
                    latched = None;
                }
            }
        }

        let output = self.output(mode, latched);

        // Count this tick.
        let next = match mode {
            ControllerMode::Traditional { phase, remaining } => {
                if remaining > 1 {
                    ControllerMode::Traditional {
                        phase,
                        remaining: remaining - 1,
                    }
                } else {
                    let program = self.table.traditional();
                    let phase = (phase + 1) % program.len();
                    ControllerMode::Traditional {
                        phase,
                        remaining: program.phase(phase).duration_ticks(),
                    }
                }
            }
            ControllerMode::SafeTransition { target, remaining } => {
                if remaining > 1 {
                    ControllerMode::SafeTransition {
                        target,
                        remaining: remaining - 1,
                    }
                } else {
                    latched = None;
                    self.arrive(target)
                }
            }
            ControllerMode::EmergencyHold { road, held } => ControllerMode::EmergencyHold {
                road,
                held: (held + 1).min(self.min_hold(mode)),
            },
            ControllerMode::SafeHold { held } => ControllerMode::SafeHold {
                held: (held + 1).min(self.min_hold(mode)),
            },
        };

        (
            ControllerState {
                mode: next,
                latched,
            },
            output,
        )
    }

    fn output(&self, mode: ControllerMode, latched: Option<Command>) -> StepOutput {
        let (word, phase, remaining) = match mode {
            ControllerMode::Traditional { phase, remaining } => {
                (self.table.traditional().phase(phase).word(), Some(phase), remaining)
            }
            ControllerMode::SafeTransition { remaining, .. } => (self.table.safe_word(), None, remaining),
            ControllerMode::EmergencyHold { road, held } => (
                self.table.emergency(road).word(),
                None,
                self.min_hold(mode).saturating_sub(held),
            ),
            ControllerMode::SafeHold { held } => {
                (self.table.safe_word(), None, self.min_hold(mode).saturating_sub(held))
            }
        };
        StepOutput {
            word,
            mode: mode.tag(),
            phase,
            remaining,
            latched,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{compile, compile_builtin};

    const SAFE: u32 = 0x410410;

    fn code(c: i64) -> InputCode {
        InputCode::new(c).unwrap()
    }

    fn road(r: i64) -> RoadId {
        RoadId::new(r).unwrap()
    }

    #[test]
    fn init_state() {
        let table = compile_builtin();
        let ctl = Controller::new(&table);
        let s = ctl.init();
        assert_eq!(s.mode, ControllerMode::Traditional { phase: 0, remaining: 60 });
        assert_eq!(s, ctl.init());
        let (_, out) = ctl.step(&s, InputCode::TRADITIONAL);
        assert_eq!(out.word.bits(), 0x3218A6);
    }

    #[test]
    fn single_phase_table() {
        let src = "junction one {\n roads 4\n signals [R, Y, GS, GR, GL, M]\n \
                   phase only duration 1 { road 1: [GS]; road 2: [R]; road 3: [R]; road 4: [R]; }\n \
                   phase e duration 1 { road 1: [GS, GR, GL]; road 2: [R]; road 3: [R]; road 4: [R]; }\n \
                   phase s duration 2 { road 1: [Y]; road 2: [Y]; road 3: [Y]; road 4: [Y]; }\n \
                   program traditional cycle [only]\n emergency road 1 hold e min 3\n safe s transition 2\n}";
        let table = compile(src).unwrap().table;
        let ctl = Controller::new(&table);
        let s = ctl.init();
        assert_eq!(s.mode, ControllerMode::Traditional { phase: 0, remaining: 1 });
        let (s2, out) = ctl.step(&s, InputCode::TRADITIONAL);
        assert_eq!(s2, s);
        assert_eq!(out.phase, Some(0));
    }

    #[test]
    fn first_phase_runs_sixty_ticks() {
        let table = compile_builtin();
        let ctl = Controller::new(&table);
        let mut s = ctl.init();
        for _ in 0..60 {
            let (next, out) = ctl.step(&s, InputCode::TRADITIONAL);
            assert_eq!(out.word.bits(), 0x3218A6);
            s = next;
        }
        assert_eq!(s.mode, ControllerMode::Traditional { phase: 1, remaining: 15 });
    }

    #[test]
    fn emergency_preempts_mid_phase() {
        let table = compile_builtin();
        let ctl = Controller::new(&table);
        let s = ControllerState {
            mode: ControllerMode::Traditional { phase: 2, remaining: 37 },
            latched: None,
        };
        let (next, out) = ctl.step(&s, code(1));
        assert_eq!(out.word.bits(), SAFE);
        assert_eq!(out.mode, ModeTag::SafeTransition);
        assert_eq!(out.remaining, 15);
        assert_eq!(
            next.mode,
            ControllerMode::SafeTransition { target: Command::Emergency(road(1)), remaining: 14 }
        );
    }

    #[test]
    fn transition_ends_in_emergency_hold() {
        let table = compile_builtin();
        let ctl = Controller::new(&table);
        let s = ControllerState {
            mode: ControllerMode::SafeTransition { target: Command::Emergency(road(1)), remaining: 1 },
            latched: None,
        };
        let (next, out) = ctl.step(&s, code(1));
        assert_eq!(out.word.bits(), SAFE);
        assert_eq!(next.mode, ControllerMode::EmergencyHold { road: road(1), held: 0 });
        let (_, out) = ctl.step(&next, code(1));
        assert_eq!(out.word.bits(), 0x3A0822);
        assert_eq!(out.remaining, 60);
    }

    #[test]
    fn mealy_output_depends_on_input() {
        let table = compile_builtin();
        let ctl = Controller::new(&table);
        let s = ctl.init();
        assert_eq!(ctl.step(&s, code(0)).1.word.bits(), 0x3218A6);
        assert_eq!(ctl.step(&s, code(1)).1.word.bits(), SAFE);
    }

    #[test]
    fn early_release_is_latched() {
        let table = compile_builtin();
        let ctl = Controller::new(&table);
        let mut s = ControllerState {
            mode: ControllerMode::EmergencyHold { road: road(2), held: 0 },
            latched: None,
        };
        let mut words = Vec::new();
        for _ in 0..70 {
            let (next, out) = ctl.step(&s, code(0));
            words.push(out.word.bits());
            if out.mode == ModeTag::EmergencyHold {
                assert_eq!(out.latched, Some(Command::Traditional));
            }
            s = next;
        }
        assert!(words[..60].iter().all(|&w| w == 0x88E820));
        assert!(words[60..70].iter().all(|&w| w == SAFE));
    }

    #[test]
    fn withdrawn_request_keeps_hold() {
        let table = compile_builtin();
        let ctl = Controller::new(&table);
        let mut s = ControllerState {
            mode: ControllerMode::EmergencyHold { road: road(1), held: 0 },
            latched: None,
        };
        for i in 0..100 {
            let input = if i == 10 { code(0) } else { code(1) };
            let (next, out) = ctl.step(&s, input);
            assert_eq!(out.word.bits(), 0x3A0822, "tick {i}");
            s = next;
        }
        assert_eq!(s.latched, None);
    }

    #[test]
    fn reserved_codes_do_nothing() {
        let table = compile_builtin();
        let ctl = Controller::new(&table);
        let s = ctl.init();
        assert_eq!(ctl.step(&s, code(6)), ctl.step(&s, code(0)));
        assert_eq!(ctl.step(&s, code(7)), ctl.step(&s, code(0)));

        // A reserved code during a hold keeps an earlier latch.
        let hold = ControllerState {
            mode: ControllerMode::EmergencyHold { road: road(1), held: 5 },
            latched: Some(Command::SafeHold),
        };
        assert_eq!(ctl.step(&hold, code(7)).0.latched, Some(Command::SafeHold));
    }

    #[test]
    fn safe_hold_then_release() {
        let table = compile_builtin();
        let ctl = Controller::new(&table);
        let mut s = ctl.init();
        let mut outs = Vec::new();
        // 5 for one tick, then 0.
        for i in 0..80 {
            let (next, out) = ctl.step(&s, if i == 0 { code(5) } else { code(0) });
            outs.push(out);
            s = next;
        }
        assert!(outs[..15].iter().all(|o| o.mode == ModeTag::SafeTransition));
        assert!(outs[15..30].iter().all(|o| o.mode == ModeTag::SafeHold));
        assert!(outs[30..45].iter().all(|o| o.mode == ModeTag::SafeTransition));
        assert!(outs[..45].iter().all(|o| o.word.bits() == SAFE));
        assert_eq!(outs[45].word.bits(), 0x3218A6);
        assert_eq!(outs[45].remaining, 60);
    }

    #[test]
    fn emergency_to_emergency_goes_through_safe() {
        let table = compile_builtin();
        let ctl = Controller::new(&table);
        let mut s = ControllerState {
            mode: ControllerMode::EmergencyHold { road: road(1), held: 60 },
            latched: None,
        };
        let mut words = Vec::new();
        for _ in 0..17 {
            let (next, out) = ctl.step(&s, code(3));
            words.push(out.word.bits());
            s = next;
        }
        assert!(words[..15].iter().all(|&w| w == SAFE));
        assert_eq!(words[15], 0x8223A0);
    }

    #[test]
    fn decode_inputs() {
        assert_eq!(decode_input(0).unwrap(), InputCommand::Traditional);
        assert_eq!(decode_input(3).unwrap(), InputCommand::Emergency(road(3)));
        assert_eq!(decode_input(5).unwrap(), InputCommand::SafeHold);
        assert_eq!(decode_input(6).unwrap(), InputCommand::Reserved(6));
        assert_eq!(decode_input(8), Err(ControllerError::CodeOutOfRange(8)));
        assert_eq!(decode_input(-1), Err(ControllerError::CodeOutOfRange(-1)));
        assert!(code(7).is_reserved());
        assert_eq!(decode_input(5).unwrap().to_string(), "safe hold");
    }

    #[test]
    fn mode_tags_parse() {
        for tag in ["traditional", "safe_transition", "emergency_hold", "safe_hold"] {
            assert_eq!(tag.parse::<ModeTag>().unwrap().as_str(), tag);
        }
        assert!("emergency".parse::<ModeTag>().is_err());
    }
}
