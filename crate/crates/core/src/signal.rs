//! Lamp vectors, the 24-bit junction output word and phase rotation.
//!
//! Each road carries six lamps. Within a road they are packed MSB-first as
//! `[red, yellow, green_straight, green_right, green_left, zebra]`, and the
//! four roads are packed MSB-first as road 1..4, so road 1 occupies bits
//! 23..18 and road 4 bits 5..0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of roads at the junction. The output word is fixed-width, so this
/// is not configurable.
pub const ROAD_COUNT: usize = 4;

/// Number of lamps per road.
pub const LAMPS_PER_ROAD: usize = 6;

const WORD_MASK: u32 = (1 << 24) - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignalError {
    #[error("output word {0:#x} does not fit in 24 bits")]
    WordOutOfRange(u32),
    #[error("invalid hex word {0:?}: expected exactly 6 hex digits")]
    BadHex(String),
    #[error("road index {0} out of range 1..=4")]
    BadRoad(i64),
    #[error("phase duration must be at least one tick")]
    ZeroDuration,
    #[error("phase program must contain at least one phase")]
    EmptyProgram,
}

/// The six lamps of one road.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LightVector {
    pub red: bool,
    pub yellow: bool,
    pub green_straight: bool,
    pub green_right: bool,
    pub green_left: bool,
    pub zebra: bool,
}

impl LightVector {
    pub const OFF: LightVector = LightVector::from_bits(0b000000);
    pub const RED: LightVector = LightVector::from_bits(0b100000);
    pub const YELLOW: LightVector = LightVector::from_bits(0b010000);

    /// Builds a vector from the six low bits, red in bit 5 and zebra in bit 0.
    pub const fn from_bits(bits: u8) -> Self {
        LightVector {
            red: bits & 0b100000 != 0,
            yellow: bits & 0b010000 != 0,
            green_straight: bits & 0b001000 != 0,
            green_right: bits & 0b000100 != 0,
            green_left: bits & 0b000010 != 0,
            zebra: bits & 0b000001 != 0,
        }
    }

    pub const fn bits(self) -> u8 {
        (self.red as u8) << 5
            | (self.yellow as u8) << 4
            | (self.green_straight as u8) << 3
            | (self.green_right as u8) << 2
            | (self.green_left as u8) << 1
            | (self.zebra as u8)
    }

    /// Lamps in canonical order.
    pub fn lamps(self) -> [bool; LAMPS_PER_ROAD] {
        [
            self.red,
            self.yellow,
            self.green_straight,
            self.green_right,
            self.green_left,
            self.zebra,
        ]
    }

    pub fn from_lamps(lamps: [bool; LAMPS_PER_ROAD]) -> Self {
        let [red, yellow, green_straight, green_right, green_left, zebra] = lamps;
        LightVector {
            red,
            yellow,
            green_straight,
            green_right,
            green_left,
            zebra,
        }
    }

    /// Whether this road's lamp for `kind` is lit.
    pub fn grants(self, kind: MovementKind) -> bool {
        match kind {
            MovementKind::Straight => self.green_straight,
            MovementKind::Right => self.green_right,
            MovementKind::Left => self.green_left,
            MovementKind::Zebra => self.zebra,
        }
    }

    /// True when any vehicular green or the walk lamp is lit.
    pub fn grants_any(self) -> bool {
        MovementKind::ALL.iter().any(|&k| self.grants(k))
    }
}

/// A road at the four-way junction, numbered 1..=4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoadId(u8);

impl RoadId {
    pub const ALL: [RoadId; ROAD_COUNT] = [RoadId(1), RoadId(2), RoadId(3), RoadId(4)];

    pub fn new(index: i64) -> Result<Self, SignalError> {
        if (1..=ROAD_COUNT as i64).contains(&index) {
            Ok(RoadId(index as u8))
        } else {
            Err(SignalError::BadRoad(index))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based slot in a `[LightVector; 4]`.
    pub fn slot(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn from_slot(slot: usize) -> Self {
        RoadId((slot % ROAD_COUNT) as u8 + 1)
    }
}

impl fmt::Display for RoadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The movement lamp kinds, i.e. every lamp except red and yellow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MovementKind {
    Straight,
    Right,
    Left,
    Zebra,
}

impl MovementKind {
    pub const ALL: [MovementKind; 4] = [
        MovementKind::Straight,
        MovementKind::Right,
        MovementKind::Left,
        MovementKind::Zebra,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            MovementKind::Straight => "straight",
            MovementKind::Right => "right",
            MovementKind::Left => "left",
            MovementKind::Zebra => "zebra",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        MovementKind::ALL.into_iter().find(|k| k.keyword() == s)
    }

    pub fn is_vehicular(self) -> bool {
        !matches!(self, MovementKind::Zebra)
    }
}

/// One granted movement: a road plus the lamp that permits it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Movement {
    pub road: RoadId,
    pub kind: MovementKind,
}

impl Movement {
    pub fn new(road: RoadId, kind: MovementKind) -> Self {
        Movement { road, kind }
    }

    /// All sixteen movements in road-major order.
    pub fn all() -> impl Iterator<Item = Movement> {
        RoadId::ALL
            .into_iter()
            .flat_map(|road| MovementKind::ALL.into_iter().map(move |kind| Movement { road, kind }))
    }

    pub fn granted_by(self, lights: &JunctionLights) -> bool {
        lights[self.road.slot()].grants(self.kind)
    }
}

impl fmt::Display for Movement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "road {}.{}", self.road, self.kind.keyword())
    }
}

/// Lamp vectors for roads 1..4, in that order.
pub type JunctionLights = [LightVector; ROAD_COUNT];

/// The 24-bit junction output.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct OutputWord(u32);

impl OutputWord {
    pub fn new(bits: u32) -> Result<Self, SignalError> {
        if bits & !WORD_MASK == 0 {
            Ok(OutputWord(bits))
        } else {
            Err(SignalError::WordOutOfRange(bits))
        }
    }

    /// For compile-time constants; panics on values wider than 24 bits.
    pub const fn from_const(bits: u32) -> Self {
        assert!(bits <= WORD_MASK);
        OutputWord(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Six uppercase hex digits.
    pub fn to_hex(self) -> String {
        format!("{:06X}", self.0)
    }

    /// Parses exactly six hex digits, either case.
    pub fn from_hex(text: &str) -> Result<Self, SignalError> {
        if text.len() != 6 || !text.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(SignalError::BadHex(text.to_string()));
        }
        let bits = u32::from_str_radix(text, 16).map_err(|_| SignalError::BadHex(text.to_string()))?;
        Ok(OutputWord(bits))
    }

    pub fn road(self, road: RoadId) -> LightVector {
        decode_word(self)[road.slot()]
    }
}

impl fmt::Display for OutputWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:06X}", self.0)
    }
}

impl FromStr for OutputWord {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OutputWord::from_hex(s)
    }
}

impl TryFrom<u32> for OutputWord {
    type Error = SignalError;

    fn try_from(bits: u32) -> Result<Self, Self::Error> {
        OutputWord::new(bits)
    }
}

impl From<OutputWord> for u32 {
    fn from(word: OutputWord) -> u32 {
        word.0
    }
}

pub fn encode_word(lights: &JunctionLights) -> OutputWord {
    let bits = lights
        .iter()
        .fold(0u32, |acc, road| (acc << LAMPS_PER_ROAD) | u32::from(road.bits()));
    OutputWord(bits)
}

pub fn decode_word(word: OutputWord) -> JunctionLights {
    let mut lights = [LightVector::OFF; ROAD_COUNT];
    for (slot, road) in lights.iter_mut().enumerate() {
        let shift = LAMPS_PER_ROAD * (ROAD_COUNT - 1 - slot);
        *road = LightVector::from_bits(((word.0 >> shift) & 0b111111) as u8);
    }
    lights
}

/// Moves every road's lamps `k` positions forward: road `i` of the result
/// shows what road `i - k` (mod 4) showed.
pub fn rotate_lights(lights: &JunctionLights, k: i64) -> JunctionLights {
    let k = k.rem_euclid(ROAD_COUNT as i64) as usize;
    std::array::from_fn(|slot| lights[(slot + ROAD_COUNT - k) % ROAD_COUNT])
}

/// A fixed lamp assignment held for `duration_ticks` ticks (one tick is one
/// second of junction time).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Phase {
    lights: JunctionLights,
    duration_ticks: u32,
}

impl Phase {
    pub fn new(lights: JunctionLights, duration_ticks: u32) -> Result<Self, SignalError> {
        if duration_ticks == 0 {
            return Err(SignalError::ZeroDuration);
        }
        Ok(Phase {
            lights,
            duration_ticks,
        })
    }

    pub fn lights(&self) -> &JunctionLights {
        &self.lights
    }

    pub fn duration_ticks(&self) -> u32 {
        self.duration_ticks
    }

    pub fn word(&self) -> OutputWord {
        encode_word(&self.lights)
    }
}

pub fn rotate_roads(phase: &Phase, k: i64) -> Phase {
    Phase {
        lights: rotate_lights(&phase.lights, k),
        duration_ticks: phase.duration_ticks,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseProgram {
    phases: Vec<Phase>,
    cyclic: bool,
}

impl PhaseProgram {
    pub fn new(phases: Vec<Phase>, cyclic: bool) -> Result<Self, SignalError> {
        if phases.is_empty() {
            return Err(SignalError::EmptyProgram);
        }
        Ok(PhaseProgram { phases, cyclic })
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    pub fn phase(&self, index: usize) -> &Phase {
        &self.phases[index]
    }

    /// Ticks in one pass through the program.
    pub fn period(&self) -> u64 {
        self.phases.iter().map(|p| u64::from(p.duration_ticks)).sum()
    }
}

/// Output words printed in the reference timing tables.
pub mod reference {
    use super::OutputWord;

    /// Traditional cycle, one word per row, with durations in ticks.
    pub const TRADITIONAL: [(OutputWord, u32); 8] = [
        (OutputWord::from_const(0x3218A6), 60),
        (OutputWord::from_const(0x410820), 15),
        (OutputWord::from_const(0x98C862), 60),
        (OutputWord::from_const(0x810420), 15),
        (OutputWord::from_const(0x8A6321), 60),
        (OutputWord::from_const(0x820410), 15),
        (OutputWord::from_const(0x86298C), 60),
        (OutputWord::from_const(0x420810), 15),
    ];

    /// All roads yellow.
    pub const SAFE: OutputWord = OutputWord::from_const(0x410410);

    /// Road 1 gets straight, right and left greens.
    pub const EMERGENCY_ROAD1_HOLD: OutputWord = OutputWord::from_const(0x3A0822);

    pub const SAFE_TRANSITION_TICKS: u32 = 15;
    pub const MIN_EMERGENCY_TICKS: u32 = 60;
    pub const MIN_SAFE_HOLD_TICKS: u32 = 15;

    /// The ten distinct printed words.
    pub fn printed_words() -> Vec<OutputWord> {
        let mut words: Vec<OutputWord> = TRADITIONAL.iter().map(|&(w, _)| w).collect();
        words.push(SAFE);
        words.push(EMERGENCY_ROAD1_HOLD);
        words
    }
}
