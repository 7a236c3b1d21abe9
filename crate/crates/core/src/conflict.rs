//! Movement conflict matrix.

use std::collections::BTreeSet;

use crate::signal::{
    decode_word, reference, rotate_lights, JunctionLights, Movement, ROAD_COUNT,
};

/// Unordered pairs of movements that must never be granted together.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ConflictMatrix {
    pairs: BTreeSet<(Movement, Movement)>,
}

fn ordered(a: Movement, b: Movement) -> (Movement, Movement) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl ConflictMatrix {
    pub fn new(pairs: impl IntoIterator<Item = (Movement, Movement)>) -> Self {
        ConflictMatrix {
            pairs: pairs.into_iter().map(|(a, b)| ordered(a, b)).collect(),
        }
    }

    /// The largest matrix under which every reference word, in every road
    /// rotation, is conflict-free.
    ///
    /// A pair conflicts iff no reference word grants both movements at once.
    /// Pairs of vehicular movements on the same road share one approach and
    /// are never listed.
    pub fn derived_default() -> Self {
        let granting: Vec<JunctionLights> = reference::printed_words()
            .into_iter()
            .flat_map(|w| {
                let lights = decode_word(w);
                (0..ROAD_COUNT as i64).map(move |k| rotate_lights(&lights, k))
            })
            .collect();

        let movements: Vec<Movement> = Movement::all().collect();
        let mut pairs = BTreeSet::new();
        for (i, &a) in movements.iter().enumerate() {
            for &b in &movements[i + 1..] {
                let same_approach =
                    a.road == b.road && a.kind.is_vehicular() && b.kind.is_vehicular();
                if same_approach {
                    continue;
                }
                let seen_together = granting
                    .iter()
                    .any(|lights| a.granted_by(lights) && b.granted_by(lights));
                if !seen_together {
                    pairs.insert((a, b));
                }
            }
        }
        ConflictMatrix { pairs }
    }

    pub fn conflicts(&self, a: Movement, b: Movement) -> bool {
        self.pairs.contains(&ordered(a, b))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Movement, Movement)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Every conflicting pair that `lights` grants simultaneously.
    pub fn violations(&self, lights: &JunctionLights) -> Vec<(Movement, Movement)> {
        self.pairs
            .iter()
            .filter(|(a, b)| a.granted_by(lights) && b.granted_by(lights))
            .copied()
            .collect()
    }
}
