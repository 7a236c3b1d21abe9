use std::collections::BTreeSet;

use junction_core::dsl::{compile_builtin, parse, pretty_print, builtin_paper_junction};
use junction_core::safety::{check_trace, reachable_set};
use junction_core::signal::rotate_lights;
use junction_core::vcd::{read_vcd, write_vcd, VcdDump};
use junction_core::{decode_word, encode_word, run, InputCode, OutputWord, Scenario};
use proptest::prelude::*;

fn scenario() -> impl Strategy<Value = Scenario> {
    (1u64..1500, prop::collection::vec((1u64..120, 0i64..8), 0..12)).prop_map(|(ticks, steps)| {
        let mut events = Vec::new();
        let mut at = 0;
        for (gap, code) in steps {
            at += gap;
            if at >= ticks {
                break;
            }
            events.push((at, InputCode::new(code).unwrap()));
        }
        Scenario::new("prop", ticks, events).unwrap()
    })
}

proptest! {
    #[test]
    fn word_round_trip(bits in 0u32..(1 << 24)) {
        let word = OutputWord::new(bits).unwrap();
        prop_assert_eq!(encode_word(&decode_word(word)), word);
        prop_assert_eq!(OutputWord::from_hex(&word.to_hex()).unwrap(), word);
    }

    #[test]
    fn rotation_composes(bits in 0u32..(1 << 24), a in -8i64..8, b in -8i64..8) {
        let lights = decode_word(OutputWord::new(bits).unwrap());
        prop_assert_eq!(rotate_lights(&rotate_lights(&lights, a), b), rotate_lights(&lights, a + b));
        prop_assert_eq!(rotate_lights(&lights, 4), lights);
    }

    #[test]
    fn runs_are_deterministic(s in scenario()) {
        let table = compile_builtin();
        prop_assert_eq!(run(&s, &table), run(&s, &table));
    }

    #[test]
    fn random_scenarios_are_safe(s in scenario()) {
        let table = compile_builtin();
        let trace = run(&s, &table);
        let violations = check_trace(&trace, &table).unwrap();
        prop_assert!(violations.is_empty(), "{:?}", violations);
    }

    #[test]
    fn outputs_are_reachable(s in scenario()) {
        let table = compile_builtin();
        let reachable = reachable_set(&table).outputs;
        for r in run(&s, &table).records {
            prop_assert!(reachable.contains(&(r.mode, r.output)));
        }
    }

    #[test]
    fn scenario_text_round_trips(s in scenario()) {
        prop_assert_eq!(Scenario::parse("prop", &s.to_text()).unwrap(), s);
    }

    #[test]
    fn input_stream_round_trips(s in scenario()) {
        let inputs: Vec<_> = s.inputs().collect();
        prop_assert_eq!(inputs.len() as u64, s.total_ticks());
        let rebuilt = Scenario::from_inputs("prop", &inputs).unwrap();
        prop_assert_eq!(rebuilt.inputs().collect::<Vec<_>>(), inputs);
    }

    #[test]
    fn vcd_invariants(s in scenario()) {
        let trace = run(&s, &compile_builtin());
        let text = write_vcd(&trace).unwrap();
        let dump = read_vcd(&text).unwrap();
        prop_assert_eq!(dump.ticks, trace.len() as u64);
        prop_assert_eq!(dump.render(), text.clone());
        prop_assert_eq!(&dump, &VcdDump::from_trace(&trace).unwrap());

        let lights = dump.signal("lights").unwrap();
        let words: Vec<u32> = trace.records.iter().map(|r| r.output.bits()).collect();
        prop_assert_eq!(lights.samples(dump.ticks), words.clone());
        let changes = 1 + words.windows(2).filter(|w| w[0] != w[1]).count();
        prop_assert_eq!(lights.changes.len(), changes);

        let scalars: Vec<_> = dump.signals.iter().filter(|s| s.width == 1).collect();
        prop_assert_eq!(scalars.len(), 24);
        for t in 0..dump.ticks {
            let packed = scalars.iter().fold(0, |acc, s| (acc << 1) | s.value_at(t).unwrap());
            prop_assert_eq!(packed, lights.value_at(t).unwrap());
        }
        let inputs: Vec<u32> = trace.records.iter().map(|r| r.input.get().into()).collect();
        prop_assert_eq!(dump.signal("state_in").unwrap().samples(dump.ticks), inputs);
    }
}

#[test]
fn steady_traditional_input_repeats_every_300_ticks() {
    let table = compile_builtin();
    let trace = run(&Scenario::new("long", 1200, vec![]).unwrap(), &table);
    for r in &trace.records[300..] {
        assert_eq!(r.output, trace.records[(r.tick - 300) as usize].output);
    }
    assert_eq!(table.traditional().period(), 300);
}

#[test]
fn piecewise_constant_input_matches_its_events() {
    let table = compile_builtin();
    let s = Scenario::parse("p", "ticks 500\nat 5 input 2\nat 50 input 0\nat 60 input 6\n").unwrap();
    let trace = run(&s, &table);
    for r in &trace.records {
        let expected = match r.tick {
            0..5 => 0,
            5..50 => 2,
            50..60 => 0,
            _ => 6,
        };
        assert_eq!(r.input.get(), expected, "tick {}", r.tick);
    }
    // The release requested at 50 survives the reserved code and fires
    // once the hold that began at 20 has lasted its minimum.
    let release = trace.records.iter().find(|r| r.tick > 5 && r.mode.as_str() == "traditional").unwrap();
    assert_eq!(release.tick, 20 + 60 + 15);
}

#[test]
fn printed_source_round_trips() {
    let spec = parse(builtin_paper_junction()).unwrap();
    let printed = pretty_print(&spec);
    assert_eq!(parse(&printed).unwrap(), spec);
    assert_eq!(pretty_print(&parse(&printed).unwrap()), printed);
}

#[test]
fn reachable_words() {
    let reach = reachable_set(&compile_builtin());
    let words: BTreeSet<String> = reach.words().into_iter().map(|w| w.to_hex()).collect();
    let expected: BTreeSet<String> = [
        "3218A6", "3A0822", "410410", "410820", "420810", "810420", "820410", "82088E", "8223A0",
        "86298C", "88E820", "8A6321", "98C862",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    assert_eq!(words, expected);
    assert!(reach.conflicting.is_empty());
}
