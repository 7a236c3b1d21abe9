//! Simulator output against traces frozen from an independent model.

use junction_core::dsl::compile_builtin;
use junction_core::{compare_traces, fixtures, run, ModeTag, Scenario, Trace};

fn golden(name: &str) -> &'static str {
    match name {
        "traditional_300" => include_str!("../fixtures/golden/traditional_300.csv"),
        "emergency_road1" => include_str!("../fixtures/golden/emergency_road1.csv"),
        "safe_hold" => include_str!("../fixtures/golden/safe_hold.csv"),
        _ => unreachable!(),
    }
}

fn simulate(name: &str) -> Trace {
    let text = fixtures::by_name(&format!("{name}.scn")).unwrap();
    run(&Scenario::parse(name, text).unwrap(), &compile_builtin())
}

/// `(first tick, hex, mode)` for each maximal run of equal output.
fn segments(trace: &Trace) -> Vec<(u64, String, ModeTag)> {
    let mut out: Vec<(u64, String, ModeTag)> = Vec::new();
    for r in &trace.records {
        let hex = r.output.to_hex();
        if out.last().map(|(_, h, m)| (h, *m)) != Some((&hex, r.mode)) {
            out.push((r.tick, hex, r.mode));
        }
    }
    out
}

#[test]
fn csv_matches_golden() {
    for name in ["traditional_300", "emergency_road1", "safe_hold"] {
        let trace = simulate(name);
        assert_eq!(trace.to_csv(), golden(name), "{name}");
        let frozen = Trace::from_csv(name, trace.table_hash.clone(), golden(name)).unwrap();
        assert_eq!(compare_traces(&trace, &frozen).unwrap(), vec![]);
    }
}

#[test]
fn traditional_cycle() {
    use ModeTag::Traditional as T;
    let expected = [
        (0, "3218A6", T),
        (60, "410820", T),
        (75, "98C862", T),
        (135, "810420", T),
        (150, "8A6321", T),
        (210, "820410", T),
        (225, "86298C", T),
        (285, "420810", T),
    ];
    let got = segments(&simulate("traditional_300"));
    let got: Vec<_> = got.iter().map(|(t, h, m)| (*t, h.as_str(), *m)).collect();
    assert_eq!(got, expected);
}

#[test]
fn emergency_road1() {
    use ModeTag::*;
    let expected = [
        (0, "3218A6", Traditional),
        (10, "410410", SafeTransition),
        (25, "3A0822", EmergencyHold),
        (200, "410410", SafeTransition),
        (215, "3218A6", Traditional),
        (275, "410820", Traditional),
        (290, "98C862", Traditional),
    ];
    let got = segments(&simulate("emergency_road1"));
    let got: Vec<_> = got.iter().map(|(t, h, m)| (*t, h.as_str(), *m)).collect();
    assert_eq!(got, expected);
}

#[test]
fn safe_hold() {
    use ModeTag::*;
    let expected = [
        (0, "3218A6", Traditional),
        (20, "410410", SafeTransition),
        (35, "410410", SafeHold),
        (100, "410410", SafeTransition),
        (115, "3218A6", Traditional),
        (175, "410820", Traditional),
        (190, "98C862", Traditional),
        (250, "810420", Traditional),
        (265, "8A6321", Traditional),
        (325, "820410", Traditional),
        (340, "86298C", Traditional),
    ];
    let got = segments(&simulate("safe_hold"));
    let got: Vec<_> = got.iter().map(|(t, h, m)| (*t, h.as_str(), *m)).collect();
    assert_eq!(got, expected);
}

#[test]
fn early_release_waits_for_the_minimum() {
    let table = compile_builtin();
    let scenario = Scenario::parse("early", "ticks 200\nat 10 input 1\nat 30 input 0\n").unwrap();
    let trace = run(&scenario, &table);
    let got: Vec<_> = segments(&trace).into_iter().take(5).map(|(t, h, _)| (t, h)).collect();
    assert_eq!(
        got,
        vec![
            (0, "3218A6".to_string()),
            (10, "410410".to_string()),
            (25, "3A0822".to_string()),
            (85, "410410".to_string()),
            (100, "3218A6".to_string()),
        ]
    );
    assert_eq!(trace.records[30].latched.map(|c| c.get()), Some(0));
}

#[test]
fn divergence_is_reported_per_run() {
    let a = simulate("emergency_road1");
    let b = simulate("traditional_300");
    assert!(compare_traces(&a, &b).is_err());
    let c = run(
        &Scenario::parse("x", "ticks 350\nat 10 input 1\nat 210 input 0\n").unwrap(),
        &compile_builtin(),
    );
    let diffs = compare_traces(&a, &c).unwrap();
    assert_eq!(diffs[0].tick, 200);
    assert_eq!(diffs[0].length, 10);
    assert!(diffs.iter().all(|d| d.length > 0));
}
