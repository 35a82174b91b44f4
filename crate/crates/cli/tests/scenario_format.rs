mod common;

use std::path::PathBuf;

use proptest::prelude::*;

use qfc_cli::{parse_scenario, serialize_scenario};
use qfc_core::chain::{standard_scenario, ElementKind, StandardParams};

fn bundled(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn bundled_standard_matches_builder() {
    let parsed = parse_scenario(&bundled("standard.scenario")).unwrap();
    let built = standard_scenario(&StandardParams::default()).unwrap();
    assert_eq!(parsed, built);
}

#[test]
fn bundled_repeater_matches_builder() {
    let parsed = parse_scenario(&bundled("repeater.scenario")).unwrap();
    let mut built = standard_scenario(&StandardParams::repeater()).unwrap();
    built.label = "repeater".into();
    assert_eq!(parsed, built);
}

#[test]
fn bundled_files_round_trip() {
    for name in ["standard.scenario", "repeater.scenario"] {
        let s = parse_scenario(&bundled(name)).unwrap();
        let text = serialize_scenario(&s);
        assert_eq!(parse_scenario(&text).unwrap(), s);
    }
}

#[test]
fn pump_power_in_milliwatts() {
    let s = parse_scenario(&bundled("standard.scenario")).unwrap();
    match &s.elements[0].kind {
        ElementKind::Stage(st) => assert_eq!(st.pump_power, 0.5),
        other => panic!("expected a stage, got {other:?}"),
    }
}

fn expect_err(text: &str, line: usize, section: Option<&str>, key: Option<&str>) -> String {
    let e = parse_scenario(text).unwrap_err();
    assert_eq!(e.line, line, "{e}");
    assert_eq!(e.section.as_deref(), section, "{e}");
    assert_eq!(e.key.as_deref(), key, "{e}");
    e.message
}

fn edit(from: &str, to: &str) -> String {
    let text = bundled("standard.scenario");
    assert!(text.contains(from), "{from}");
    text.replacen(from, to, 1)
}

fn line_of(text: &str, needle: &str) -> usize {
    text.lines().position(|l| l.contains(needle)).unwrap() + 1
}

#[test]
fn error_locations() {
    let t = edit("eta_max = 0.271", "eta_max = 0.271\nwaveguide_loss = 0.1");
    expect_err(
        &t,
        line_of(&t, "waveguide_loss"),
        Some("element.1"),
        Some("waveguide_loss"),
    );

    let t = edit("pump_power = 500 mW", "pump_power = 500");
    let m = expect_err(
        &t,
        line_of(&t, "pump_power = 500"),
        Some("element.1"),
        Some("pump_power"),
    );
    assert!(m.contains("unit"));

    let t = edit("t_pass = 0.87", "t_pass = 0.87 W");
    expect_err(&t, line_of(&t, "0.87 W"), Some("element.2"), Some("t_pass"));

    let t = edit("eta_max = 0.271", "eta_max = 0.271\neta_max = 0.2");
    expect_err(
        &t,
        t.lines().position(|l| l == "eta_max = 0.2").unwrap() + 1,
        Some("element.1"),
        Some("eta_max"),
    );

    let t = edit("[element.9]", "[element.12]");
    expect_err(&t, line_of(&t, "[element.12]"), Some("element.12"), None);

    let t = edit("eta_max = 0.271", "eta_max = 0.9");
    let m = expect_err(&t, line_of(&t, "[element.1]"), Some("element.1"), None);
    assert!(m.contains("coupling"), "{m}");

    let t = edit("kind = fiber", "kind = amplifier");
    expect_err(
        &t,
        line_of(&t, "amplifier"),
        Some("element.3"),
        Some("kind"),
    );

    let t = edit("pump = on", "pump = maybe");
    expect_err(&t, line_of(&t, "maybe"), Some("element.1"), Some("pump"));
}

#[test]
fn duplicate_grid_is_rejected_at_second_header() {
    let t = edit("[analysis]", "[grid]\nbins = 3\n\n[analysis]");
    let e = parse_scenario(&t).unwrap_err();
    assert_eq!(e.section.as_deref(), Some("grid"));
    assert_eq!(
        e.line,
        t.lines()
            .collect::<Vec<_>>()
            .iter()
            .rposition(|l| *l == "[grid]")
            .unwrap()
            + 1
    );
}

#[test]
fn duplicate_detector_names_second_section() {
    let t = edit(
        "[analysis]",
        "[element.10]\nkind = detector\nband = 400 nm .. 1000 nm\ndark_rate = 1 cts/s\n\n[analysis]",
    );
    let e = parse_scenario(&t).unwrap_err();
    assert_eq!(e.section.as_deref(), Some("element.10"));
}

#[test]
fn pump_override_must_target_a_stage() {
    let t = edit(
        "noise_floor = 100 cts/s",
        "noise_floor = 100 cts/s\npump_override.2 = off",
    );
    assert!(parse_scenario(&t).is_err());
    let t = edit(
        "noise_floor = 100 cts/s",
        "noise_floor = 100 cts/s\npump_override.4 = off",
    );
    let s = parse_scenario(&t).unwrap();
    assert_eq!(s.pump_flags.get(&3), Some(&false));
    let t = edit(
        "noise_floor = 100 cts/s",
        "noise_floor = 100 cts/s\npump_override.40 = off",
    );
    assert!(parse_scenario(&t).is_err());
}

#[test]
fn alternative_spellings() {
    let t = edit("pump_wavelength = 1071 nm", "pump_wavelength = 1.071 um");
    let a = parse_scenario(&t).unwrap();
    let b = parse_scenario(&bundled("standard.scenario")).unwrap();
    let pump = |s: &qfc_core::Scenario| match &s.elements[0].kind {
        ElementKind::Stage(st) => st.pump_frequency,
        _ => unreachable!(),
    };
    assert!((pump(&a) - pump(&b)).abs() / pump(&b) < 1e-15);
    let t = edit("length = 4.8 cm", "length = 48 mm");
    assert_eq!(parse_scenario(&t).unwrap(), b);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn serialize_then_parse_is_identity(s in common::scenario()) {
        let text = serialize_scenario(&s);
        let back = parse_scenario(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(serialize_scenario(&back), text);
    }
}
