//! Random valid scenarios for property tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use qfc_core::chain::{AnalysisSettings, Element, ElementKind, Scenario};
use qfc_core::photonics::{
    AttenuationBand, DetectorModel, Direction, FiberSegment, FilterElement, PplnStage,
    SpectrometerModel,
};
use qfc_core::spectral::{Band, FrequencyGrid, SpectralLine};

pub const GRID_LO: f64 = 150e12;
pub const GRID_HI: f64 = 500e12;

/// Runner with a fixed seed so failures reproduce.
pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn band_in(lo: f64, hi: f64) -> impl Strategy<Value = Band> {
    (lo..hi, 1e9..(hi - lo))
        .prop_map(move |(a, w)| Band::new(a, (a + w).min(hi).max(a + 1e9)).unwrap())
}

fn label() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_-]{0,8}"
}

fn stage(direction: Direction, pump: f64) -> impl Strategy<Value = PplnStage> {
    (
        (0.05f64..1.0, 0.05f64..1.0, 0.0f64..1.0),
        (1e-3f64..2.0, 0.5f64..6.0, 5e9f64..80e9),
        (0.0f64..1.5, 0.0f64..1e-3, 0.05f64..2.0),
        (any::<bool>(), -60e9f64..60e9, 0.1e12f64..3e12),
    )
        .prop_map(
            move |(
                (cin, cout, frac),
                (eta_nor, length_cm, pm_fwhm),
                (p, nd, pref),
                (on, det, half),
            )| {
                PplnStage {
                    direction,
                    eta_max: frac * cin * cout,
                    eta_nor,
                    length_cm,
                    pm_fwhm,
                    pump_frequency: pump,
                    pump_power: p,
                    coupling_in: cin,
                    coupling_out: cout,
                    noise_density: nd,
                    noise_ref_power: pref,
                    pump_on: on,
                    detuning: det,
                    pedestal_halfwidth: half,
                }
            },
        )
}

fn filter() -> impl Strategy<Value = ElementKind> {
    (band_in(GRID_LO, GRID_HI), 0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(b, a, c)| {
        ElementKind::Filter(FilterElement {
            passband: b,
            t_pass: a.max(c),
            t_stop: a.min(c),
        })
    })
}

/// Fiber whose attenuation table covers every frequency the chain can reach.
pub fn fiber() -> impl Strategy<Value = FiberSegment> {
    (
        0.0f64..100.0,
        0.0f64..=1.0,
        0.0f64..1.0,
        0.0f64..5.0,
        200e12f64..300e12,
    )
        .prop_map(|(length_km, coupling, a1, a2, split)| FiberSegment {
            length_km,
            attenuation: vec![
                AttenuationBand {
                    band: Band::new(1e12, split).unwrap(),
                    db_per_km: a1,
                },
                AttenuationBand {
                    band: Band::new(split.next_up(), 2e15).unwrap(),
                    db_per_km: a2,
                },
            ],
            coupling,
        })
}

fn spectrometer() -> impl Strategy<Value = ElementKind> {
    (band_in(400e12, GRID_HI), 1e9f64..100e9, 0.0f64..=1.0).prop_map(|(b, r, e)| {
        ElementKind::Spectrometer(SpectrometerModel {
            passband: b,
            resolution_fwhm: r,
            efficiency: e,
        })
    })
}

fn detector() -> impl Strategy<Value = ElementKind> {
    (band_in(GRID_LO, GRID_HI), 0.0f64..=1.0, 0.0f64..1e3).prop_map(|(b, q, d)| {
        ElementKind::Detector(DetectorModel {
            band: b,
            quantum_efficiency: q,
            dark_rate: d,
        })
    })
}

fn passives() -> impl Strategy<Value = Vec<ElementKind>> {
    prop::collection::vec(filter(), 0..3)
}

/// DFG → passives → fiber → SFG → passives → [spectrometer] → detector on a
/// coarse grid, with random pump overrides and analysis settings.
pub fn scenario() -> impl Strategy<Value = Scenario> {
    (
        (440e12f64..490e12, 1e6f64..1e9, 0.0f64..1e7, 700usize..3500),
        260e12f64..285e12,
        label(),
    )
        .prop_flat_map(|((center, fwhm, rate, bins), pump, name)| {
            (
                Just((center, fwhm, rate, bins, name)),
                stage(Direction::Dfg, pump),
                passives(),
                fiber(),
                stage(Direction::Sfg, pump),
                passives(),
                prop::option::of(spectrometer()),
                detector(),
                (
                    1e5f64..1e11,
                    0.0f64..1e3,
                    prop::option::of(band_in(GRID_LO, GRID_HI)),
                    prop::option::of(any::<bool>()),
                    prop::option::of(any::<bool>()),
                ),
                prop::collection::vec(label(), 12),
            )
        })
        .prop_map(
            |(
                (center, fwhm, rate, bins, name),
                s1,
                p1,
                fib,
                s2,
                p2,
                spectro,
                det,
                analysis,
                labels,
            )| {
                let (bw, floor, reporting, o1, o2) = analysis;
                let mut kinds = vec![ElementKind::Stage(s1)];
                kinds.extend(p1);
                kinds.push(ElementKind::Fiber(fib));
                let second = kinds.len();
                kinds.push(ElementKind::Stage(s2));
                kinds.extend(p2);
                kinds.extend(spectro);
                kinds.push(det);
                let elements = kinds
                    .into_iter()
                    .zip(labels.into_iter().cycle())
                    .map(|(k, l)| Element::new(l, k))
                    .collect();
                let mut pump_flags = BTreeMap::new();
                if let Some(v) = o1 {
                    pump_flags.insert(0, v);
                }
                if let Some(v) = o2 {
                    pump_flags.insert(second, v);
                }
                let s = Scenario {
                    label: name,
                    source: SpectralLine::new(center, fwhm, rate).unwrap(),
                    grid: FrequencyGrid::new(GRID_LO, GRID_HI, bins).unwrap(),
                    elements,
                    pump_flags,
                    analysis: AnalysisSettings {
                        final_filter_bandwidth: bw,
                        noise_floor: floor,
                        reporting_band: reporting,
                    },
                };
                s.validate().expect("generator builds valid scenarios");
                s
            },
        )
}
