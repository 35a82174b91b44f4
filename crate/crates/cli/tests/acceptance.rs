//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use proptest::strategy::{Strategy, ValueTree};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use qfc_cli::{parse_scenario, run_command, serialize_scenario};
use qfc_core::analysis::{
    calibrate_noise_density, estimate_snr, noise_attribution, with_fiber_length, with_noise_density,
};
use qfc_core::chain::{propagate, ElementKind, Scenario};
use qfc_core::fitting::{fit_efficiency_curve, model, EfficiencySample, FitResult};
use qfc_core::photonics::{
    converted_frequency, derive_eta_nor_from_peak, internal_efficiency, Direction,
};
use qfc_core::spectral::{
    frequency_to_wavelength, wavelength_to_frequency, FrequencyGrid, Spectrum,
};

fn repo_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn load(rel: &str) -> Scenario {
    let text = std::fs::read_to_string(repo_file(rel)).expect("bundled scenario");
    parse_scenario(&text).expect("bundled scenario parses")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn stages(s: &Scenario) -> Vec<qfc_core::PplnStage> {
    s.stage_indices()
        .iter()
        .map(|i| s.effective_stage(*i).unwrap())
        .collect()
}

fn efficiency_endpoints() -> Outcome {
    let s = load("scenarios/standard.scenario");
    let t0 = Instant::now();
    let eff = s.stage_efficiencies();
    let elapsed = t0.elapsed();
    let total = eff[0] * eff[1];
    let cli = run_command([
        "qfc",
        "simulate",
        repo_file("scenarios/standard.scenario").to_str().unwrap(),
    ]);
    let rounded = format!("{:.2e}", total) == "6.94e-2";
    let pass = eff[0] == 0.271
        && eff[1] == 0.256
        && (total - 0.271 * 0.256).abs() <= 1e-6
        && rounded
        && cli.exit_code == 0
        && cli.stdout.contains("total efficiency: 6.94%")
        && elapsed.as_millis() < 50;
    check(
        pass,
        format!(
            "eta_DFG={} eta_SFG={} eta_total={total} (0.0694 to three figures: {rounded}), {:?}",
            eff[0], eff[1], elapsed
        ),
    )
}

fn internal_efficiencies() -> Outcome {
    let s = load("scenarios/standard.scenario");
    let st = stages(&s);
    let dfg = internal_efficiency(&st[0]);
    let sfg = internal_efficiency(&st[1]);
    check(
        (dfg - 0.874).abs() <= 0.005 && (sfg - 0.731).abs() <= 0.005,
        format!("internal DFG={dfg:.5} SFG={sfg:.5}"),
    )
}

const FIT_L: f64 = 4.8;

/// Exhaustive grid over the same box the fit searches.
fn dense_oracle_rss(samples: &[EfficiencySample]) -> f64 {
    let p_max = samples.iter().map(|s| s.pump_power).fold(0.0, f64::max);
    let hi = (std::f64::consts::PI / FIT_L).powi(2) / p_max;
    let (lo, hi) = (1e-4f64.ln(), hi.min(1e2).ln());
    let n = 1000;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let k = (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp();
        let shapes: Vec<f64> = samples
            .iter()
            .map(|s| model(1.0, k, FIT_L, s.pump_power))
            .collect();
        for j in 0..n {
            let a = j as f64 / (n - 1) as f64;
            let rss: f64 = samples
                .iter()
                .zip(&shapes)
                .map(|(s, sh)| (s.eta_measured - a * sh).powi(2))
                .sum();
            best = best.min(rss);
        }
    }
    best
}

fn fit_recovery() -> Outcome {
    let (a0, k0) = (0.271, derive_eta_nor_from_peak(0.5, FIT_L).unwrap());
    let powers: Vec<f64> = (1..=10).map(|i| i as f64 * 0.1).collect();
    let clean: Vec<EfficiencySample> = powers
        .iter()
        .map(|p| EfficiencySample::new(*p, model(a0, k0, FIT_L, *p)).unwrap())
        .collect();

    let t0 = Instant::now();
    let fit = fit_efficiency_curve(&clean, FIT_L).unwrap();
    let clean_err = rel(fit.eta_max, a0).max(rel(fit.eta_nor, k0));
    let mut fits: Vec<(FitResult, Vec<EfficiencySample>)> = vec![(fit, clean.clone())];

    let mut noisy_err: f64 = 0.0;
    let noise = Normal::new(1.0, 0.02).unwrap();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<EfficiencySample> = clean
            .iter()
            .map(|s| {
                EfficiencySample::new(s.pump_power, s.eta_measured * noise.sample(&mut rng))
                    .unwrap()
            })
            .collect();
        let f = fit_efficiency_curve(&samples, FIT_L).unwrap();
        noisy_err = noisy_err.max(rel(f.eta_max, a0)).max(rel(f.eta_nor, k0));
        fits.push((f, samples));
    }
    let elapsed = t0.elapsed();

    let mut worst_gap = f64::NEG_INFINITY;
    for (f, samples) in fits.iter().take(4) {
        worst_gap = worst_gap.max(f.rss - dense_oracle_rss(samples));
    }
    check(
        clean_err <= 1e-3 && noisy_err <= 0.05 && worst_gap <= 1e-9 && elapsed.as_secs_f64() < 10.0,
        format!(
            "noiseless rel err {clean_err:.2e}, 2% noise worst rel err {noisy_err:.3} over 20 draws, \
             fit rss minus oracle rss <= {worst_gap:.2e}, {elapsed:?}"
        ),
    )
}

fn snr_budget() -> Outcome {
    let base = load("scenarios/repeater.scenario");
    let density = calibrate_noise_density(1e5, &base).unwrap();
    let s = with_noise_density(&base, density);
    let blocked = {
        let mut b = s.clone();
        b.source.rate = 0.0;
        propagate(&b).unwrap().detector_counts()
    };
    let near = estimate_snr(&s, 10e6, 0.0).unwrap();
    let far = estimate_snr(&s, 10e6, 50.0).unwrap();
    let signal_ratio = near.signal_rate / far.signal_rate;
    let pass = rel(blocked, 1e5) < 1e-9
        && (500.0..=2000.0).contains(&near.snr)
        && (50.0..=200.0).contains(&far.snr)
        && rel(signal_ratio, 10.0) < 1e-9;
    check(
        pass,
        format!(
            "density {density:.4e} cts/s/Hz gives {blocked:.1} cts/s; SNR {:.1} at 0 km, {:.1} at 50 km \
             (signal ratio {signal_ratio:.6})",
            near.snr, far.snr
        ),
    )
}

fn filtering_gain() -> Outcome {
    let s = load("scenarios/repeater.scenario");
    let report = estimate_snr(&s, 10e6, 0.0).unwrap();
    let grid = FrequencyGrid::new(460e12, 480e12, 20_000).unwrap();
    let flat = Spectrum::flat(grid, 1.0).unwrap();
    let c = s.source.center;
    let wide = flat.integrate_window(c - 20e9, c + 20e9);
    let narrow = flat.integrate_window(c - 5e6, c + 5e6);
    let gain = wide / narrow;
    check(
        report.bandwidth_ratio == 4000.0 && rel(gain, 4000.0) < 1e-9 && (1e3..=1e4).contains(&gain),
        format!(
            "acceptance/filter width {}, flat pedestal 40 GHz vs 10 MHz window ratio {gain:.9}",
            report.bandwidth_ratio
        ),
    )
}

/// Fiber coupling that makes the inter-stage signal transmission `target`.
fn with_interstage(s: &Scenario, target: f64) -> Scenario {
    let mut out = s.clone();
    let mut t = 1.0;
    let first = s.stage_indices()[0];
    let second = s.stage_indices()[1];
    let nu = s.source.center - stages(s)[0].pump_frequency;
    for e in &s.elements[first + 1..second] {
        match &e.kind {
            ElementKind::Filter(f) => t *= f.transmission(nu),
            ElementKind::Fiber(f) => t *= f.transmission_at(nu).unwrap(),
            _ => {}
        }
    }
    for e in &mut out.elements[first + 1..second] {
        if let ElementKind::Fiber(f) = &mut e.kind {
            f.coupling *= target / t;
        }
    }
    out
}

fn noise_attribution_ratio() -> Outcome {
    let s = load("scenarios/standard.scenario");
    let nominal = noise_attribution(&s).unwrap();
    let tuned = noise_attribution(&with_interstage(&s, 0.4)).unwrap();
    let (rn, rt) = (
        nominal.excess_ratio().unwrap(),
        tuned.excess_ratio().unwrap(),
    );
    let tt = tuned.interstage_transmission.unwrap();
    let pass = (rt - 1.40).abs() <= 0.05
        && (rn - 1.40).abs() <= 0.05
        && (tt - 0.4).abs() < 1e-9
        && tuned.stage1_only == tuned.dark
        && nominal.stage1_only == nominal.dark;
    check(
        pass,
        format!(
            "both/stage2-only {rt:.4} at transmission {tt:.4}; bundled chain {rn:.4} at {:.4}; \
             stage1-only {} = dark {}",
            nominal.interstage_transmission.unwrap(),
            nominal.stage1_only,
            nominal.dark
        ),
    )
}

fn energy_conservation() -> Outcome {
    let src = wavelength_to_frequency(637.2).unwrap();
    let pump = wavelength_to_frequency(1071.0).unwrap();
    let telecom = converted_frequency(Direction::Dfg, src, pump).unwrap();
    let back = converted_frequency(Direction::Sfg, telecom, pump).unwrap();
    let nm = frequency_to_wavelength(telecom).unwrap();
    let s = load("scenarios/standard.scenario");
    let state = propagate(&s).unwrap();
    let chain_back = state.final_snapshot().line.center;
    check(
        back.to_bits() == src.to_bits()
            && chain_back.to_bits() == src.to_bits()
            && (nm - 1573.0).abs() <= 0.5,
        format!(
            "telecom {nm:.3} nm; round trip {back} Hz vs {src} Hz; chain output {chain_back} Hz"
        ),
    )
}

fn property_suites() -> Outcome {
    let mut runner = common::runner(1000);
    let strat = common::scenario();
    let mut checked = 0;
    let mut violations = Vec::new();
    for _ in 0..1000 {
        let s = strat.new_tree(&mut runner).unwrap().current();
        let a = propagate(&s).unwrap();
        let negative = a.snapshots.iter().any(|sn| {
            sn.line.rate < 0.0
                || sn.band_noise < 0.0
                || sn.spectrum.density().iter().any(|d| *d < 0.0)
        }) || a.reading.signal < 0.0
            || a.reading.noise < 0.0;
        let km = qfc_core::analysis::fiber_length_km(&s);
        let b = propagate(&with_fiber_length(&s, km + 10.0).unwrap()).unwrap();
        let tol = 1e-12 * (1.0 + a.reading.total());
        let grows =
            b.reading.signal > a.reading.signal + tol || b.reading.noise > a.reading.noise + tol;
        let passive_gain = s.elements.iter().enumerate().any(|(i, e)| {
            !matches!(e.kind, ElementKind::Stage(_))
                && a.element_ratio(i).is_some_and(|r| r > 1.0 + 1e-12)
        });
        if negative || grows || passive_gain {
            violations.push(s.label.clone());
        }
        checked += 1;
    }

    let standard = load("scenarios/standard.scenario");
    let refined = Scenario {
        grid: standard.grid.refined(),
        ..standard.clone()
    };
    let c1 = propagate(&standard).unwrap().detector_counts();
    let c2 = propagate(&refined).unwrap().detector_counts();
    let refinement = rel(c1, c2);

    let mut round_trips = 0;
    let mut rt_fail = 0;
    for _ in 0..200 {
        let s = strat.new_tree(&mut runner).unwrap().current();
        let text = serialize_scenario(&s);
        match parse_scenario(&text) {
            Ok(p) if p == s && serialize_scenario(&p) == text => {}
            _ => rt_fail += 1,
        }
        round_trips += 1;
    }
    check(
        violations.is_empty() && refinement < 1e-3 && rt_fail == 0,
        format!(
            "{checked} random chains, {} invariant violations; refinement change {refinement:.2e}; \
             {round_trips} round trips, {rt_fail} mismatches",
            violations.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("efficiency endpoints", efficiency_endpoints),
        ("internal efficiencies", internal_efficiencies),
        ("fit recovery", fit_recovery),
        ("SNR budget", snr_budget),
        ("filtering gain", filtering_gain),
        ("noise attribution", noise_attribution_ratio),
        ("energy conservation", energy_conservation),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = f();
        println!(
            "criterion {} {} {name}: {} [{:.2?}]",
            n + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t0.elapsed()
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
