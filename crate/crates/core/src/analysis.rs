//! Link-level analyses built on [`propagate`]: SNR budgets, pump-power and
//! distance sweeps, pump attribution of the detected noise, and calibration
//! of the pedestal density against a measured count rate.

use rayon::prelude::*;

use crate::chain::{propagate, ElementKind, Scenario};
use crate::error::{Error, Result};
use crate::photonics::Direction;

/// Lower bound on the SNR denominator, counts/s.
pub const SNR_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StageBudget {
    pub label: String,
    pub signal: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrReport {
    pub signal_rate: f64,
    /// Filtered pedestal noise plus the noise floor.
    pub noise_rate: f64,
    pub dark_rate: f64,
    pub snr: f64,
    /// Noise inside the whole detector band, before final filtering.
    pub broadband_noise: f64,
    /// Noise left inside the final filter window.
    pub filtered_noise: f64,
    pub noise_floor: f64,
    pub final_filter_bandwidth: f64,
    /// Acceptance FWHM of the last conversion stage over the final filter width.
    pub bandwidth_ratio: f64,
    /// Measured broadband-to-filtered noise ratio.
    pub filter_gain: Option<f64>,
    pub fiber_km: f64,
    pub stagewise: Vec<StageBudget>,
    pub assumptions: Vec<String>,
}

/// Sets the length of the first fiber segment. Scenarios without fiber accept
/// only a zero length.
pub fn with_fiber_length(s: &Scenario, km: f64) -> Result<Scenario> {
    if !(km >= 0.0 && km.is_finite()) {
        return Err(Error::Domain(format!(
            "fiber length must be >= 0, got {km}"
        )));
    }
    let mut out = s.clone();
    match out.elements.iter_mut().find_map(|e| match &mut e.kind {
        ElementKind::Fiber(f) => Some(f),
        _ => None,
    }) {
        Some(f) => f.length_km = km,
        None if km == 0.0 => {}
        None => {
            return Err(Error::Precondition(
                "scenario has no fiber segment to lengthen".into(),
            ))
        }
    }
    Ok(out)
}

/// Length of the first fiber segment, 0 when there is none.
pub fn fiber_length_km(s: &Scenario) -> f64 {
    s.elements
        .iter()
        .find_map(|e| match &e.kind {
            ElementKind::Fiber(f) => Some(f.length_km),
            _ => None,
        })
        .unwrap_or(0.0)
}

/// Signal-to-noise estimate behind a final narrowband filter of width
/// `final_filter_bandwidth` centred on the signal, with the first fiber
/// segment set to `fiber_km`.
pub fn estimate_snr(s: &Scenario, final_filter_bandwidth: f64, fiber_km: f64) -> Result<SnrReport> {
    if !(final_filter_bandwidth > 0.0 && final_filter_bandwidth.is_finite()) {
        return Err(Error::Precondition(format!(
            "final filter bandwidth must be > 0, got {final_filter_bandwidth}"
        )));
    }
    let scenario = with_fiber_length(s, fiber_km)?;
    let state = propagate(&scenario)?;
    let det = scenario
        .detector()
        .expect("validated scenario has a detector");
    let last = state.final_snapshot();
    let line = last.line;

    let passed_fraction = (final_filter_bandwidth / line.fwhm).min(1.0);
    let signal_rate = state.reading.signal * passed_fraction;
    let half = 0.5 * final_filter_bandwidth;
    let filtered_noise = det.quantum_efficiency
        * last
            .spectrum
            .integrate_window(line.center - half, line.center + half);
    let broadband_noise = state.reading.noise;
    let noise_floor = scenario.analysis.noise_floor;
    let noise_rate = filtered_noise + noise_floor;
    let dark_rate = det.dark_rate;
    let snr = signal_rate / (noise_rate + dark_rate).max(SNR_EPSILON);

    let acceptance = scenario
        .stage_indices()
        .last()
        .and_then(|i| scenario.effective_stage(*i))
        .map(|st| st.pm_fwhm)
        .unwrap_or(f64::NAN);

    let stagewise = state
        .snapshots
        .iter()
        .map(|sn| StageBudget {
            label: sn.label.clone(),
            signal: sn.line.rate,
            noise: sn.band_noise,
        })
        .collect();

    let assumptions = vec![
        format!("final filter: top-hat of {final_filter_bandwidth} Hz centred on the signal line"),
        format!("additive noise floor after filtering: {noise_floor} counts/s"),
        format!("fiber length (first segment): {fiber_km} km"),
        "pedestal noise is spectrally flat and linear in pump power".into(),
        if passed_fraction < 1.0 {
            format!("filter narrower than the linewidth passes {passed_fraction} of the signal")
        } else {
            "signal counted in full".into()
        },
    ];

    Ok(SnrReport {
        signal_rate,
        noise_rate,
        dark_rate,
        snr,
        broadband_noise,
        filtered_noise,
        noise_floor,
        final_filter_bandwidth,
        bandwidth_ratio: acceptance / final_filter_bandwidth,
        filter_gain: (filtered_noise > 0.0).then(|| broadband_noise / filtered_noise),
        fiber_km,
        stagewise,
        assumptions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRow {
    pub pump_power: f64,
    pub eta_dfg: f64,
    pub eta_sfg: f64,
    pub eta_total: f64,
}

/// External DFG, SFG and two-step efficiencies with every pump set to each
/// power in `powers`.
pub fn sweep_pump_power(s: &Scenario, powers: &[f64]) -> Result<Vec<PowerRow>> {
    s.validate()?;
    if let Some(p) = powers.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(Error::Domain(format!("pump power must be >= 0, got {p}")));
    }
    let stages = s.stage_indices();
    let find = |dir: Direction| {
        stages.iter().position(
            |i| matches!(&s.elements[*i].kind, ElementKind::Stage(st) if st.direction == dir),
        )
    };
    let (Some(dfg), Some(sfg)) = (find(Direction::Dfg), find(Direction::Sfg)) else {
        return Err(Error::Precondition(
            "power sweep needs one DFG and one SFG stage".into(),
        ));
    };
    Ok(powers
        .par_iter()
        .map(|&p| {
            let mut sc = s.clone();
            sc.for_each_stage(|st| st.pump_power = p);
            let eff = sc.stage_efficiencies();
            PowerRow {
                pump_power: p,
                eta_dfg: eff[dfg],
                eta_sfg: eff[sfg],
                eta_total: eff[dfg] * eff[sfg],
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRow {
    pub km: f64,
    pub signal: f64,
    pub noise: f64,
    pub snr: f64,
}

/// SNR against fiber length, using the scenario's analysis settings.
pub fn sweep_distance(s: &Scenario, kms: &[f64]) -> Result<Vec<DistanceRow>> {
    kms.par_iter()
        .map(|&km| {
            let r = estimate_snr(s, s.analysis.final_filter_bandwidth, km)?;
            Ok(DistanceRow {
                km,
                signal: r.signal_rate,
                noise: r.noise_rate + r.dark_rate,
                snr: r.snr,
            })
        })
        .collect()
}

/// Detector counts with the signal blocked, for the three pump settings of
/// a two-stage chain.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionReport {
    pub both: f64,
    pub stage2_only: f64,
    pub stage1_only: f64,
    pub dark: f64,
    /// Part of the both-pump noise that originates in the first stage.
    pub stage1_contribution: f64,
    /// Signal transmission between the output of stage 1 and the input of
    /// stage 2.
    pub interstage_transmission: Option<f64>,
}

impl AttributionReport {
    /// Both-pump noise over stage-2-only noise, dark counts removed.
    pub fn excess_ratio(&self) -> Option<f64> {
        let base = self.stage2_only - self.dark;
        (base > 0.0).then(|| (self.both - self.dark) / base)
    }
}

pub fn noise_attribution(s: &Scenario) -> Result<AttributionReport> {
    s.validate()?;
    let stages = s.stage_indices();
    let [first, second] = stages[..] else {
        return Err(Error::Precondition(format!(
            "attribution needs exactly two conversion stages, found {}",
            stages.len()
        )));
    };
    let base_on = |i: usize| s.effective_stage(i).map(|st| st.pump_on).unwrap_or(false);
    let mut blocked = s.clone();
    blocked.source.rate = 0.0;

    let run = |sc: &Scenario, on1: bool, on2: bool| -> Result<f64> {
        let mut sc = sc.clone();
        sc.pump_flags.insert(first, on1 && base_on(first));
        sc.pump_flags.insert(second, on2 && base_on(second));
        Ok(propagate(&sc)?.detector_counts())
    };
    let both = run(&blocked, true, true)?;
    let stage2_only = run(&blocked, false, true)?;
    let stage1_only = run(&blocked, true, false)?;

    let mut quiet_second = blocked.clone();
    if let ElementKind::Stage(st) = &mut quiet_second.elements[second].kind {
        st.noise_density = 0.0;
    }
    let dark = s.detector().map(|d| d.dark_rate).unwrap_or(0.0);
    let stage1_contribution = run(&quiet_second, true, true)? - dark;

    let mut probe = s.clone();
    probe.source.rate = 1.0;
    probe.pump_flags.insert(first, true);
    probe.pump_flags.insert(second, true);
    let state = propagate(&probe)?;
    let out1 = state.snapshots[first + 1].line.rate;
    let in2 = state.snapshots[second].line.rate;
    let interstage_transmission = (out1 > 0.0).then(|| in2 / out1);

    Ok(AttributionReport {
        both,
        stage2_only,
        stage1_only,
        dark,
        stage1_contribution,
        interstage_transmission,
    })
}

/// Copy of `s` with every stage's pedestal density set to `density`.
pub fn with_noise_density(s: &Scenario, density: f64) -> Scenario {
    let mut out = s.clone();
    out.for_each_stage(|st| st.noise_density = density);
    out
}

/// Equal per-stage pedestal density (at each stage's reference pump power)
/// for which the signal-blocked detector reading equals `target_counts`.
pub fn calibrate_noise_density(target_counts: f64, s: &Scenario) -> Result<f64> {
    let mut unit = with_noise_density(s, 1.0);
    unit.source.rate = 0.0;
    let reading = propagate(&unit)?.reading;
    let excess = target_counts - reading.dark;
    if !(excess >= 0.0) {
        return Err(Error::Precondition(format!(
            "target {target_counts} counts/s is below the dark rate {}",
            reading.dark
        )));
    }
    if excess == 0.0 {
        return Ok(0.0);
    }
    if !(reading.noise > 0.0) {
        return Err(Error::Infeasible(
            "no pedestal noise reaches the detector; density cannot be calibrated".into(),
        ));
    }
    Ok(excess / reading.noise)
}
