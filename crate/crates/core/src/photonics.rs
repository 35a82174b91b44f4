//! Optical element models: PPLN conversion stages, filters, fiber,
//! spectrometer and photon-counting detector.
//!
//! Every element maps a `(SpectralLine, Spectrum)` state to a new state. The
//! line carries the converted signal; the spectrum carries broadband noise
//! together with any unconverted signal leakage.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::spectral::{line_to_spectrum, Band, SpectralLine, Spectrum};

/// Argument at which `sinc²(x) = 1/2`, with `sinc(x) = sin(x)/x`.
pub const SINC2_HALF_POWER_ARG: f64 = 1.391_557_378_251_51;

/// Default half-width of the flat pump-induced noise pedestal, Hz.
pub const DEFAULT_PEDESTAL_HALFWIDTH: f64 = 2.0e12;

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return domain(format!("{name} must be in [0, 1], got {v}"));
    }
    Ok(())
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return domain(format!("{name} must be >= 0, got {v}"));
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return domain(format!("{name} must be > 0, got {v}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Difference-frequency generation: output at input − pump.
    Dfg,
    /// Sum-frequency generation: output at input + pump.
    Sfg,
}

/// One PPLN conversion waveguide.
///
/// `eta_max` is the external (facet-to-facet) peak efficiency, so the
/// internal efficiency is `eta_max / (coupling_in · coupling_out)`.
/// `noise_density` is the flat pump-induced pedestal referred to the
/// waveguide's telecom facet at pump power `noise_ref_power`: it is added to
/// the output of a DFG stage and to the input of an SFG stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PplnStage {
    pub direction: Direction,
    pub eta_max: f64,
    /// Normalized conversion efficiency, W⁻¹·cm⁻².
    pub eta_nor: f64,
    pub length_cm: f64,
    /// Phase-matching acceptance FWHM, Hz.
    pub pm_fwhm: f64,
    pub pump_frequency: f64,
    /// Pump power inside the waveguide, W.
    pub pump_power: f64,
    pub coupling_in: f64,
    pub coupling_out: f64,
    /// counts·s⁻¹·Hz⁻¹
    pub noise_density: f64,
    pub noise_ref_power: f64,
    pub pump_on: bool,
    /// Signal frequency minus phase-matching centre, Hz.
    pub detuning: f64,
    pub pedestal_halfwidth: f64,
}

impl PplnStage {
    pub fn validate(&self) -> Result<()> {
        unit_interval("eta_max", self.eta_max)?;
        unit_interval("coupling_in", self.coupling_in)?;
        unit_interval("coupling_out", self.coupling_out)?;
        positive("eta_nor", self.eta_nor)?;
        positive("length_cm", self.length_cm)?;
        positive("pm_fwhm", self.pm_fwhm)?;
        positive("pump_frequency", self.pump_frequency)?;
        non_negative("pump_power", self.pump_power)?;
        non_negative("noise_density", self.noise_density)?;
        positive("noise_ref_power", self.noise_ref_power)?;
        positive("pedestal_halfwidth", self.pedestal_halfwidth)?;
        if !self.detuning.is_finite() {
            return domain("detuning must be finite");
        }
        if self.eta_max > self.coupling_in * self.coupling_out {
            return domain(format!(
                "eta_max {} exceeds coupling_in·coupling_out = {}; internal efficiency would exceed 1",
                self.eta_max,
                self.coupling_in * self.coupling_out
            ));
        }
        Ok(())
    }

    /// Telecom-side frequency the stage is designed around, given the
    /// frequency of the signal entering it.
    pub fn telecom_center(&self, input_center: f64) -> f64 {
        let pm_center = input_center - self.detuning;
        match self.direction {
            Direction::Dfg => pm_center - self.pump_frequency,
            Direction::Sfg => pm_center,
        }
    }

    /// Pedestal density at the current pump power.
    pub fn pedestal_density(&self) -> f64 {
        if !self.pump_on || self.pump_power == 0.0 {
            return 0.0;
        }
        self.noise_density * self.pump_power / self.noise_ref_power
    }
}

/// `eta_max · sin²(L·√(P·eta_nor))`, or 0 with the pump off.
pub fn conversion_efficiency(stage: &PplnStage) -> f64 {
    if !stage.pump_on || stage.pump_power == 0.0 {
        return 0.0;
    }
    let phase = stage.length_cm * (stage.pump_power * stage.eta_nor).sqrt();
    stage.eta_max * phase.sin().powi(2)
}

/// Efficiency inside the waveguide, with both facet couplings divided out.
pub fn internal_efficiency(stage: &PplnStage) -> f64 {
    let couplings = stage.coupling_in * stage.coupling_out;
    if couplings == 0.0 {
        return 0.0;
    }
    (conversion_efficiency(stage) / couplings).min(1.0)
}

/// The `eta_nor` that puts the first efficiency maximum at `p_peak`.
pub fn derive_eta_nor_from_peak(p_peak: f64, length_cm: f64) -> Result<f64> {
    positive("peak pump power", p_peak)?;
    positive("crystal length", length_cm)?;
    Ok((PI / (2.0 * length_cm)).powi(2) / p_peak)
}

pub fn converted_frequency(direction: Direction, input: f64, pump: f64) -> Result<f64> {
    positive("input frequency", input)?;
    positive("pump frequency", pump)?;
    match direction {
        Direction::Dfg if input <= pump => domain(format!(
            "DFG needs input above pump frequency ({input} Hz <= {pump} Hz)"
        )),
        Direction::Dfg => Ok(input - pump),
        Direction::Sfg => Ok(input + pump),
    }
}

/// Normalized sinc² acceptance profile, 0.5 at `|detuning| = pm_fwhm / 2`.
pub fn phase_matching_factor(detuning: f64, pm_fwhm: f64) -> f64 {
    let x = SINC2_HALF_POWER_ARG * 2.0 * detuning.abs() / pm_fwhm;
    if x == 0.0 {
        return 1.0;
    }
    let s = x.sin() / x;
    (s * s).min(1.0)
}

/// Propagates signal and noise through one conversion stage.
pub fn apply_stage(
    signal: &SpectralLine,
    noise: &Spectrum,
    stage: &PplnStage,
) -> Result<(SpectralLine, Spectrum)> {
    stage.validate()?;
    let grid = *noise.grid();
    let out_center = converted_frequency(stage.direction, signal.center, stage.pump_frequency)?;
    let pm_center = signal.center - stage.detuning;
    let telecom = stage.telecom_center(signal.center);

    let eta_ext = conversion_efficiency(stage);
    let eta_int = internal_efficiency(stage);
    let pm_signal = phase_matching_factor(stage.detuning, stage.pm_fwhm);
    let couplings = stage.coupling_in * stage.coupling_out;

    let pedestal = stage.pedestal_density();
    let pedestal_spectrum = if pedestal > 0.0 {
        if !grid.contains(telecom) {
            return Err(Error::OutOfRange(format!(
                "telecom design frequency {telecom} Hz outside grid"
            )));
        }
        let window = Band::centered(telecom, 2.0 * stage.pedestal_halfwidth)?;
        let cov = grid.coverage(&window);
        Some(Spectrum::flat(grid, pedestal)?.map_bins(|i| cov[i]))
    } else {
        None
    };

    let input = match (&pedestal_spectrum, stage.direction) {
        (Some(p), Direction::Sfg) => noise.add(p)?,
        _ => noise.clone(),
    };

    let pm_bins: Vec<f64> = if eta_ext > 0.0 {
        (0..grid.n_bins())
            .map(|i| phase_matching_factor(grid.center(i) - pm_center, stage.pm_fwhm))
            .collect()
    } else {
        Vec::new()
    };

    let passed = if eta_ext > 0.0 {
        input.map_bins(|i| couplings * (1.0 - eta_int * pm_bins[i]).max(0.0))
    } else {
        input.map_bins(|_| couplings)
    };

    let mut out = passed;
    if eta_ext > 0.0 {
        let shift = match stage.direction {
            Direction::Dfg => -stage.pump_frequency,
            Direction::Sfg => stage.pump_frequency,
        };
        let converted = input.map_bins(|i| eta_ext * pm_bins[i]).shifted(shift);
        out = out.add(&converted)?;
    }
    if let (Some(p), Direction::Dfg) = (&pedestal_spectrum, stage.direction) {
        out = out.add(p)?;
    }

    let leak = signal.rate * couplings * (1.0 - eta_int * pm_signal).max(0.0);
    if leak > 0.0 {
        out = out.add(&line_to_spectrum(&signal.with_rate(leak), &grid)?)?;
    }

    let line = SpectralLine {
        center: out_center,
        fwhm: signal.fwhm,
        rate: signal.rate * eta_ext * pm_signal,
    };
    Ok((line, out))
}

/// Two-level filter: `t_pass` inside the passband, `t_stop` outside.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterElement {
    pub passband: Band,
    pub t_pass: f64,
    pub t_stop: f64,
}

impl FilterElement {
    pub fn new(passband: Band, t_pass: f64, t_stop: f64) -> Result<Self> {
        let f = FilterElement {
            passband,
            t_pass,
            t_stop,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        unit_interval("t_pass", self.t_pass)?;
        unit_interval("t_stop", self.t_stop)?;
        if self.t_stop > self.t_pass {
            return domain(format!(
                "t_stop {} exceeds t_pass {}",
                self.t_stop, self.t_pass
            ));
        }
        Ok(())
    }

    pub fn transmission(&self, f: f64) -> f64 {
        if self.passband.contains(f) {
            self.t_pass
        } else {
            self.t_stop
        }
    }
}

// Bins straddling a band edge get the coverage-weighted transmission.
fn two_level(noise: &Spectrum, band: &Band, t_in: f64, t_out: f64) -> Spectrum {
    let cov = noise.grid().coverage(band);
    noise.map_bins(|i| t_out + (t_in - t_out) * cov[i])
}

pub fn apply_filter(
    line: &SpectralLine,
    noise: &Spectrum,
    f: &FilterElement,
) -> (SpectralLine, Spectrum) {
    let line = line.with_rate(line.rate * f.transmission(line.center));
    (line, two_level(noise, &f.passband, f.t_pass, f.t_stop))
}

/// `10^(−α·L/10)`.
pub fn fiber_transmission(length_km: f64, alpha_db_per_km: f64) -> f64 {
    10f64.powf(-alpha_db_per_km * length_km / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttenuationBand {
    pub band: Band,
    pub db_per_km: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberSegment {
    pub length_km: f64,
    pub attenuation: Vec<AttenuationBand>,
    pub coupling: f64,
}

impl FiberSegment {
    pub fn validate(&self) -> Result<()> {
        non_negative("fiber length", self.length_km)?;
        unit_interval("fiber coupling", self.coupling)?;
        for a in &self.attenuation {
            non_negative("attenuation", a.db_per_km)?;
        }
        for (i, a) in self.attenuation.iter().enumerate() {
            for b in &self.attenuation[i + 1..] {
                if a.band.overlaps(&b.band) {
                    return Err(Error::Structural(format!(
                        "attenuation bands [{}, {}] and [{}, {}] overlap",
                        a.band.lo(),
                        a.band.hi(),
                        b.band.lo(),
                        b.band.hi()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn attenuation_at(&self, f: f64) -> Result<f64> {
        self.attenuation
            .iter()
            .find(|a| a.band.contains(f))
            .map(|a| a.db_per_km)
            .ok_or_else(|| Error::OutOfRange(format!("no fiber attenuation defined at {f} Hz")))
    }

    /// Coupling times span loss at frequency `f`.
    pub fn transmission_at(&self, f: f64) -> Result<f64> {
        Ok(self.coupling * fiber_transmission(self.length_km, self.attenuation_at(f)?))
    }
}

/// Applies the fiber to the line and to every occupied noise bin. Empty bins
/// need no attenuation entry.
pub fn apply_fiber(
    line: &SpectralLine,
    noise: &Spectrum,
    fiber: &FiberSegment,
) -> Result<(SpectralLine, Spectrum)> {
    fiber.validate()?;
    let line = line.with_rate(line.rate * fiber.transmission_at(line.center)?);
    let grid = noise.grid();
    let mut factors = vec![0.0; grid.n_bins()];
    for (i, d) in noise.density().iter().enumerate() {
        if *d > 0.0 {
            factors[i] = fiber.transmission_at(grid.center(i))?;
        }
    }
    Ok((line, noise.map_bins(|i| factors[i])))
}

/// Grating spectrometer: slit window, resolution and diffraction efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrometerModel {
    pub passband: Band,
    pub resolution_fwhm: f64,
    pub efficiency: f64,
}

impl SpectrometerModel {
    pub fn validate(&self) -> Result<()> {
        unit_interval("spectrometer efficiency", self.efficiency)?;
        positive("spectrometer resolution", self.resolution_fwhm)
    }
}

pub fn apply_spectrometer(
    line: &SpectralLine,
    noise: &Spectrum,
    m: &SpectrometerModel,
) -> (SpectralLine, Spectrum) {
    let t = if m.passband.contains(line.center) {
        m.efficiency
    } else {
        0.0
    };
    let blurred = noise.boxcar(m.resolution_fwhm);
    (
        line.with_rate(line.rate * t),
        two_level(&blurred, &m.passband, m.efficiency, 0.0),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub band: Band,
    pub quantum_efficiency: f64,
    pub dark_rate: f64,
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        unit_interval("quantum efficiency", self.quantum_efficiency)?;
        non_negative("dark rate", self.dark_rate)
    }
}

/// Detector reading split into its three sources, counts/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorReading {
    pub signal: f64,
    pub noise: f64,
    pub dark: f64,
}

impl DetectorReading {
    pub fn total(&self) -> f64 {
        self.signal + self.noise + self.dark
    }
}

pub fn detect_split(line: &SpectralLine, noise: &Spectrum, d: &DetectorModel) -> DetectorReading {
    let in_band = if d.band.contains(line.center) {
        line.rate
    } else {
        0.0
    };
    DetectorReading {
        signal: d.quantum_efficiency * in_band,
        noise: d.quantum_efficiency * noise.integrate_band(&d.band),
        dark: d.dark_rate,
    }
}

/// Total count rate registered by the detector.
pub fn detect(line: &SpectralLine, noise: &Spectrum, d: &DetectorModel) -> f64 {
    detect_split(line, noise, d).total()
}
