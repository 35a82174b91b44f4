//! Scenario assembly and the propagation engine.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::photonics::{
    apply_fiber, apply_filter, apply_spectrometer, apply_stage, conversion_efficiency,
    derive_eta_nor_from_peak, detect_split, phase_matching_factor, AttenuationBand, DetectorModel,
    DetectorReading, Direction, FiberSegment, FilterElement, PplnStage, SpectrometerModel,
    DEFAULT_PEDESTAL_HALFWIDTH,
};
use crate::spectral::{wavelength_to_frequency, Band, FrequencyGrid, SpectralLine, Spectrum};

#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind {
    Stage(PplnStage),
    Filter(FilterElement),
    Fiber(FiberSegment),
    Spectrometer(SpectrometerModel),
    Detector(DetectorModel),
}

impl ElementKind {
    pub fn name(&self) -> &'static str {
        match self {
            ElementKind::Stage(_) => "ppln",
            ElementKind::Filter(_) => "filter",
            ElementKind::Fiber(_) => "fiber",
            ElementKind::Spectrometer(_) => "spectrometer",
            ElementKind::Detector(_) => "detector",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub label: String,
    pub kind: ElementKind,
}

impl Element {
    pub fn new(label: impl Into<String>, kind: ElementKind) -> Self {
        Element {
            label: label.into(),
            kind,
        }
    }
}

/// Settings consumed by the analysis routines.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSettings {
    /// Width of the final narrowband (cavity) filter around the signal, Hz.
    pub final_filter_bandwidth: f64,
    /// Practical noise floor left after final filtering, counts/s.
    pub noise_floor: f64,
    /// Band used for per-element noise snapshots; the detector band if unset.
    pub reporting_band: Option<Band>,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            final_filter_bandwidth: 10e6,
            noise_floor: 100.0,
            reporting_band: None,
        }
    }
}

/// Source line, grid and an ordered element chain ending in a detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub source: SpectralLine,
    pub grid: FrequencyGrid,
    pub elements: Vec<Element>,
    /// Pump on/off overrides keyed by element index.
    pub pump_flags: BTreeMap<usize, bool>,
    pub analysis: AnalysisSettings,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        if !self.grid.contains(self.source.center) {
            return Err(Error::OutOfRange(format!(
                "source at {} Hz lies outside the grid",
                self.source.center
            )));
        }
        let detectors: Vec<usize> = self
            .elements
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(e.kind, ElementKind::Detector(_)))
            .map(|(i, _)| i)
            .collect();
        match detectors.as_slice() {
            [i] if *i + 1 == self.elements.len() => {}
            [] => return Err(Error::Structural("scenario has no detector".into())),
            [_] => {
                return Err(Error::Structural(
                    "detector must be the last element".into(),
                ))
            }
            _ => {
                return Err(Error::Structural(
                    "scenario has more than one detector".into(),
                ))
            }
        }
        let spectrometers = self
            .elements
            .iter()
            .filter(|e| matches!(e.kind, ElementKind::Spectrometer(_)))
            .count();
        if spectrometers > 1 {
            return Err(Error::Structural(
                "at most one spectrometer is allowed".into(),
            ));
        }
        for (index, e) in self.elements.iter().enumerate() {
            let checked = match &e.kind {
                ElementKind::Stage(s) => s.validate(),
                ElementKind::Filter(f) => f.validate(),
                ElementKind::Fiber(f) => f.validate(),
                ElementKind::Spectrometer(m) => m.validate(),
                ElementKind::Detector(d) => d.validate().and_then(|_| {
                    if d.band.overlaps(&self.grid.span()) {
                        Ok(())
                    } else {
                        Err(Error::Structural(
                            "detector band does not overlap the grid".into(),
                        ))
                    }
                }),
            };
            checked.map_err(|source| Error::Element {
                index,
                label: e.label.clone(),
                source: Box::new(source),
            })?;
        }
        for idx in self.pump_flags.keys() {
            if !matches!(
                self.elements.get(*idx).map(|e| &e.kind),
                Some(ElementKind::Stage(_))
            ) {
                return Err(Error::Structural(format!(
                    "pump override targets element {idx}, which is not a conversion stage"
                )));
            }
        }
        Ok(())
    }

    /// Indices of the conversion stages, in chain order.
    pub fn stage_indices(&self) -> Vec<usize> {
        self.elements
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(e.kind, ElementKind::Stage(_)))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn detector(&self) -> Option<&DetectorModel> {
        self.elements.iter().rev().find_map(|e| match &e.kind {
            ElementKind::Detector(d) => Some(d),
            _ => None,
        })
    }

    /// Stage at element `index` with its pump override applied.
    pub fn effective_stage(&self, index: usize) -> Option<PplnStage> {
        match &self.elements.get(index)?.kind {
            ElementKind::Stage(s) => {
                let mut s = s.clone();
                if let Some(on) = self.pump_flags.get(&index) {
                    s.pump_on = *on;
                }
                Some(s)
            }
            _ => None,
        }
    }

    /// External efficiency of every stage including the acceptance factor
    /// for its detuning, in chain order.
    pub fn stage_efficiencies(&self) -> Vec<f64> {
        self.stage_indices()
            .into_iter()
            .filter_map(|i| self.effective_stage(i))
            .map(|s| conversion_efficiency(&s) * phase_matching_factor(s.detuning, s.pm_fwhm))
            .collect()
    }

    pub fn reporting_band(&self) -> Option<Band> {
        self.analysis
            .reporting_band
            .or_else(|| self.detector().map(|d| d.band))
    }

    pub fn for_each_stage(&mut self, mut f: impl FnMut(&mut PplnStage)) {
        for e in &mut self.elements {
            if let ElementKind::Stage(s) = &mut e.kind {
                f(s);
            }
        }
    }
}

/// State after one element.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub label: String,
    pub line: SpectralLine,
    /// Noise photon rate inside the reporting band.
    pub band_noise: f64,
    pub spectrum: Arc<Spectrum>,
}

/// Trace of a propagation: the source state followed by one snapshot per
/// element, and the final detector reading.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub snapshots: Vec<Snapshot>,
    pub reading: DetectorReading,
}

impl LinkState {
    pub fn detector_counts(&self) -> f64 {
        self.reading.total()
    }

    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("link state always holds the source snapshot")
    }

    /// Output-to-input line-rate ratio of every element whose input rate is
    /// non-zero.
    pub fn element_ratio(&self, element: usize) -> Option<f64> {
        let before = self.snapshots.get(element)?.line.rate;
        let after = self.snapshots.get(element + 1)?.line.rate;
        (before > 0.0).then(|| after / before)
    }
}

/// Threads the source through every element in order.
pub fn propagate(s: &Scenario) -> Result<LinkState> {
    s.validate()?;
    let band = s
        .reporting_band()
        .expect("validated scenario has a detector");
    let mut line = s.source;
    let mut noise = Spectrum::zeros(s.grid);
    let mut snapshots = Vec::with_capacity(s.elements.len() + 1);
    let snap = |label: &str, line: SpectralLine, noise: &Spectrum| Snapshot {
        label: label.to_string(),
        line,
        band_noise: noise.integrate_band(&band),
        spectrum: Arc::new(noise.clone()),
    };
    snapshots.push(snap("source", line, &noise));
    let mut reading = None;
    for (index, e) in s.elements.iter().enumerate() {
        let wrap = |source: Error| Error::Element {
            index,
            label: e.label.clone(),
            source: Box::new(source),
        };
        match &e.kind {
            ElementKind::Stage(_) => {
                let stage = s.effective_stage(index).expect("stage index");
                (line, noise) = apply_stage(&line, &noise, &stage).map_err(wrap)?;
            }
            ElementKind::Filter(f) => (line, noise) = apply_filter(&line, &noise, f),
            ElementKind::Fiber(f) => (line, noise) = apply_fiber(&line, &noise, f).map_err(wrap)?,
            ElementKind::Spectrometer(m) => (line, noise) = apply_spectrometer(&line, &noise, m),
            ElementKind::Detector(d) => reading = Some(detect_split(&line, &noise, d)),
        }
        snapshots.push(snap(&e.label, line, &noise));
    }
    Ok(LinkState {
        snapshots,
        reading: reading.expect("validated scenario ends in a detector"),
    })
}

/// Component values of the two-stage visible→telecom→visible setup. Every
/// field can be overridden before calling [`standard_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct StandardParams {
    pub source_wavelength_nm: f64,
    pub source_linewidth: f64,
    pub source_rate: f64,
    pub pump_wavelength_nm: f64,
    pub pump_power_dfg: f64,
    pub pump_power_sfg: f64,
    pub peak_pump_power: f64,
    pub eta_max_dfg: f64,
    pub eta_max_sfg: f64,
    pub length_cm: f64,
    pub pm_fwhm: f64,
    pub coupling_in_dfg: f64,
    pub coupling_in_sfg: f64,
    pub coupling_out: f64,
    pub noise_density: f64,
    pub lpf_transmission: f64,
    pub spf_transmission: f64,
    pub bpf_transmission: f64,
    pub fiber_length_km: f64,
    pub fiber_coupling: f64,
    pub telecom_loss_db_per_km: f64,
    pub near_ir_loss_db_per_km: f64,
    /// `(efficiency, slit width, resolution)`; `None` leaves it out.
    pub spectrometer: Option<(f64, f64, f64)>,
    pub quantum_efficiency: f64,
    pub dark_rate: f64,
    pub grid: FrequencyGrid,
}

/// Equal per-stage pedestal density giving ≈100 kcts/s of both-pump noise at
/// the detector of the default measurement chain.
pub const STANDARD_NOISE_DENSITY: f64 = 1.1e-4;

impl Default for StandardParams {
    fn default() -> Self {
        StandardParams {
            source_wavelength_nm: 637.2,
            source_linewidth: 10e6,
            source_rate: 1e6,
            pump_wavelength_nm: 1071.0,
            pump_power_dfg: 0.5,
            pump_power_sfg: 0.5,
            peak_pump_power: 0.5,
            eta_max_dfg: 0.271,
            eta_max_sfg: 0.256,
            length_cm: 4.8,
            pm_fwhm: 40e9,
            coupling_in_dfg: 0.31,
            coupling_in_sfg: 0.35,
            coupling_out: 1.0,
            noise_density: STANDARD_NOISE_DENSITY,
            lpf_transmission: 0.870,
            spf_transmission: 0.862,
            bpf_transmission: 0.93,
            fiber_length_km: 0.001,
            fiber_coupling: 0.5,
            telecom_loss_db_per_km: 0.2,
            near_ir_loss_db_per_km: 1.0,
            spectrometer: Some((0.1, 40e9, 30e9)),
            quantum_efficiency: 1.0,
            dark_rate: 100.0,
            grid: FrequencyGrid::new(185e12, 480e12, 295_000).expect("static grid"),
        }
    }
}

impl StandardParams {
    /// Projected repeater link: ideal filters and inter-stage coupling, no
    /// spectrometer, dark counts folded into the analysis noise floor.
    pub fn repeater() -> Self {
        StandardParams {
            lpf_transmission: 1.0,
            spf_transmission: 1.0,
            bpf_transmission: 1.0,
            fiber_length_km: 0.0,
            fiber_coupling: 1.0,
            spectrometer: None,
            dark_rate: 0.0,
            noise_density: 4.3e-6,
            ..StandardParams::default()
        }
    }
}

/// Builds the PPLN1 → LPF → SMF → PPLN2 → SPF → DM3 → [spectrometer] → BPF →
/// SPCM chain.
pub fn standard_scenario(p: &StandardParams) -> Result<Scenario> {
    let nu = wavelength_to_frequency;
    let source = SpectralLine::new(
        nu(p.source_wavelength_nm)?,
        p.source_linewidth,
        p.source_rate,
    )?;
    let pump = nu(p.pump_wavelength_nm)?;
    let eta_nor = derive_eta_nor_from_peak(p.peak_pump_power, p.length_cm)?;
    let stage = |direction, eta_max, coupling_in, pump_power| PplnStage {
        direction,
        eta_max,
        eta_nor,
        length_cm: p.length_cm,
        pm_fwhm: p.pm_fwhm,
        pump_frequency: pump,
        pump_power,
        coupling_in,
        coupling_out: p.coupling_out,
        noise_density: p.noise_density,
        noise_ref_power: 0.5,
        pump_on: true,
        detuning: 0.0,
        pedestal_halfwidth: DEFAULT_PEDESTAL_HALFWIDTH,
    };

    let mut elements = vec![
        Element::new(
            "PPLN1",
            ElementKind::Stage(stage(
                Direction::Dfg,
                p.eta_max_dfg,
                p.coupling_in_dfg,
                p.pump_power_dfg,
            )),
        ),
        Element::new(
            "LPF",
            ElementKind::Filter(FilterElement::new(
                Band::from_wavelengths(1100.0, 2500.0)?,
                p.lpf_transmission,
                0.0,
            )?),
        ),
        Element::new(
            "SMF",
            ElementKind::Fiber(FiberSegment {
                length_km: p.fiber_length_km,
                attenuation: vec![
                    AttenuationBand {
                        band: Band::from_wavelengths(1260.0, 1700.0)?,
                        db_per_km: p.telecom_loss_db_per_km,
                    },
                    AttenuationBand {
                        band: Band::new(nu(1260.0)?, nu(600.0)?)?,
                        db_per_km: p.near_ir_loss_db_per_km,
                    },
                ],
                coupling: p.fiber_coupling,
            }),
        ),
        Element::new(
            "PPLN2",
            ElementKind::Stage(stage(
                Direction::Sfg,
                p.eta_max_sfg,
                p.coupling_in_sfg,
                p.pump_power_sfg,
            )),
        ),
        Element::new(
            "SPF",
            ElementKind::Filter(FilterElement::new(
                Band::from_wavelengths(400.0, 800.0)?,
                p.spf_transmission,
                0.0,
            )?),
        ),
        Element::new(
            "DM3",
            ElementKind::Filter(FilterElement::new(
                Band::from_wavelengths(400.0, 950.0)?,
                1.0,
                0.0,
            )?),
        ),
    ];
    if let Some((efficiency, slit, resolution)) = p.spectrometer {
        elements.push(Element::new(
            "spectrometer",
            ElementKind::Spectrometer(SpectrometerModel {
                passband: Band::centered(source.center, slit)?,
                resolution_fwhm: resolution,
                efficiency,
            }),
        ));
    }
    elements.push(Element::new(
        "BPF",
        ElementKind::Filter(FilterElement::new(
            Band::from_wavelengths(634.0, 641.0)?,
            p.bpf_transmission,
            0.0,
        )?),
    ));
    elements.push(Element::new(
        "SPCM",
        ElementKind::Detector(DetectorModel {
            band: Band::from_wavelengths(400.0, 1000.0)?,
            quantum_efficiency: p.quantum_efficiency,
            dark_rate: p.dark_rate,
        }),
    ));

    let scenario = Scenario {
        label: "standard".into(),
        source,
        grid: p.grid,
        elements,
        pump_flags: BTreeMap::new(),
        analysis: AnalysisSettings::default(),
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> StandardParams {
        StandardParams {
            grid: FrequencyGrid::new(185e12, 480e12, 29_500).unwrap(),
            ..StandardParams::default()
        }
    }

    #[test]
    fn default_build_is_valid() {
        let s = standard_scenario(&StandardParams::default()).unwrap();
        s.validate().unwrap();
        let eff = s.stage_efficiencies();
        assert_eq!(eff, vec![0.271, 0.256]);
    }

    #[test]
    fn identity_chain_passes_source() {
        let grid = FrequencyGrid::new(400e12, 500e12, 1000).unwrap();
        let source = SpectralLine::new(470e12, 10e6, 5e5).unwrap();
        let band = Band::new(401e12, 499e12).unwrap();
        let mut elements: Vec<Element> = (0..3)
            .map(|i| {
                Element::new(
                    format!("id{i}"),
                    ElementKind::Filter(FilterElement::new(band, 1.0, 1.0).unwrap()),
                )
            })
            .collect();
        elements.push(Element::new(
            "det",
            ElementKind::Detector(DetectorModel {
                band,
                quantum_efficiency: 1.0,
                dark_rate: 7.0,
            }),
        ));
        let s = Scenario {
            label: "id".into(),
            source,
            grid,
            elements,
            pump_flags: BTreeMap::new(),
            analysis: AnalysisSettings::default(),
        };
        let state = propagate(&s).unwrap();
        assert_eq!(state.snapshots.len(), 5);
        assert_eq!(state.final_snapshot().line, source);
        assert_eq!(state.detector_counts(), 5e5 + 7.0);
    }

    #[test]
    fn two_step_efficiency_product() {
        let s = standard_scenario(&coarse()).unwrap();
        let state = propagate(&s).unwrap();
        let stages = s.stage_indices();
        let total: f64 = stages
            .iter()
            .map(|i| state.element_ratio(*i).unwrap())
            .product();
        assert!((total - 0.271 * 0.256).abs() < 1e-12);
        // LPF and fiber coupling between the stages
        let between: f64 = (stages[0] + 1..stages[1])
            .map(|i| state.element_ratio(i).unwrap())
            .product();
        assert!((between - 0.4).abs() < 0.05, "{between}");
    }

    #[test]
    fn layout_errors() {
        let mut s = standard_scenario(&coarse()).unwrap();
        let det = s.elements.pop().unwrap();
        assert!(matches!(s.validate(), Err(Error::Structural(_))));
        s.elements.insert(0, det.clone());
        s.elements.push(det);
        assert!(matches!(s.validate(), Err(Error::Structural(_))));

        let mut s = standard_scenario(&coarse()).unwrap();
        let spectro = s.elements[6].clone();
        s.elements.insert(6, spectro);
        assert!(s.validate().is_err());

        let mut s = standard_scenario(&coarse()).unwrap();
        s.pump_flags.insert(1, false);
        assert!(s.validate().is_err());
    }

    #[test]
    fn element_errors_carry_index() {
        let mut s = standard_scenario(&coarse()).unwrap();
        if let ElementKind::Fiber(f) = &mut s.elements[2].kind {
            f.attenuation.truncate(1);
            f.attenuation[0].band = Band::new(1e12, 2e12).unwrap();
        }
        match propagate(&s) {
            Err(Error::Element { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deterministic() {
        let s = standard_scenario(&coarse()).unwrap();
        assert_eq!(propagate(&s).unwrap(), propagate(&s).unwrap());
    }
}
