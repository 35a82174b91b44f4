//! Spectral link-budget engine for two-step quantum frequency conversion
//! (visible → telecom → visible) links between remote quantum memories.
//!
//! The engine propagates a narrow signal line and broadband pump-induced
//! noise through an ordered chain of PPLN conversion stages, filters, fiber,
//! an optional spectrometer and a photon-counting detector.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod chain;
pub mod error;
pub mod fitting;
pub mod photonics;
pub mod spectral;

pub use analysis::{
    calibrate_noise_density, estimate_snr, noise_attribution, sweep_distance, sweep_pump_power,
    AttributionReport, DistanceRow, PowerRow, SnrReport,
};
pub use chain::{
    propagate, standard_scenario, AnalysisSettings, Element, ElementKind, LinkState, Scenario,
    StandardParams,
};
pub use error::{Error, Result};
pub use fitting::{fit_efficiency_curve, predict_curve, EfficiencySample, FitResult};
pub use photonics::{
    conversion_efficiency, converted_frequency, phase_matching_factor, Direction, PplnStage,
};
pub use spectral::{
    frequency_to_wavelength, wavelength_to_frequency, Band, FrequencyGrid, SpectralLine, Spectrum,
};
