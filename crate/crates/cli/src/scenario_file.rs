//! Plain-text scenario files.
//!
//! ```text
//! label = standard
//!
//! [source]
//! wavelength = 637.2 nm
//! linewidth = 10 MHz
//! rate = 1 Mcts/s
//!
//! [grid]
//! from = 185 THz
//! to = 480 THz
//! bins = 295000
//!
//! [element.1]
//! kind = filter
//! passband = 1100 nm .. 2500 nm
//! t_pass = 0.87
//! ...
//! ```
//!
//! Keys are fail-closed: anything not listed for a section is rejected.
//! Dimensioned values must carry a unit; dimensionless values must not.
//! `#` at the start of a line or after whitespace begins a comment.

use std::collections::BTreeMap;
use std::fmt;

use qfc_core::chain::{AnalysisSettings, Element, ElementKind, Scenario};
use qfc_core::photonics::{
    derive_eta_nor_from_peak, AttenuationBand, DetectorModel, Direction, FiberSegment,
    FilterElement, PplnStage, SpectrometerModel, DEFAULT_PEDESTAL_HALFWIDTH,
};
use qfc_core::spectral::{wavelength_to_frequency, Band, FrequencyGrid, SpectralLine};
use qfc_core::Error as CoreError;

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub section: Option<String>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}", self.line)?;
        if let Some(s) = &self.section {
            write!(f, ", [{s}]")?;
        }
        if let Some(k) = &self.key {
            write!(f, ", key `{k}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ParseError {}

type PResult<T> = Result<T, ParseError>;

#[derive(Debug)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn error(&self, line: usize, key: Option<&str>, message: impl Into<String>) -> ParseError {
        ParseError {
            line,
            section: (!self.name.is_empty()).then(|| self.name.clone()),
            key: key.map(str::to_string),
            message: message.into(),
        }
    }

    fn header_error(&self, message: impl Into<String>) -> ParseError {
        self.error(self.line, None, message)
    }
}

fn strip_comment(line: &str) -> &str {
    if line.trim_start().starts_with('#') {
        return "";
    }
    let bytes = line.as_bytes();
    for i in 1..bytes.len() {
        if bytes[i] == b'#' && bytes[i - 1].is_ascii_whitespace() {
            return &line[..i];
        }
    }
    line
}

fn tokenize(text: &str) -> PResult<Vec<Section>> {
    let mut sections = vec![Section {
        name: String::new(),
        line: 0,
        entries: Vec::new(),
    }];
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ParseError {
            line: line_no,
            section: None,
            key: None,
            message,
        };
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(format!("malformed section header `{line}`")))?
                .trim()
                .to_string();
            if sections.iter().any(|s| s.name == name) {
                return Err(ParseError {
                    section: Some(name.clone()),
                    ..err(format!("duplicate section [{name}]"))
                });
            }
            sections.push(Section {
                name,
                line: line_no,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        if key.is_empty()
            || !key
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.')
        {
            return Err(err(format!("key `{key}` must be lower_snake_case")));
        }
        sections
            .last_mut()
            .expect("preamble section")
            .entries
            .push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line: line_no,
            });
    }
    Ok(sections)
}

/// Tracks which keys of a section have been consumed.
struct Fields<'a> {
    section: &'a Section,
    used: Vec<bool>,
}

impl<'a> Fields<'a> {
    fn new(section: &'a Section) -> Self {
        Fields {
            section,
            used: vec![false; section.entries.len()],
        }
    }

    fn take(&mut self, key: &str) -> PResult<Option<&'a Entry>> {
        let mut found: Option<&'a Entry> = None;
        for (i, e) in self.section.entries.iter().enumerate() {
            if e.key == key {
                if found.is_some() {
                    return Err(self.section.error(e.line, Some(key), "duplicate key"));
                }
                self.used[i] = true;
                found = Some(e);
            }
        }
        Ok(found)
    }

    fn take_all(&mut self, key: &str) -> Vec<&'a Entry> {
        let mut out = Vec::new();
        for (i, e) in self.section.entries.iter().enumerate() {
            if e.key == key {
                self.used[i] = true;
                out.push(e);
            }
        }
        out
    }

    /// Entries whose key starts with `prefix`.
    fn take_prefixed(&mut self, prefix: &str) -> Vec<&'a Entry> {
        let mut out = Vec::new();
        for (i, e) in self.section.entries.iter().enumerate() {
            if e.key.starts_with(prefix) {
                self.used[i] = true;
                out.push(e);
            }
        }
        out
    }

    fn require(&mut self, key: &str) -> PResult<&'a Entry> {
        self.take(key)?.ok_or_else(|| {
            self.section
                .header_error(format!("missing required key `{key}`"))
        })
    }

    fn get<T>(
        &mut self,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> PResult<Option<T>> {
        match self.take(key)? {
            Some(e) => parse(&e.value)
                .map(Some)
                .map_err(|m| self.section.error(e.line, Some(key), m)),
            None => Ok(None),
        }
    }

    fn req<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> PResult<T> {
        let e = self.require(key)?;
        parse(&e.value).map_err(|m| self.section.error(e.line, Some(key), m))
    }

    fn finish(self) -> PResult<()> {
        match self
            .section
            .entries
            .iter()
            .zip(&self.used)
            .find(|(_, used)| !**used)
        {
            Some((e, _)) => Err(self.section.error(e.line, Some(&e.key), "unknown key")),
            None => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// Values and units
// ---------------------------------------------------------------------------

fn split_quantity(s: &str) -> Result<(f64, &str), String> {
    let s = s.trim();
    let mut best = None;
    for (i, _) in s.char_indices().chain(std::iter::once((s.len(), ' '))) {
        if let Ok(v) = s[..i].trim_end().parse::<f64>() {
            best = Some((v, s[i..].trim()));
        }
    }
    match best {
        Some((v, _)) if !v.is_finite() => Err(format!("`{s}` is not a finite number")),
        Some(b) => Ok(b),
        None => Err(format!("`{s}` does not start with a number")),
    }
}

/// Multiplies by `10^exp` with a single correctly rounded operation.
fn pow10(v: f64, exp: i32) -> f64 {
    if exp >= 0 {
        v * 10f64.powi(exp)
    } else {
        v / 10f64.powi(-exp)
    }
}

fn with_units(s: &str, what: &str, table: &[(&str, i32)]) -> Result<f64, String> {
    let (v, unit) = split_quantity(s)?;
    if unit.is_empty() {
        return Err(format!("{what} needs a unit (one of {})", unit_list(table)));
    }
    table
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, e)| pow10(v, *e))
        .ok_or_else(|| {
            format!(
                "unit `{unit}` is not a {what} unit (one of {})",
                unit_list(table)
            )
        })
}

fn unit_list(table: &[(&str, i32)]) -> String {
    table.iter().map(|(u, _)| *u).collect::<Vec<_>>().join(", ")
}

const FREQ_UNITS: &[(&str, i32)] = &[("Hz", 0), ("kHz", 3), ("MHz", 6), ("GHz", 9), ("THz", 12)];
const WAVELENGTH_UNITS: &[(&str, i32)] = &[("pm", -3), ("nm", 0), ("um", 3), ("μm", 3)];
const POWER_UNITS: &[(&str, i32)] = &[("W", 0), ("mW", -3), ("uW", -6), ("μW", -6), ("nW", -9)];
const CRYSTAL_UNITS: &[(&str, i32)] = &[("mm", -1), ("cm", 0), ("m", 2)];
const DISTANCE_UNITS: &[(&str, i32)] = &[("m", -3), ("km", 0)];
const RATE_UNITS: &[(&str, i32)] = &[("cts/s", 0), ("kcts/s", 3), ("Mcts/s", 6)];
const DENSITY_UNITS: &[(&str, i32)] = &[("cts/s/Hz", 0)];
const ETA_NOR_UNITS: &[(&str, i32)] = &[("/W/cm^2", 0), ("/W/cm2", 0)];
const ATTENUATION_UNITS: &[(&str, i32)] = &[("dB/km", 0)];

pub fn frequency(s: &str) -> Result<f64, String> {
    with_units(s, "frequency", FREQ_UNITS)
}

/// Frequency given either directly or as a vacuum wavelength.
pub fn optical_frequency(s: &str) -> Result<f64, String> {
    let (_, unit) = split_quantity(s)?;
    if WAVELENGTH_UNITS.iter().any(|(u, _)| *u == unit) {
        let nm = with_units(s, "wavelength", WAVELENGTH_UNITS)?;
        wavelength_to_frequency(nm).map_err(|e| e.to_string())
    } else if FREQ_UNITS.iter().any(|(u, _)| *u == unit) {
        frequency(s)
    } else if unit.is_empty() {
        Err("optical frequency needs a unit (Hz… or nm…)".into())
    } else {
        Err(format!(
            "unit `{unit}` is neither a frequency nor a wavelength unit"
        ))
    }
}

pub fn power(s: &str) -> Result<f64, String> {
    with_units(s, "power", POWER_UNITS)
}

pub fn crystal_length(s: &str) -> Result<f64, String> {
    with_units(s, "length", CRYSTAL_UNITS)
}

pub fn distance(s: &str) -> Result<f64, String> {
    with_units(s, "distance", DISTANCE_UNITS)
}

pub fn rate(s: &str) -> Result<f64, String> {
    with_units(s, "count rate", RATE_UNITS)
}

fn density(s: &str) -> Result<f64, String> {
    with_units(s, "flux density", DENSITY_UNITS)
}

fn eta_nor(s: &str) -> Result<f64, String> {
    with_units(s, "normalized efficiency", ETA_NOR_UNITS)
}

fn dimensionless(s: &str) -> Result<f64, String> {
    let (v, unit) = split_quantity(s)?;
    if !unit.is_empty() {
        return Err(format!(
            "dimensionless value must not carry a unit, got `{unit}`"
        ));
    }
    Ok(v)
}

fn count(s: &str) -> Result<usize, String> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn switch(s: &str) -> Result<bool, String> {
    match s.trim() {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        other => Err(format!("expected on/off, got `{other}`")),
    }
}

fn direction(s: &str) -> Result<Direction, String> {
    match s.trim() {
        "dfg" => Ok(Direction::Dfg),
        "sfg" => Ok(Direction::Sfg),
        other => Err(format!("direction must be dfg or sfg, got `{other}`")),
    }
}

fn band(s: &str) -> Result<Band, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("band must be written `lo .. hi`, got `{s}`"))?;
    let fa = optical_frequency(a)?;
    let fb = optical_frequency(b)?;
    Band::new(fa.min(fb), fa.max(fb)).map_err(|e| e.to_string())
}

fn attenuation(s: &str) -> Result<AttenuationBand, String> {
    let (alpha, over) = s
        .split_once(" over ")
        .ok_or_else(|| format!("attenuation must be written `α dB/km over lo .. hi`, got `{s}`"))?;
    Ok(AttenuationBand {
        db_per_km: with_units(alpha, "attenuation", ATTENUATION_UNITS)?,
        band: band(over)?,
    })
}

fn label(s: &str) -> Result<String, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("label must not be empty".into());
    }
    Ok(s.to_string())
}

fn core_err(e: CoreError) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parses and validates a scenario file.
pub fn parse_scenario(text: &str) -> PResult<Scenario> {
    let sections = tokenize(text)?;
    let mut preamble = None;
    let mut source_sec = None;
    let mut grid_sec = None;
    let mut analysis_sec = None;
    let mut element_secs = Vec::new();
    for sec in &sections {
        match sec.name.as_str() {
            "" => preamble = Some(sec),
            "source" => source_sec = Some(sec),
            "grid" => grid_sec = Some(sec),
            "analysis" => analysis_sec = Some(sec),
            name => match name.strip_prefix("element.").map(str::parse::<usize>) {
                Some(Ok(n)) => {
                    let expected = element_secs.len() + 1;
                    if n != expected {
                        return Err(sec.header_error(format!(
                            "element sections must be numbered 1, 2, … in file order; expected [element.{expected}]"
                        )));
                    }
                    element_secs.push(sec);
                }
                _ => return Err(sec.header_error(format!("unknown section [{name}]"))),
            },
        }
    }
    let missing = |name: &str| ParseError {
        line: 0,
        section: Some(name.to_string()),
        key: None,
        message: format!("missing [{name}] section"),
    };

    let mut f = Fields::new(preamble.expect("tokenizer always emits a preamble"));
    let scenario_label = f
        .get("label", label)?
        .unwrap_or_else(|| "scenario".to_string());
    f.finish()?;

    let sec = source_sec.ok_or_else(|| missing("source"))?;
    let source = parse_source(sec)?;
    let sec = grid_sec.ok_or_else(|| missing("grid"))?;
    let grid = parse_grid(sec)?;

    let mut elements = Vec::with_capacity(element_secs.len());
    let mut detector_seen = false;
    for (i, sec) in element_secs.iter().enumerate() {
        let el = parse_element(sec, i + 1)?;
        if matches!(el.kind, ElementKind::Detector(_)) {
            if detector_seen {
                return Err(sec.header_error("second detector section; a scenario has exactly one"));
            }
            detector_seen = true;
        }
        elements.push(el);
    }

    let (analysis, pump_flags) = match analysis_sec {
        Some(sec) => parse_analysis(sec, elements.len())?,
        None => (AnalysisSettings::default(), BTreeMap::new()),
    };

    let scenario = Scenario {
        label: scenario_label,
        source,
        grid,
        elements,
        pump_flags,
        analysis,
    };
    scenario.validate().map_err(|e| match &e {
        CoreError::Element { index, .. } => element_secs[*index].header_error(e.root().to_string()),
        _ => ParseError {
            line: 0,
            section: None,
            key: None,
            message: e.to_string(),
        },
    })?;
    Ok(scenario)
}

fn parse_source(sec: &Section) -> PResult<SpectralLine> {
    let mut f = Fields::new(sec);
    let wl = f.get("wavelength", optical_frequency)?;
    let fr = f.get("frequency", optical_frequency)?;
    let center = match (wl, fr) {
        (Some(c), None) | (None, Some(c)) => c,
        (None, None) => return Err(sec.header_error("give either `wavelength` or `frequency`")),
        (Some(_), Some(_)) => {
            return Err(sec.header_error("`wavelength` and `frequency` are mutually exclusive"))
        }
    };
    let fwhm = f.req("linewidth", frequency)?;
    let r = f.req("rate", rate)?;
    f.finish()?;
    SpectralLine::new(center, fwhm, r).map_err(|e| sec.header_error(e.to_string()))
}

fn parse_grid(sec: &Section) -> PResult<FrequencyGrid> {
    let mut f = Fields::new(sec);
    let a = f.req("from", optical_frequency)?;
    let b = f.req("to", optical_frequency)?;
    let n = f.req("bins", count)?;
    f.finish()?;
    FrequencyGrid::new(a.min(b), a.max(b), n).map_err(|e| sec.header_error(e.to_string()))
}

fn parse_element(sec: &Section, number: usize) -> PResult<Element> {
    let mut f = Fields::new(sec);
    let kind_name = f.req("kind", |s| Ok(s.trim().to_string()))?;
    let label_text = f.get("label", label)?;
    let kind = match kind_name.as_str() {
        "ppln" => ElementKind::Stage(parse_stage(sec, &mut f)?),
        "filter" => ElementKind::Filter(FilterElement {
            passband: f.req("passband", band)?,
            t_pass: f.req("t_pass", dimensionless)?,
            t_stop: f.get("t_stop", dimensionless)?.unwrap_or(0.0),
        }),
        "fiber" => {
            let length_km = f.req("length", distance)?;
            let coupling = f.get("coupling", dimensionless)?.unwrap_or(1.0);
            let mut bands = Vec::new();
            for e in f.take_all("attenuation") {
                bands.push(
                    attenuation(&e.value).map_err(|m| sec.error(e.line, Some("attenuation"), m))?,
                );
            }
            ElementKind::Fiber(FiberSegment {
                length_km,
                attenuation: bands,
                coupling,
            })
        }
        "spectrometer" => ElementKind::Spectrometer(SpectrometerModel {
            passband: f.req("window", band)?,
            resolution_fwhm: f.req("resolution", frequency)?,
            efficiency: f.req("efficiency", dimensionless)?,
        }),
        "detector" => ElementKind::Detector(DetectorModel {
            band: f.req("band", band)?,
            quantum_efficiency: f.get("quantum_efficiency", dimensionless)?.unwrap_or(1.0),
            dark_rate: f.req("dark_rate", rate)?,
        }),
        other => {
            let e = f.require("kind")?;
            return Err(sec.error(
                e.line,
                Some("kind"),
                format!(
                    "unknown element kind `{other}` (ppln, filter, fiber, spectrometer, detector)"
                ),
            ));
        }
    };
    f.finish()?;
    let label = label_text.unwrap_or_else(|| format!("{}{}", kind.name(), number));
    Ok(Element { label, kind })
}

fn parse_stage(sec: &Section, f: &mut Fields<'_>) -> PResult<PplnStage> {
    let length_cm = f.req("length", crystal_length)?;
    let explicit = f.get("eta_nor", eta_nor)?;
    let peak = f.get("peak_power", power)?;
    let eta_nor_value = match (explicit, peak) {
        (Some(k), None) => k,
        (None, Some(p)) => {
            derive_eta_nor_from_peak(p, length_cm).map_err(|e| sec.header_error(core_err(e)))?
        }
        (None, None) => return Err(sec.header_error("give either `eta_nor` or `peak_power`")),
        (Some(_), Some(_)) => {
            return Err(sec.header_error("`eta_nor` and `peak_power` are mutually exclusive"))
        }
    };
    let pump_wl = f.get("pump_wavelength", optical_frequency)?;
    let pump_fr = f.get("pump_frequency", optical_frequency)?;
    let pump_frequency = match (pump_wl, pump_fr) {
        (Some(p), None) | (None, Some(p)) => p,
        (None, None) => {
            return Err(sec.header_error("give either `pump_wavelength` or `pump_frequency`"))
        }
        (Some(_), Some(_)) => {
            return Err(
                sec.header_error("`pump_wavelength` and `pump_frequency` are mutually exclusive")
            )
        }
    };
    let pump_power = f.req("pump_power", power)?;
    Ok(PplnStage {
        direction: f.req("direction", direction)?,
        eta_max: f.req("eta_max", dimensionless)?,
        eta_nor: eta_nor_value,
        length_cm,
        pm_fwhm: f.req("acceptance", frequency)?,
        pump_frequency,
        pump_power,
        coupling_in: f.req("coupling_in", dimensionless)?,
        coupling_out: f.get("coupling_out", dimensionless)?.unwrap_or(1.0),
        noise_density: f.get("noise_density", density)?.unwrap_or(0.0),
        noise_ref_power: f.get("noise_ref_power", power)?.unwrap_or(pump_power),
        pump_on: f.get("pump", switch)?.unwrap_or(true),
        detuning: f.get("detuning", frequency)?.unwrap_or(0.0),
        pedestal_halfwidth: f
            .get("pedestal_halfwidth", frequency)?
            .unwrap_or(DEFAULT_PEDESTAL_HALFWIDTH),
    })
}

fn parse_analysis(
    sec: &Section,
    n_elements: usize,
) -> PResult<(AnalysisSettings, BTreeMap<usize, bool>)> {
    let mut f = Fields::new(sec);
    let defaults = AnalysisSettings::default();
    let settings = AnalysisSettings {
        final_filter_bandwidth: f
            .get("final_filter", frequency)?
            .unwrap_or(defaults.final_filter_bandwidth),
        noise_floor: f.get("noise_floor", rate)?.unwrap_or(defaults.noise_floor),
        reporting_band: f.get("reporting_band", band)?,
    };
    let mut flags = BTreeMap::new();
    for e in f.take_prefixed("pump_override.") {
        let n = e.key["pump_override.".len()..]
            .parse::<usize>()
            .ok()
            .filter(|n| (1..=n_elements).contains(n))
            .ok_or_else(|| {
                sec.error(
                    e.line,
                    Some(&e.key),
                    "override must name an existing element number",
                )
            })?;
        let on = switch(&e.value).map_err(|m| sec.error(e.line, Some(&e.key), m))?;
        if flags.insert(n - 1, on).is_some() {
            return Err(sec.error(e.line, Some(&e.key), "duplicate key"));
        }
    }
    f.finish()?;
    Ok((settings, flags))
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn fmt_band(b: &Band) -> String {
    format!("{} Hz .. {} Hz", fmt_num(b.lo()), fmt_num(b.hi()))
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

/// Writes `s` in canonical base units; [`parse_scenario`] reads it back to an
/// identical value.
pub fn serialize_scenario(s: &Scenario) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let kv = |out: &mut String, k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv(&mut out, "label", s.label.clone());
    out.push_str("\n[source]\n");
    kv(
        &mut out,
        "frequency",
        format!("{} Hz", fmt_num(s.source.center)),
    );
    kv(
        &mut out,
        "linewidth",
        format!("{} Hz", fmt_num(s.source.fwhm)),
    );
    kv(
        &mut out,
        "rate",
        format!("{} cts/s", fmt_num(s.source.rate)),
    );
    out.push_str("\n[grid]\n");
    kv(&mut out, "from", format!("{} Hz", fmt_num(s.grid.f_min())));
    kv(&mut out, "to", format!("{} Hz", fmt_num(s.grid.f_max())));
    kv(&mut out, "bins", s.grid.n_bins().to_string());
    for (i, e) in s.elements.iter().enumerate() {
        let _ = writeln!(out, "\n[element.{}]", i + 1);
        kv(&mut out, "kind", e.kind.name().to_string());
        kv(&mut out, "label", e.label.clone());
        match &e.kind {
            ElementKind::Stage(st) => {
                let dir = match st.direction {
                    Direction::Dfg => "dfg",
                    Direction::Sfg => "sfg",
                };
                kv(&mut out, "direction", dir.into());
                kv(&mut out, "eta_max", fmt_num(st.eta_max));
                kv(
                    &mut out,
                    "eta_nor",
                    format!("{} /W/cm^2", fmt_num(st.eta_nor)),
                );
                kv(&mut out, "length", format!("{} cm", fmt_num(st.length_cm)));
                kv(
                    &mut out,
                    "acceptance",
                    format!("{} Hz", fmt_num(st.pm_fwhm)),
                );
                kv(
                    &mut out,
                    "pump_frequency",
                    format!("{} Hz", fmt_num(st.pump_frequency)),
                );
                kv(
                    &mut out,
                    "pump_power",
                    format!("{} W", fmt_num(st.pump_power)),
                );
                kv(&mut out, "coupling_in", fmt_num(st.coupling_in));
                kv(&mut out, "coupling_out", fmt_num(st.coupling_out));
                kv(
                    &mut out,
                    "noise_density",
                    format!("{} cts/s/Hz", fmt_num(st.noise_density)),
                );
                kv(
                    &mut out,
                    "noise_ref_power",
                    format!("{} W", fmt_num(st.noise_ref_power)),
                );
                kv(&mut out, "pump", on_off(st.pump_on).into());
                kv(&mut out, "detuning", format!("{} Hz", fmt_num(st.detuning)));
                kv(
                    &mut out,
                    "pedestal_halfwidth",
                    format!("{} Hz", fmt_num(st.pedestal_halfwidth)),
                );
            }
            ElementKind::Filter(fl) => {
                kv(&mut out, "passband", fmt_band(&fl.passband));
                kv(&mut out, "t_pass", fmt_num(fl.t_pass));
                kv(&mut out, "t_stop", fmt_num(fl.t_stop));
            }
            ElementKind::Fiber(fb) => {
                kv(&mut out, "length", format!("{} km", fmt_num(fb.length_km)));
                kv(&mut out, "coupling", fmt_num(fb.coupling));
                for a in &fb.attenuation {
                    kv(
                        &mut out,
                        "attenuation",
                        format!("{} dB/km over {}", fmt_num(a.db_per_km), fmt_band(&a.band)),
                    );
                }
            }
            ElementKind::Spectrometer(m) => {
                kv(&mut out, "window", fmt_band(&m.passband));
                kv(
                    &mut out,
                    "resolution",
                    format!("{} Hz", fmt_num(m.resolution_fwhm)),
                );
                kv(&mut out, "efficiency", fmt_num(m.efficiency));
            }
            ElementKind::Detector(d) => {
                kv(&mut out, "band", fmt_band(&d.band));
                kv(
                    &mut out,
                    "quantum_efficiency",
                    fmt_num(d.quantum_efficiency),
                );
                kv(
                    &mut out,
                    "dark_rate",
                    format!("{} cts/s", fmt_num(d.dark_rate)),
                );
            }
        }
    }
    out.push_str("\n[analysis]\n");
    kv(
        &mut out,
        "final_filter",
        format!("{} Hz", fmt_num(s.analysis.final_filter_bandwidth)),
    );
    kv(
        &mut out,
        "noise_floor",
        format!("{} cts/s", fmt_num(s.analysis.noise_floor)),
    );
    if let Some(b) = &s.analysis.reporting_band {
        kv(&mut out, "reporting_band", fmt_band(b));
    }
    for (idx, on) in &s.pump_flags {
        kv(
            &mut out,
            &format!("pump_override.{}", idx + 1),
            on_off(*on).into(),
        );
    }
    out
}
