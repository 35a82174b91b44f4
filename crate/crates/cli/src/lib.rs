//! Command-line front end: scenario files, command dispatch and report
//! emission.

pub mod report;
pub mod scenario_file;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use qfc_core::analysis::{
    calibrate_noise_density, estimate_snr, fiber_length_km, noise_attribution, sweep_distance,
    sweep_pump_power,
};
use qfc_core::chain::{propagate, ElementKind, Scenario};
use qfc_core::fitting::{fit_efficiency_curve, EfficiencySample};

pub use report::{ReportBundle, Table};
pub use scenario_file::{parse_scenario, serialize_scenario, ParseError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("{0}")]
    Csv(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Core(#[from] qfc_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if matches!(e.root(), qfc_core::Error::Infeasible(_)) => {
                EXIT_INFEASIBLE
            }
            _ => EXIT_INPUT,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qfc",
    about = "Spectral link budgets for two-step frequency conversion links"
)]
struct Cli {
    /// Print the CSV tables instead of the text summary.
    #[arg(long, global = true)]
    csv: bool,
    /// Also write every table to <DIR>/<table>.csv.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate the scenario and report the per-element budget.
    Simulate { scenario: PathBuf },
    /// Fit the efficiency model to a `pump_power_mW,eta` CSV.
    Fit {
        #[arg(value_name = "CSV")]
        samples: PathBuf,
        #[arg(long)]
        length_cm: f64,
    },
    /// Conversion efficiencies against pump power (bare numbers are W).
    SweepPower {
        scenario: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        #[arg(long)]
        steps: usize,
    },
    /// SNR against fiber length (bare numbers are km).
    SweepDistance {
        scenario: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        #[arg(long)]
        steps: usize,
    },
    /// Signal-blocked noise for both pumps, second pump only, first pump only.
    Attribute { scenario: PathBuf },
    /// Pedestal density giving the target signal-blocked count rate.
    Calibrate {
        scenario: PathBuf,
        /// Counts/s, or a rate with unit such as `100 kcts/s`.
        #[arg(long)]
        target_cts: String,
    },
}

/// Parses `argv` (program name first), runs the command and collects its
/// output. Never panics on bad input and never touches the process streams.
pub fn run_command<I, T>(argv: I) -> ReportBundle
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let mut b = ReportBundle::default();
            if code == EXIT_OK {
                b.stdout = text;
            } else {
                b.stderr = text;
            }
            b.exit_code = code;
            return b;
        }
    };
    let mut bundle = match dispatch(&cli.command) {
        Ok(b) => b,
        Err(e) => return ReportBundle::failure(e.exit_code(), format!("error: {e}\n")),
    };
    if let Some(dir) = &cli.out_dir {
        if let Err(e) = bundle.write_tables(dir) {
            return ReportBundle::failure(EXIT_INPUT, format!("error: {e}\n"));
        }
    }
    bundle.stdout = if cli.csv {
        bundle.csv_text()
    } else {
        bundle.summary.clone()
    };
    bundle
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    parse_scenario(&read(path)?).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `pump_power_mW,eta` rows; a `pump_power_W` column is accepted too.
pub fn load_samples(path: &Path) -> Result<Vec<EfficiencySample>, CliError> {
    let text = read(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let bad = |m: String| CliError::Csv(format!("{}: {m}", path.display()));
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (p_col, per_watt) = match (col("pump_power_mW"), col("pump_power_W")) {
        (Some(i), _) => (i, 1e3),
        (None, Some(i)) => (i, 1.0),
        _ => return Err(bad("missing `pump_power_mW` column".into())),
    };
    let eta_col = col("eta").ok_or_else(|| bad("missing `eta` column".into()))?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64, CliError> {
            let field = rec.get(i).unwrap_or("");
            field
                .parse::<f64>()
                .map_err(|_| bad(format!("row {}: `{field}` is not a number", row + 2)))
        };
        let p = num(p_col)? / per_watt;
        let sample = EfficiencySample::new(p, num(eta_col)?)
            .map_err(|e| bad(format!("row {}: {e}", row + 2)))?;
        out.push(sample);
    }
    Ok(out)
}

/// A quantity with an optional unit; bare numbers are taken in `default_unit`.
fn quantity(
    s: &str,
    default_unit: &str,
    conv: fn(&str) -> Result<f64, String>,
) -> Result<f64, CliError> {
    let s = s.trim();
    let text = if s.parse::<f64>().is_ok() {
        format!("{s} {default_unit}")
    } else {
        s.to_string()
    };
    conv(&text).map_err(|m| CliError::Argument(format!("`{s}`: {m}")))
}

/// `steps` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    match steps {
        0 => Err(CliError::Argument("--steps must be at least 1".into())),
        1 => Ok(vec![a]),
        n => Ok((0..n)
            .map(|i| {
                if i + 1 == n {
                    b
                } else {
                    a + (b - a) * (i as f64 / (n - 1) as f64)
                }
            })
            .collect()),
    }
}

fn dispatch(cmd: &Command) -> Result<ReportBundle, CliError> {
    match cmd {
        Command::Simulate { scenario } => simulate(&load_scenario(scenario)?),
        Command::Fit { samples, length_cm } => fit(&load_samples(samples)?, *length_cm),
        Command::SweepPower {
            scenario,
            from,
            to,
            steps,
        } => {
            let s = load_scenario(scenario)?;
            let a = quantity(from, "W", scenario_file::power)?;
            let b = quantity(to, "W", scenario_file::power)?;
            sweep_power(&s, &linspace(a, b, *steps)?)
        }
        Command::SweepDistance {
            scenario,
            from,
            to,
            steps,
        } => {
            let s = load_scenario(scenario)?;
            let a = quantity(from, "km", scenario_file::distance)?;
            let b = quantity(to, "km", scenario_file::distance)?;
            distance(&s, &linspace(a, b, *steps)?)
        }
        Command::Attribute { scenario } => attribute(&load_scenario(scenario)?),
        Command::Calibrate {
            scenario,
            target_cts,
        } => {
            let target = quantity(target_cts, "cts/s", scenario_file::rate)?;
            calibrate(&load_scenario(scenario)?, target)
        }
    }
}

fn g(v: f64) -> String {
    format!("{v:.6e}")
}

pub fn simulate(s: &Scenario) -> Result<ReportBundle, CliError> {
    let state = propagate(s)?;
    let effs = s.stage_efficiencies();
    let total: f64 = effs.iter().product();
    let snr = estimate_snr(s, s.analysis.final_filter_bandwidth, fiber_length_km(s))?;

    let mut budget = Table::new(
        "budget",
        &[
            "index",
            "element",
            "kind",
            "signal_cts",
            "ratio",
            "band_noise_cts",
        ],
    );
    let mut summary = format!("scenario: {}\n\n", s.label);
    summary.push_str(&format!(
        "{:>3}  {:<14} {:<13} {:>14} {:>10} {:>14}\n",
        "#", "element", "kind", "signal cts/s", "ratio", "noise cts/s"
    ));
    for (i, sn) in state.snapshots.iter().enumerate() {
        let (kind, ratio) = match i.checked_sub(1) {
            Some(e) => (
                s.elements[e].kind.name(),
                state.element_ratio(e).unwrap_or(f64::NAN),
            ),
            None => ("source", 1.0),
        };
        budget.push(vec![
            i.to_string(),
            sn.label.clone(),
            kind.to_string(),
            report::num(sn.line.rate),
            report::num(ratio),
            report::num(sn.band_noise),
        ]);
        summary.push_str(&format!(
            "{:>3}  {:<14} {:<13} {:>14} {:>10.4} {:>14}\n",
            i,
            sn.label,
            kind,
            g(sn.line.rate),
            ratio,
            g(sn.band_noise)
        ));
    }

    let mut stages = Table::new("stages", &["element", "eta_external"]);
    summary.push('\n');
    for (k, idx) in s.stage_indices().iter().enumerate() {
        let label = &s.elements[*idx].label;
        stages.push(vec![label.clone(), report::num(effs[k])]);
        summary.push_str(&format!("efficiency {label}: {:.4}%\n", 100.0 * effs[k]));
    }
    summary.push_str(&format!(
        "total efficiency: {:.2}% ({})\n",
        100.0 * total,
        g(total)
    ));
    let r = &state.reading;
    summary.push_str(&format!(
        "detector: signal {} cts/s, noise {} cts/s, dark {} cts/s, total {} cts/s\n",
        g(r.signal),
        g(r.noise),
        g(r.dark),
        g(r.total())
    ));
    summary.push_str(&format!(
        "final filter {} Hz: signal {} cts/s, noise {} cts/s (floor {}), SNR {:.1}\n",
        g(snr.final_filter_bandwidth),
        g(snr.signal_rate),
        g(snr.noise_rate),
        g(snr.noise_floor),
        snr.snr
    ));

    let mut detector = Table::new(
        "detector",
        &[
            "signal_cts",
            "noise_cts",
            "dark_cts",
            "total_cts",
            "total_efficiency",
            "snr",
        ],
    );
    detector.push(vec![
        report::num(r.signal),
        report::num(r.noise),
        report::num(r.dark),
        report::num(r.total()),
        report::num(total),
        report::num(snr.snr),
    ]);
    Ok(ReportBundle::success(
        summary,
        vec![budget, stages, detector],
    ))
}

pub fn fit(samples: &[EfficiencySample], length_cm: f64) -> Result<ReportBundle, CliError> {
    let f = fit_efficiency_curve(samples, length_cm)?;
    let mut t = Table::new(
        "fit",
        &[
            "eta_max",
            "eta_nor",
            "peak_power_W",
            "rss",
            "n_samples",
            "degenerate",
        ],
    );
    t.push(vec![
        report::num(f.eta_max),
        report::num(f.eta_nor),
        report::num(f.peak_power(length_cm)),
        report::num(f.rss),
        f.n_samples.to_string(),
        f.degenerate.to_string(),
    ]);
    let summary = format!(
        "samples: {}\neta_max: {:.6}\neta_nor: {:.6} /W/cm^2\npeak power: {:.4} W\nrss: {}\n{}",
        f.n_samples,
        f.eta_max,
        f.eta_nor,
        f.peak_power(length_cm),
        g(f.rss),
        if f.degenerate {
            "warning: all samples are zero; the fit is degenerate\n"
        } else {
            ""
        }
    );
    Ok(ReportBundle::success(summary, vec![t]))
}

pub fn sweep_power(s: &Scenario, powers: &[f64]) -> Result<ReportBundle, CliError> {
    let rows = sweep_pump_power(s, powers)?;
    let mut t = Table::new(
        "sweep_power",
        &["pump_power_W", "eta_dfg", "eta_sfg", "eta_total"],
    );
    let mut summary = format!(
        "{:>12} {:>10} {:>10} {:>10}\n",
        "pump W", "DFG", "SFG", "total"
    );
    for r in &rows {
        t.push(vec![
            report::num(r.pump_power),
            report::num(r.eta_dfg),
            report::num(r.eta_sfg),
            report::num(r.eta_total),
        ]);
        summary.push_str(&format!(
            "{:>12.4} {:>10.5} {:>10.5} {:>10.5}\n",
            r.pump_power, r.eta_dfg, r.eta_sfg, r.eta_total
        ));
    }
    Ok(ReportBundle::success(summary, vec![t]))
}

pub fn distance(s: &Scenario, kms: &[f64]) -> Result<ReportBundle, CliError> {
    let rows = sweep_distance(s, kms)?;
    let mut t = Table::new(
        "sweep_distance",
        &["fiber_km", "signal_cts", "noise_cts", "snr"],
    );
    let mut summary = format!(
        "final filter {} Hz, noise floor {} cts/s\n{:>10} {:>14} {:>14} {:>10}\n",
        g(s.analysis.final_filter_bandwidth),
        g(s.analysis.noise_floor),
        "km",
        "signal cts/s",
        "noise cts/s",
        "SNR"
    );
    for r in &rows {
        t.push(vec![
            report::num(r.km),
            report::num(r.signal),
            report::num(r.noise),
            report::num(r.snr),
        ]);
        summary.push_str(&format!(
            "{:>10.3} {:>14} {:>14} {:>10.2}\n",
            r.km,
            g(r.signal),
            g(r.noise),
            r.snr
        ));
    }
    Ok(ReportBundle::success(summary, vec![t]))
}

pub fn attribute(s: &Scenario) -> Result<ReportBundle, CliError> {
    let a = noise_attribution(s)?;
    let mut t = Table::new("attribution", &["case", "pump1", "pump2", "counts"]);
    let cases = [
        ("both", "on", "on", a.both),
        ("stage2_only", "off", "on", a.stage2_only),
        ("stage1_only", "on", "off", a.stage1_only),
    ];
    let mut summary = "signal blocked\n".to_string();
    for (case, p1, p2, v) in cases {
        t.push(vec![case.into(), p1.into(), p2.into(), report::num(v)]);
        summary.push_str(&format!(
            "{case:<12} pump1 {p1:<3} pump2 {p2:<3} {} cts/s\n",
            g(v)
        ));
    }
    summary.push_str(&format!("dark: {} cts/s\n", g(a.dark)));
    summary.push_str(&format!(
        "stage-1 share of both-pump noise: {} cts/s\n",
        g(a.stage1_contribution)
    ));
    if let Some(r) = a.excess_ratio() {
        summary.push_str(&format!("both / second-only (dark removed): {r:.4}\n"));
    }
    if let Some(tr) = a.interstage_transmission {
        summary.push_str(&format!("inter-stage transmission: {tr:.4}\n"));
    }
    Ok(ReportBundle::success(summary, vec![t]))
}

pub fn calibrate(s: &Scenario, target: f64) -> Result<ReportBundle, CliError> {
    let k = calibrate_noise_density(target, s)?;
    let refs: Vec<String> = s
        .elements
        .iter()
        .filter_map(|e| match &e.kind {
            ElementKind::Stage(st) => Some(format!("{} at {} W", e.label, st.noise_ref_power)),
            _ => None,
        })
        .collect();
    let mut t = Table::new(
        "calibration",
        &["target_cts", "noise_density_cts_per_s_per_Hz"],
    );
    t.push(vec![report::num(target), report::num(k)]);
    let summary = format!(
        "target: {} cts/s (signal blocked)\nnoise density: {} cts/s/Hz per stage ({})\n",
        g(target),
        g(k),
        refs.join(", ")
    );
    Ok(ReportBundle::success(summary, vec![t]))
}
