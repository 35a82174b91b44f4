//! Frequency-domain primitives.
//!
//! Everything inside the engine is expressed in hertz. A [`Spectrum`] holds a
//! photon-flux density (counts·s⁻¹·Hz⁻¹) sampled on a uniform
//! [`FrequencyGrid`]; narrowband signals travel separately as a
//! [`SpectralLine`] and are only deposited onto a grid when needed.

use crate::error::{domain, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

// c expressed in nm·Hz; exactly representable as an f64.
const C_NM_HZ: f64 = 299_792_458e9;

/// Converts a vacuum wavelength in nanometres to a frequency in hertz.
pub fn wavelength_to_frequency(lambda_nm: f64) -> Result<f64> {
    if !(lambda_nm > 0.0) || !lambda_nm.is_finite() {
        return domain(format!("wavelength must be positive, got {lambda_nm} nm"));
    }
    Ok(C_NM_HZ / lambda_nm)
}

/// Converts a frequency in hertz to a vacuum wavelength in nanometres.
pub fn frequency_to_wavelength(freq_hz: f64) -> Result<f64> {
    if !(freq_hz > 0.0) || !freq_hz.is_finite() {
        return domain(format!("frequency must be positive, got {freq_hz} Hz"));
    }
    Ok(C_NM_HZ / freq_hz)
}

/// A closed frequency interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    lo: f64,
    hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return domain(format!("band requires 0 < lo < hi, got [{lo}, {hi}]"));
        }
        Ok(Band { lo, hi })
    }

    /// Band between two wavelengths given in nm, in either order.
    pub fn from_wavelengths(a_nm: f64, b_nm: f64) -> Result<Self> {
        let fa = wavelength_to_frequency(a_nm)?;
        let fb = wavelength_to_frequency(b_nm)?;
        Band::new(fa.min(fb), fa.max(fb))
    }

    /// Band of total width `width` centred on `center`.
    pub fn centered(center: f64, width: f64) -> Result<Self> {
        Band::new(center - 0.5 * width, center + 0.5 * width)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && f <= self.hi
    }

    pub fn overlaps(&self, other: &Band) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }
}

/// Uniform frequency axis of `n_bins` equal-width bins spanning `[f_min, f_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    f_min: f64,
    f_max: f64,
    n_bins: usize,
}

impl FrequencyGrid {
    pub fn new(f_min: f64, f_max: f64, n_bins: usize) -> Result<Self> {
        if !(f_min > 0.0 && f_max > f_min && f_max.is_finite()) {
            return domain(format!(
                "grid requires 0 < f_min < f_max, got [{f_min}, {f_max}]"
            ));
        }
        if n_bins < 2 {
            return domain(format!("grid needs at least 2 bins, got {n_bins}"));
        }
        Ok(FrequencyGrid {
            f_min,
            f_max,
            n_bins,
        })
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn bin_width(&self) -> f64 {
        (self.f_max - self.f_min) / self.n_bins as f64
    }

    pub fn span(&self) -> Band {
        Band {
            lo: self.f_min,
            hi: self.f_max,
        }
    }

    /// Centre frequency of bin `i`.
    pub fn center(&self, i: usize) -> f64 {
        self.f_min + (i as f64 + 0.5) * self.bin_width()
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.f_min && f <= self.f_max
    }

    /// Same span with twice as many bins.
    pub fn refined(&self) -> Self {
        FrequencyGrid {
            n_bins: self.n_bins * 2,
            ..*self
        }
    }

    /// Position of `f` in bin units, `0.0` at `f_min` and `n_bins` at `f_max`.
    fn position(&self, f: f64) -> f64 {
        (f - self.f_min) / self.bin_width()
    }

    /// Bins overlapping `[lo, hi]` together with the overlapped width in Hz.
    pub(crate) fn overlaps(&self, lo: f64, hi: f64) -> Vec<(usize, f64)> {
        let lo = lo.max(self.f_min);
        let hi = hi.min(self.f_max);
        if hi <= lo {
            return Vec::new();
        }
        let w = self.bin_width();
        let first = (self.position(lo).floor().max(0.0) as usize).min(self.n_bins - 1);
        let last = (self.position(hi).ceil() as usize).min(self.n_bins);
        (first..last)
            .filter_map(|i| {
                let b_lo = self.f_min + i as f64 * w;
                let b_hi = b_lo + w;
                let len = hi.min(b_hi) - lo.max(b_lo);
                (len > 0.0).then_some((i, len))
            })
            .collect()
    }

    /// Fraction of each bin covered by `band`, for every bin of the grid.
    pub(crate) fn coverage(&self, band: &Band) -> Vec<f64> {
        let mut cov = vec![0.0; self.n_bins];
        let w = self.bin_width();
        for (i, len) in self.overlaps(band.lo, band.hi) {
            cov[i] = (len / w).min(1.0);
        }
        cov
    }
}

/// Narrowband signal: centre frequency, linewidth and photon rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    pub center: f64,
    pub fwhm: f64,
    pub rate: f64,
}

impl SpectralLine {
    pub fn new(center: f64, fwhm: f64, rate: f64) -> Result<Self> {
        let line = SpectralLine { center, fwhm, rate };
        line.validate()?;
        Ok(line)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center > 0.0 && self.center.is_finite()) {
            return domain(format!("line centre must be positive, got {}", self.center));
        }
        if !(self.fwhm > 0.0 && self.fwhm.is_finite()) {
            return domain(format!("linewidth must be positive, got {}", self.fwhm));
        }
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return domain(format!("photon rate must be >= 0, got {}", self.rate));
        }
        Ok(())
    }

    pub fn with_rate(self, rate: f64) -> Self {
        SpectralLine { rate, ..self }
    }
}

/// Photon-flux density sampled on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: FrequencyGrid,
    density: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: FrequencyGrid, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.n_bins() {
            return Err(Error::Structural(format!(
                "density has {} values for a {}-bin grid",
                density.len(),
                grid.n_bins()
            )));
        }
        if let Some((i, d)) = density
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d >= 0.0))
        {
            return domain(format!(
                "density at bin {i} is {d}; must be finite and >= 0"
            ));
        }
        Ok(Spectrum { grid, density })
    }

    pub fn zeros(grid: FrequencyGrid) -> Self {
        Spectrum {
            grid,
            density: vec![0.0; grid.n_bins()],
        }
    }

    /// Constant density over the whole grid.
    pub fn flat(grid: FrequencyGrid, density: f64) -> Result<Self> {
        Spectrum::new(grid, vec![density; grid.n_bins()])
    }

    /// Caller guarantees length and non-negativity.
    pub(crate) fn from_raw(grid: FrequencyGrid, density: Vec<f64>) -> Self {
        debug_assert_eq!(density.len(), grid.n_bins());
        debug_assert!(density.iter().all(|d| d.is_finite() && *d >= 0.0));
        Spectrum { grid, density }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn is_zero(&self) -> bool {
        self.density.iter().all(|d| *d == 0.0)
    }

    /// Photon rate in `band`: whole bins whose centres lie inside are summed.
    pub fn integrate_band(&self, band: &Band) -> f64 {
        let w = self.grid.bin_width();
        let g = &self.grid;
        let start = ((band.lo - g.f_min) / w - 0.5).ceil().max(0.0) as usize;
        let mut sum = 0.0;
        for i in start..g.n_bins {
            let c = g.center(i);
            if c > band.hi {
                break;
            }
            if c >= band.lo {
                sum += self.density[i];
            }
        }
        sum * w
    }

    /// Exact integral of the piecewise-constant density over `[lo, hi]`,
    /// counting partially covered bins by their overlap. Used for windows
    /// narrower than a bin.
    pub fn integrate_window(&self, lo: f64, hi: f64) -> f64 {
        self.grid
            .overlaps(lo, hi)
            .into_iter()
            .map(|(i, len)| self.density[i] * len)
            .sum()
    }

    /// Photon rate over the whole grid.
    pub fn total(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.bin_width()
    }

    pub fn scale(&self, k: f64) -> Result<Spectrum> {
        if !(k >= 0.0 && k.is_finite()) {
            return domain(format!("scale factor must be >= 0, got {k}"));
        }
        Ok(Spectrum::from_raw(
            self.grid,
            self.density.iter().map(|d| d * k).collect(),
        ))
    }

    pub fn add(&self, other: &Spectrum) -> Result<Spectrum> {
        self.check_grid(other)?;
        Ok(Spectrum::from_raw(
            self.grid,
            self.density
                .iter()
                .zip(&other.density)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub(crate) fn check_grid(&self, other: &Spectrum) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Structural(format!(
                "grid mismatch: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Multiplies bin `i` by `factor(i)`. Factors must be in `[0, ∞)`.
    pub(crate) fn map_bins(&self, mut factor: impl FnMut(usize) -> f64) -> Spectrum {
        let density = self
            .density
            .iter()
            .enumerate()
            .map(|(i, d)| d * factor(i))
            .collect();
        Spectrum::from_raw(self.grid, density)
    }

    /// Moves the spectrum by `offset` Hz, splitting each bin between the two
    /// target bins it straddles. Content pushed off the grid is dropped.
    pub(crate) fn shifted(&self, offset: f64) -> Spectrum {
        let n = self.grid.n_bins as isize;
        let t = offset / self.grid.bin_width();
        let whole = t.floor();
        let frac = t - whole;
        let whole = whole as isize;
        let mut out = vec![0.0; self.grid.n_bins];
        for (i, d) in self.density.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            let j = i as isize + whole;
            if (0..n).contains(&j) {
                out[j as usize] += (1.0 - frac) * d;
            }
            if frac > 0.0 && (0..n).contains(&(j + 1)) {
                out[(j + 1) as usize] += frac * d;
            }
        }
        Spectrum::from_raw(self.grid, out)
    }

    /// Convolution with a unit-area top-hat of width `width` Hz. Widths of a
    /// bin or less leave the spectrum unchanged.
    pub(crate) fn boxcar(&self, width: f64) -> Spectrum {
        let w_bins = width / self.grid.bin_width();
        if w_bins <= 1.0 {
            return self.clone();
        }
        let n = self.grid.n_bins;
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for d in &self.density {
            acc += d;
            prefix.push(acc);
        }
        // cumulative integral (in bin units) of the piecewise-constant density
        let cumulative = |x: f64| -> f64 {
            if x <= 0.0 {
                return 0.0;
            }
            if x >= n as f64 {
                return prefix[n];
            }
            let k = x.floor() as usize;
            prefix[k] + (x - k as f64) * self.density[k]
        };
        let half = 0.5 * w_bins;
        let out = (0..n)
            .map(|i| {
                let c = i as f64 + 0.5;
                ((cumulative(c + half) - cumulative(c - half)) / w_bins).max(0.0)
            })
            .collect();
        Spectrum::from_raw(self.grid, out)
    }
}

/// Deposits a line as a top-hat of width `max(fwhm, one bin)` centred on the
/// line. Portions falling off the grid edge are folded back so the full rate
/// is conserved.
pub fn line_to_spectrum(line: &SpectralLine, grid: &FrequencyGrid) -> Result<Spectrum> {
    line.validate()?;
    if !grid.contains(line.center) {
        return Err(Error::OutOfRange(format!(
            "line centre {} Hz outside grid [{}, {}]",
            line.center,
            grid.f_min(),
            grid.f_max()
        )));
    }
    let mut density = vec![0.0; grid.n_bins()];
    if line.rate > 0.0 {
        let width = line.fwhm.max(grid.bin_width());
        let pieces = grid.overlaps(line.center - 0.5 * width, line.center + 0.5 * width);
        let covered: f64 = pieces.iter().map(|(_, len)| len).sum();
        let w = grid.bin_width();
        for (i, len) in pieces {
            density[i] += line.rate * len / (covered * w);
        }
    }
    Ok(Spectrum::from_raw(*grid, density))
}
