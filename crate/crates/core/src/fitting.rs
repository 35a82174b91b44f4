//! Least-squares fit of `η(P) = η_max · sin²(L·√(P·η_nor))` to measured
//! pump-power scans.
//!
//! The search runs a coarse grid (logarithmic in `η_nor`, linear in `η_max`)
//! restricted to the first half period at the largest sampled power, then
//! refines every local minimum of the grid with coordinate descent: the
//! `η_max` step is the closed-form linear least-squares solution and the
//! `η_nor` step is a bisection on the analytic derivative of the profiled
//! residual.

use std::cmp::Ordering;
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencySample {
    /// W
    pub pump_power: f64,
    pub eta_measured: f64,
}

impl EfficiencySample {
    pub fn new(pump_power: f64, eta_measured: f64) -> Result<Self> {
        if !(pump_power >= 0.0 && pump_power.is_finite()) {
            return Err(Error::Domain(format!(
                "pump power must be >= 0, got {pump_power}"
            )));
        }
        if !(0.0..=1.0).contains(&eta_measured) {
            return Err(Error::Domain(format!(
                "efficiency must be in [0, 1], got {eta_measured}"
            )));
        }
        Ok(EfficiencySample {
            pump_power,
            eta_measured,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub eta_max: f64,
    /// W⁻¹·cm⁻²
    pub eta_nor: f64,
    pub rss: f64,
    pub n_samples: usize,
    /// Set when every sample is zero and the curve is unidentifiable.
    pub degenerate: bool,
}

impl FitResult {
    pub fn efficiency_at(&self, length_cm: f64, pump_power: f64) -> f64 {
        model(self.eta_max, self.eta_nor, length_cm, pump_power)
    }

    /// Pump power of the first efficiency maximum.
    pub fn peak_power(&self, length_cm: f64) -> f64 {
        (PI / (2.0 * length_cm)).powi(2) / self.eta_nor
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub eta_nor_min: f64,
    pub eta_nor_max: f64,
    pub eta_nor_points: usize,
    pub eta_max_points: usize,
    /// Relative parameter tolerance of the refinement.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            eta_nor_min: 1e-4,
            eta_nor_max: 1e2,
            eta_nor_points: 200,
            eta_max_points: 101,
            tolerance: 1e-12,
            max_iterations: 50,
        }
    }
}

impl FitOptions {
    /// Range scaled by `1/k`, matching powers scaled by `k`.
    pub fn rescaled(&self, k: f64) -> Self {
        FitOptions {
            eta_nor_min: self.eta_nor_min / k,
            eta_nor_max: self.eta_nor_max / k,
            ..self.clone()
        }
    }
}

pub fn model(eta_max: f64, eta_nor: f64, length_cm: f64, pump_power: f64) -> f64 {
    eta_max * (length_cm * (pump_power * eta_nor).sqrt()).sin().powi(2)
}

pub fn predict_curve(fit: &FitResult, length_cm: f64, powers: &[f64]) -> Vec<f64> {
    powers
        .iter()
        .map(|p| fit.efficiency_at(length_cm, *p))
        .collect()
}

pub fn fit_efficiency_curve(samples: &[EfficiencySample], length_cm: f64) -> Result<FitResult> {
    fit_efficiency_curve_with(samples, length_cm, &FitOptions::default())
}

struct Problem {
    // sorted (power, eta) so that sums do not depend on input order
    samples: Vec<(f64, f64)>,
    length: f64,
}

impl Problem {
    fn shapes(&self, k: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples
            .iter()
            .map(move |(p, eta)| ((self.length * (p * k).sqrt()).sin().powi(2), *eta))
    }

    fn rss(&self, a: f64, k: f64) -> f64 {
        self.shapes(k).map(|(s, eta)| (eta - a * s).powi(2)).sum()
    }

    /// Closed-form best amplitude for fixed `k`, clamped to [0, 1].
    fn best_amplitude(&self, k: f64) -> f64 {
        let (sy, ss) = self
            .shapes(k)
            .fold((0.0, 0.0), |(sy, ss), (s, eta)| (sy + s * eta, ss + s * s));
        if ss == 0.0 {
            return 0.0;
        }
        (sy / ss).clamp(0.0, 1.0)
    }

    /// d rss / dk at fixed amplitude `a`.
    fn slope(&self, a: f64, k: f64) -> f64 {
        self.samples
            .iter()
            .map(|(p, eta)| {
                let theta = self.length * (p * k).sqrt();
                let s = theta.sin().powi(2);
                let ds = (2.0 * theta).sin() * theta / (2.0 * k);
                -2.0 * a * (eta - a * s) * ds
            })
            .sum()
    }

    /// Minimizes the profiled residual over `k` within `[lo, hi]`.
    fn minimize_k(&self, lo: f64, hi: f64, start: f64) -> f64 {
        let profiled = |k: f64| self.rss(self.best_amplitude(k), k);
        let dprofile = |k: f64| self.slope(self.best_amplitude(k), k);
        let mut best = start;
        let mut best_rss = profiled(start);
        for k in [lo, hi] {
            let r = profiled(k);
            if r < best_rss {
                best = k;
                best_rss = r;
            }
        }
        // bisect each half of the bracket where the slope changes sign
        for (mut a, mut b) in [(lo, start), (start, hi)] {
            if !(b > a) {
                continue;
            }
            let (ga, gb) = (dprofile(a), dprofile(b));
            if !(ga < 0.0 && gb > 0.0) {
                continue;
            }
            for _ in 0..200 {
                let mid = (a * b).sqrt();
                if mid <= a || mid >= b {
                    break;
                }
                if dprofile(mid) < 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            for k in [a, b] {
                let r = profiled(k);
                if r < best_rss {
                    best = k;
                    best_rss = r;
                }
            }
        }
        best
    }
}

fn better(a: (f64, f64, f64), b: (f64, f64, f64)) -> bool {
    // (rss, eta_nor, eta_max); lexicographic with exact comparisons
    match a.0.total_cmp(&b.0) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => match a.1.total_cmp(&b.1) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => a.2 < b.2,
        },
    }
}

pub fn fit_efficiency_curve_with(
    samples: &[EfficiencySample],
    length_cm: f64,
    opts: &FitOptions,
) -> Result<FitResult> {
    if !(length_cm > 0.0 && length_cm.is_finite()) {
        return Err(Error::Domain(format!(
            "crystal length must be > 0, got {length_cm}"
        )));
    }
    if samples.len() < 3 {
        return Err(Error::Precondition(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    for s in samples {
        EfficiencySample::new(s.pump_power, s.eta_measured)?;
    }
    let mut sorted: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.pump_power, s.eta_measured))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut nonzero: Vec<f64> = sorted.iter().map(|s| s.0).filter(|p| *p > 0.0).collect();
    nonzero.dedup();
    if nonzero.len() < 2 {
        return Err(Error::Precondition(
            "need at least 2 distinct non-zero pump powers".into(),
        ));
    }
    if opts.eta_nor_points < 2 || opts.eta_max_points < 2 {
        return Err(Error::Precondition(
            "fit grid needs at least 2 points per axis".into(),
        ));
    }
    let p_max = *nonzero.last().expect("non-empty");
    let lo = opts.eta_nor_min;
    // first half period at the largest power: L·√(P_max·η_nor) ≤ π
    let hi = opts.eta_nor_max.min((PI / length_cm).powi(2) / p_max);
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Precondition(format!(
            "empty eta_nor search range [{lo}, {hi}]"
        )));
    }

    let n = samples.len();
    if sorted.iter().all(|s| s.1 == 0.0) {
        return Ok(FitResult {
            eta_max: 0.0,
            eta_nor: lo,
            rss: 0.0,
            n_samples: n,
            degenerate: true,
        });
    }

    let problem = Problem {
        samples: sorted,
        length: length_cm,
    };
    let ratio = hi / lo;
    let last = (opts.eta_nor_points - 1) as f64;
    let ks: Vec<f64> = (0..opts.eta_nor_points)
        .map(|j| {
            if j + 1 == opts.eta_nor_points {
                hi
            } else {
                lo * ratio.powf(j as f64 / last)
            }
        })
        .collect();
    let amax_last = (opts.eta_max_points - 1) as f64;

    // profile[j] = best (rss, eta_nor, eta_max) over the amplitude grid and
    // the closed-form amplitude, so the coarse profile brackets the true one
    let profile: Vec<(f64, f64, f64)> = ks
        .iter()
        .map(|&k| {
            let a_star = problem.best_amplitude(k);
            let mut best = (problem.rss(a_star, k), k, a_star);
            for m in 0..opts.eta_max_points {
                let a = m as f64 / amax_last;
                let cand = (problem.rss(a, k), k, a);
                if better(cand, best) {
                    best = cand;
                }
            }
            best
        })
        .collect();

    let mut best = profile
        .iter()
        .copied()
        .reduce(|x, y| if better(y, x) { y } else { x })
        .expect("non-empty grid");

    let minima: Vec<usize> = (0..profile.len())
        .filter(|&j| {
            let left = j == 0 || profile[j].0 <= profile[j - 1].0;
            let right = j + 1 == profile.len() || profile[j].0 <= profile[j + 1].0;
            left && right
        })
        .collect();

    for j in minima {
        let bracket_lo = ks[j.saturating_sub(1)];
        let bracket_hi = ks[(j + 1).min(ks.len() - 1)];
        let mut k = ks[j];
        let mut a = profile[j].2;
        for _ in 0..opts.max_iterations {
            let a_new = problem.best_amplitude(k);
            let k_new = problem.minimize_k(bracket_lo, bracket_hi, k);
            let a_new2 = problem.best_amplitude(k_new);
            let dk = ((k_new - k) / k).abs();
            let da = (a_new2 - a).abs() / a_new.abs().max(f64::MIN_POSITIVE);
            k = k_new;
            a = a_new2;
            if dk <= opts.tolerance && da <= opts.tolerance {
                break;
            }
        }
        let cand = (problem.rss(a, k), k, a);
        if better(cand, best) {
            best = cand;
        }
    }

    Ok(FitResult {
        eta_max: best.2,
        eta_nor: best.1,
        rss: best.0,
        n_samples: n,
        degenerate: false,
    })
}
