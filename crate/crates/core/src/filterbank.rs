//! Uniform cosine-modulated analysis filter banks.
//!
//! A Kaiser-windowed sinc prototype with cutoff `π/(2N)` is modulated to the
//! odd multiples of `π/(2N)`, giving `N` FIR bandpass filters of equal length
//! and equal group delay `(L−1)/2` that tile `[0, fs/2]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{FilterState, TransferFunction};

/// Design parameters of a uniform bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankSpec {
    pub num_regions: usize,
    pub num_taps: usize,
    pub stopband_atten_db: f64,
    pub sample_rate_hz: f64,
}

impl BankSpec {
    pub fn new(num_regions: usize, num_taps: usize, stopband_atten_db: f64, sample_rate_hz: f64) -> Self {
        Self {
            num_regions,
            num_taps,
            stopband_atten_db,
            sample_rate_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_regions < 2 {
            return Err(Error::Config(format!(
                "a bank needs at least 2 regions, got {}",
                self.num_regions
            )));
        }
        if self.num_taps < 4 * self.num_regions {
            return Err(Error::Config(format!(
                "{} taps cannot realize {} bands (need at least {})",
                self.num_taps,
                self.num_regions,
                4 * self.num_regions
            )));
        }
        if !(self.stopband_atten_db.is_finite() && self.stopband_atten_db > 0.0) {
            return Err(Error::Config("stopband attenuation must be positive".into()));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        Ok(())
    }
}

/// `N` bandpass analyzers and their nominal band edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub spec: BankSpec,
    pub filters: Vec<TransferFunction>,
    pub band_edges: Vec<(f64, f64)>,
    /// Kaiser window shape parameter of the prototype.
    pub beta: f64,
}

/// Modified Bessel function of the first kind, order zero.
fn bessel_i0(x: f64) -> f64 {
    let y = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= y / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser's empirical β for a stopband attenuation in dB.
pub fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

fn kaiser_window(len: usize, beta: f64) -> Vec<f64> {
    let m = (len - 1) as f64;
    let denom = bessel_i0(beta);
    (0..len)
        .map(|n| {
            let r = 2.0 * n as f64 / m - 1.0;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

/// Lowpass prototype with cutoff `cutoff` rad/sample and unit DC gain.
fn prototype(len: usize, cutoff: f64, beta: f64) -> Vec<f64> {
    let mid = (len - 1) as f64 / 2.0;
    let win = kaiser_window(len, beta);
    let mut p: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 - mid;
            let ideal = if t == 0.0 {
                cutoff / PI
            } else {
                (cutoff * t).sin() / (PI * t)
            };
            ideal * win[n]
        })
        .collect();
    let dc: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= dc);
    p
}

fn modulate(p: &[f64], num_regions: usize, i: usize) -> Vec<f64> {
    let mid = (p.len() - 1) as f64 / 2.0;
    let phase = if i.is_multiple_of(2) { PI / 4.0 } else { -PI / 4.0 };
    let wc = PI / num_regions as f64 * (i as f64 + 0.5);
    p.iter()
        .enumerate()
        .map(|(n, pn)| 2.0 * pn * (wc * (n as f64 - mid) + phase).cos())
        .collect()
}

const MEASURE_GRID: usize = 4096;

fn design_with_beta(spec: &BankSpec, beta: f64) -> Result<FilterBank> {
    let n = spec.num_regions;
    let p = prototype(spec.num_taps, PI / (2.0 * n as f64), beta);
    let filters = (0..n)
        .map(|i| TransferFunction::fir(modulate(&p, n, i), spec.sample_rate_hz))
        .collect::<Result<Vec<_>>>()?;
    let width = spec.sample_rate_hz / (2.0 * n as f64);
    let band_edges = (0..n).map(|i| (i as f64 * width, (i + 1) as f64 * width)).collect();
    Ok(FilterBank {
        spec: *spec,
        filters,
        band_edges,
        beta,
    })
}

/// Designs the bank, widening the Kaiser window until the measured stopband
/// attenuation reaches the target.
pub fn design_bank(spec: &BankSpec) -> Result<FilterBank> {
    spec.validate()?;
    let n = spec.num_regions as f64;
    // transition must close before the far edge of the adjacent band
    let max_transition = 2.0 * PI / n;
    let achievable = 2.285 * (spec.num_taps - 1) as f64 * max_transition + 7.95;
    if spec.stopband_atten_db > achievable {
        return Err(Error::Design {
            target_db: spec.stopband_atten_db,
            achievable_db: achievable,
        });
    }
    let beta0 = kaiser_beta(spec.stopband_atten_db);
    let beta_max = kaiser_beta(achievable).max(beta0);
    let mut best: Option<(f64, FilterBank)> = None;
    for step in 0..=40 {
        let beta = (beta0 * (1.0 + 0.025 * step as f64)).min(beta_max);
        let bank = design_with_beta(spec, beta)?;
        let measured = bank.measured_attenuation_db();
        if measured >= spec.stopband_atten_db {
            return Ok(bank);
        }
        if best.as_ref().is_none_or(|(m, _)| measured > *m) {
            best = Some((measured, bank));
        }
        if beta >= beta_max || beta0 == 0.0 {
            break;
        }
    }
    Err(Error::Design {
        target_db: spec.stopband_atten_db,
        achievable_db: best.map_or(0.0, |(m, _)| m),
    })
}

impl FilterBank {
    /// Single allpass region covering the whole spectrum (no band splitting).
    pub fn fullband(sample_rate_hz: f64) -> Self {
        Self {
            spec: BankSpec::new(1, 1, 0.0, sample_rate_hz),
            filters: vec![TransferFunction::identity(sample_rate_hz)],
            band_edges: vec![(0.0, sample_rate_hz / 2.0)],
            beta: 0.0,
        }
    }

    pub fn num_regions(&self) -> usize {
        self.filters.len()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.spec.sample_rate_hz
    }

    pub fn band_center(&self, i: usize) -> f64 {
        let (lo, hi) = self.band_edges[i];
        0.5 * (lo + hi)
    }

    /// Group delay of every analyzer, in samples.
    pub fn group_delay(&self) -> f64 {
        (self.filters[0].b().len() - 1) as f64 / 2.0
    }

    /// Region index containing `f_hz`; boundaries belong to the upper band.
    pub fn band_of_frequency(&self, f_hz: f64) -> Result<usize> {
        let nyq = self.sample_rate_hz() / 2.0;
        if !(0.0..nyq).contains(&f_hz) {
            return Err(Error::FrequencyOutOfRange {
                freq_hz: f_hz,
                nyquist_hz: nyq,
            });
        }
        let width = nyq / self.num_regions() as f64;
        Ok(((f_hz / width).floor() as usize).min(self.num_regions() - 1))
    }

    /// Fresh per-band filter states, one per analyzer.
    pub fn analyzers(&self) -> Vec<FilterState> {
        self.filters.iter().map(FilterState::new).collect()
    }

    /// Splits `x` into `N` full-rate subband signals.
    pub fn analyze(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut states = self.analyzers();
        let mut out = vec![Vec::with_capacity(x.len()); self.num_regions()];
        for &v in x {
            crate::error::check_finite(v)?;
            for (st, o) in states.iter_mut().zip(out.iter_mut()) {
                o.push(st.step_unchecked(v));
            }
        }
        Ok(out)
    }

    /// Worst-case attenuation in dB over each analyzer's stopband, i.e. every
    /// frequency at least 1.5 band widths away from the analyzer's center.
    pub fn measured_attenuation_db(&self) -> f64 {
        let n = self.num_regions();
        if n < 2 {
            return 0.0;
        }
        let nyq = self.sample_rate_hz() / 2.0;
        let width = nyq / n as f64;
        let mut worst = 0.0_f64;
        for (i, h) in self.filters.iter().enumerate() {
            let center = self.band_center(i);
            for g in 0..=MEASURE_GRID {
                let f = nyq * g as f64 / MEASURE_GRID as f64;
                if (f - center).abs() >= 1.5 * width - 1e-9 {
                    worst = worst.max(h.response_at(f).norm());
                }
            }
        }
        -20.0 * worst.max(1e-300).log10()
    }

    /// Largest |gain| deviation in dB over the central `fraction` of each band.
    pub fn passband_deviation_db(&self, fraction: f64) -> f64 {
        let mut worst = 0.0_f64;
        for (i, h) in self.filters.iter().enumerate() {
            let (lo, hi) = self.band_edges[i];
            let c = 0.5 * (lo + hi);
            let half = 0.5 * fraction * (hi - lo);
            for g in 0..=256 {
                let f = c - half + 2.0 * half * g as f64 / 256.0;
                worst = worst.max((20.0 * h.response_at(f).norm().log10()).abs());
            }
        }
        worst
    }

    /// |H_i| in dB at the center of band `j`.
    pub fn cross_gain_db(&self, i: usize, j: usize) -> f64 {
        20.0 * self.filters[i].response_at(self.band_center(j)).norm().log10()
    }
}
