//! Spectral estimates and frequency-response comparisons used to judge a run.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::TransferFunction;

/// Attenuation figures are clamped to ±this many dB.
pub const ATTENUATION_CAP_DB: f64 = 120.0;

/// Magnitudes below this are treated as zero when taking logs.
const MAG_FLOOR: f64 = 1e-15;

/// `n` evenly spaced frequencies covering the central `fraction` of `band`.
pub fn central_grid(band: (f64, f64), fraction: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = band;
    let margin = 0.5 * (1.0 - fraction) * (hi - lo);
    let (a, b) = (lo + margin, hi - margin);
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs_hz: Vec<f64>,
    /// power per Hz
    pub density: Vec<f64>,
    pub segment_len: usize,
    pub overlap: f64,
    pub window: String,
}

impl PsdEstimate {
    pub fn bin_width(&self) -> f64 {
        self.freqs_hz.get(1).copied().unwrap_or(0.0)
    }

    /// Power integrated over `[lo, hi)`; the Nyquist bin counts when `hi` is
    /// the Nyquist frequency.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        let df = self.bin_width();
        let nyq = *self.freqs_hz.last().unwrap_or(&0.0);
        self.freqs_hz
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| (**f >= lo && **f < hi) || (**f == nyq && hi >= nyq))
            .map(|(_, d)| d * df)
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }
}

/// Averaged modified periodogram with a Hann window.
pub fn welch_psd(x: &[f64], fs: f64, segment_len: usize, overlap: f64) -> Result<PsdEstimate> {
    if segment_len < 8 {
        return Err(Error::Config(format!("segment length {segment_len} below 8")));
    }
    if x.len() < segment_len {
        return Err(Error::TooShort {
            len: x.len(),
            needed: segment_len,
        });
    }
    if !(0.0..=0.9).contains(&overlap) {
        return Err(Error::Config(format!("overlap {overlap} not in [0, 0.9]")));
    }
    // periodic Hann
    let window: Vec<f64> = (0..segment_len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / segment_len as f64).cos())
        .collect();
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let step = ((segment_len as f64 * (1.0 - overlap)).round() as usize).max(1);
    let nbins = segment_len / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let mut acc = vec![0.0; nbins];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_len];
    let mut segments = 0usize;
    let mut start = 0;
    while start + segment_len <= x.len() {
        for (b, (xv, w)) in buf.iter_mut().zip(x[start..start + segment_len].iter().zip(&window)) {
            *b = Complex64::new(xv * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let scale = 1.0 / (fs * win_power * segments as f64);
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let one_sided = if k == 0 || (segment_len.is_multiple_of(2) && k == nbins - 1) {
                1.0
            } else {
                2.0
            };
            p * scale * one_sided
        })
        .collect();
    Ok(PsdEstimate {
        freqs_hz: (0..nbins).map(|k| k as f64 * fs / segment_len as f64).collect(),
        density,
        segment_len,
        overlap,
        window: "hann".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandAttenuation {
    pub band: usize,
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub power_off: f64,
    pub power_on: f64,
    pub attenuation_db: f64,
}

fn ratio_db(off: f64, on: f64) -> f64 {
    let db = match (off > 0.0, on > 0.0) {
        (false, false) => 0.0,
        (true, false) => ATTENUATION_CAP_DB,
        (false, true) => -ATTENUATION_CAP_DB,
        (true, true) => 10.0 * (off.log10() - on.log10()),
    };
    db.clamp(-ATTENUATION_CAP_DB, ATTENUATION_CAP_DB)
}

/// Per-band in-band power reduction of `e_on` relative to `e_off`.
pub fn attenuation_report(
    e_off: &[f64],
    e_on: &[f64],
    band_edges: &[(f64, f64)],
    fs: f64,
    segment_len: usize,
) -> Result<Vec<BandAttenuation>> {
    if e_off.len() != e_on.len() {
        return Err(Error::Dimension {
            expected: e_off.len(),
            got: e_on.len(),
        });
    }
    let seg = segment_len.min(e_off.len());
    let off = welch_psd(e_off, fs, seg, 0.5)?;
    let on = welch_psd(e_on, fs, seg, 0.5)?;
    Ok(band_edges
        .iter()
        .enumerate()
        .map(|(band, &(lo, hi))| {
            let power_off = off.band_power(lo, hi);
            let power_on = on.band_power(lo, hi);
            BandAttenuation {
                band,
                lo_hz: lo,
                hi_hz: hi,
                power_off,
                power_on,
                attenuation_db: ratio_db(power_off, power_on),
            }
        })
        .collect())
}

/// Worst-case disagreement of two frequency responses over a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrfDiscrepancy {
    pub max_mag_db: f64,
    pub max_phase_deg: f64,
    /// `max |H_a − H_b|`
    pub max_abs_err: f64,
}

pub const FRF_GRID_POINTS: usize = 64;
pub const FRF_BAND_FRACTION: f64 = 0.8;

/// Compares two systems on a 64-point grid over the central 80 % of `band`.
pub fn frf_compare(tf_a: &TransferFunction, tf_b: &TransferFunction, band: (f64, f64)) -> Result<FrfDiscrepancy> {
    if tf_a.sample_rate_hz() != tf_b.sample_rate_hz() {
        return Err(Error::Config("frf_compare needs a common sample rate".into()));
    }
    let grid = central_grid(band, FRF_BAND_FRACTION, FRF_GRID_POINTS);
    let ha = tf_a.freq_response(&grid)?;
    let hb = tf_b.freq_response(&grid)?;
    let mut out = FrfDiscrepancy {
        max_mag_db: 0.0,
        max_phase_deg: 0.0,
        max_abs_err: 0.0,
    };
    for (pa, pb) in ha.iter().zip(&hb) {
        let (a, b) = (pa.value, pb.value);
        let mag = 20.0 * (a.norm().max(MAG_FLOOR).log10() - b.norm().max(MAG_FLOOR).log10());
        let phase = (a * b.conj()).arg().to_degrees();
        out.max_mag_db = out.max_mag_db.max(mag.abs());
        out.max_phase_deg = out.max_phase_deg.max(phase.abs());
        out.max_abs_err = out.max_abs_err.max((a - b).norm());
    }
    Ok(out)
}

/// Least-squares FIR approximation of the zero-error controller
/// `W* = −P / (S_D · R [· H_i])` over a band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalControllerReference {
    pub band: (f64, f64),
    pub freqs_hz: Vec<f64>,
    #[serde(skip)]
    pub target: Vec<Complex64>,
    /// taps at lags `delay … delay + n_w − 1`
    pub fir: Vec<f64>,
    pub delay: usize,
    /// RMS relative fit error `‖fit − W*‖ / ‖W*‖` on the grid
    pub residual: f64,
    /// false when `|S_D R|` drops below the gain floor somewhere in band
    pub defined: bool,
}

pub const OPTIMAL_GRID_POINTS: usize = 128;
pub const OPTIMAL_GAIN_FLOOR: f64 = 1e-8;

impl OptimalControllerReference {
    /// The fitted controller as a transfer function (including its delay).
    pub fn fitted_tf(&self, fs: f64) -> Result<TransferFunction> {
        let mut b = vec![0.0; self.delay];
        b.extend_from_slice(&self.fir);
        TransferFunction::fir(b, fs)
    }
}

/// Builds the optimal-controller reference for one band. When `analyzer` is
/// given the controller is assumed to act on `H_i a` and the target is divided
/// by `H_i` as well.
pub fn optimal_controller(
    primary: &TransferFunction,
    sensor: &TransferFunction,
    plant: &TransferFunction,
    analyzer: Option<&TransferFunction>,
    band: (f64, f64),
    taps: usize,
) -> Result<OptimalControllerReference> {
    if taps == 0 {
        return Err(Error::Config("controller needs at least one tap".into()));
    }
    let fs = primary.sample_rate_hz();
    let freqs = central_grid(band, FRF_BAND_FRACTION, OPTIMAL_GRID_POINTS);
    let mut defined = true;
    let target: Vec<Complex64> = freqs
        .iter()
        .map(|&f| {
            let mut den = sensor.response_at(f) * plant.response_at(f);
            if let Some(h) = analyzer {
                den *= h.response_at(f);
            }
            if den.norm() < OPTIMAL_GAIN_FLOOR {
                defined = false;
                return Complex64::new(0.0, 0.0);
            }
            -primary.response_at(f) / den
        })
        .collect();
    let norm_t = target.iter().map(|t| t.norm_sqr()).sum::<f64>().sqrt();
    if !defined || norm_t == 0.0 {
        return Ok(OptimalControllerReference {
            band,
            freqs_hz: freqs,
            target,
            fir: vec![0.0; taps],
            delay: 0,
            residual: 0.0,
            defined,
        });
    }

    let g = freqs.len();
    let mut rhs = DVector::<f64>::zeros(2 * g);
    for (i, t) in target.iter().enumerate() {
        rhs[i] = t.re;
        rhs[g + i] = t.im;
    }
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for delay in 0..=taps / 2 {
        let mut m = DMatrix::<f64>::zeros(2 * g, taps);
        for (i, &f) in freqs.iter().enumerate() {
            let omega = 2.0 * PI * f / fs;
            for j in 0..taps {
                let z = Complex64::from_polar(1.0, -omega * (j + delay) as f64);
                m[(i, j)] = z.re;
                m[(g + i, j)] = z.im;
            }
        }
        let w = m
            .clone()
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Config(format!("least-squares fit failed: {e}")))?;
        let resid = (&m * &w - &rhs).norm() / norm_t;
        if best.as_ref().is_none_or(|(r, _, _)| resid < *r) {
            best = Some((resid, delay, w.iter().copied().collect()));
        }
    }
    let (residual, delay, fir) = best.expect("at least one delay tried");
    Ok(OptimalControllerReference {
        band,
        freqs_hz: freqs,
        target,
        fir,
        delay,
        residual,
        defined,
    })
}

/// A controller already acting in the loop: `u = (Σ taps_j q^{-j}) · analyzer · a`
/// through `plant`.
#[derive(Debug, Clone, Copy)]
pub struct LoopContribution<'a> {
    pub plant: &'a TransferFunction,
    pub analyzer: Option<&'a TransferFunction>,
    pub taps: &'a [f64],
}

/// Mean-square optimal FIR for one region, given everything else in the loop.
#[derive(Debug, Clone, Copy)]
pub struct WienerProblem<'a> {
    pub primary: &'a TransferFunction,
    pub sensor: &'a TransferFunction,
    /// spectral shape of `v`; white when `None`
    pub disturbance: Option<&'a TransferFunction>,
    pub plant: &'a TransferFunction,
    /// filter between `a` and the controller input
    pub analyzer: Option<&'a TransferFunction>,
    /// filter in front of the minimized error
    pub error_filter: Option<&'a TransferFunction>,
    pub others: &'a [LoopContribution<'a>],
    pub taps: usize,
}

pub const WIENER_GRID_POINTS: usize = 4096;

fn fir_response(taps: &[f64], omega: f64) -> Complex64 {
    taps.iter()
        .enumerate()
        .map(|(j, c)| c * Complex64::from_polar(1.0, -omega * j as f64))
        .sum()
}

/// Solves `min_w ∫ |E(f)|² |P + S_D (Σ others + R · w · analyzer)|² Φ_v df`
/// over the full Nyquist interval, `E` being the error filter.
pub fn wiener_controller(p: &WienerProblem) -> Result<Vec<f64>> {
    if p.taps == 0 {
        return Err(Error::Config("controller needs at least one tap".into()));
    }
    let fs = p.primary.sample_rate_hz();
    let n = p.taps;
    let mut ata = DMatrix::<f64>::zeros(n, n);
    let mut atb = DVector::<f64>::zeros(n);
    for g in 0..WIENER_GRID_POINTS {
        let f = 0.5 * fs * (g as f64 + 0.5) / WIENER_GRID_POINTS as f64;
        let omega = 2.0 * PI * f / fs;
        let sd = p.sensor.response_at(f);
        let mut weight = p.disturbance.map_or(1.0, |d| d.response_at(f).norm_sqr());
        if let Some(e) = p.error_filter {
            weight *= e.response_at(f).norm_sqr();
        }
        let mut base = p.primary.response_at(f);
        for o in p.others {
            let h = o.analyzer.map_or(Complex64::new(1.0, 0.0), |a| a.response_at(f));
            base += sd * o.plant.response_at(f) * h * fir_response(o.taps, omega);
        }
        let h = p.analyzer.map_or(Complex64::new(1.0, 0.0), |a| a.response_at(f));
        let g0 = sd * p.plant.response_at(f) * h;
        let cols: Vec<Complex64> = (0..n)
            .map(|j| g0 * Complex64::from_polar(1.0, -omega * j as f64))
            .collect();
        for r in 0..n {
            for c in 0..n {
                ata[(r, c)] += weight * (cols[r].conj() * cols[c]).re;
            }
            atb[r] -= weight * (cols[r].conj() * base).re;
        }
    }
    let w = ata
        .svd(true, true)
        .solve(&atb, 1e-12)
        .map_err(|e| Error::Config(format!("normal equations failed: {e}")))?;
    Ok(w.iter().copied().collect())
}
