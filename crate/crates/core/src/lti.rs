//! Discrete-time rational transfer functions.
//!
//! A [`TransferFunction`] is `B(q⁻¹)/A(q⁻¹)` with `A` monic. Internally it is
//! kept as a bulk delay followed by a cascade of direct-form stages, so plants
//! of order ~100 built from second-order sections filter and evaluate without
//! the round-off of an expanded polynomial. The expanded `b`/`a` view is always
//! available and is what serializes.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_finite, Error, Result};

/// Poles with magnitude at or above this are treated as unstable.
pub const STABILITY_MARGIN: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq)]
struct Stage {
    b: Vec<f64>,
    a: Vec<f64>,
}

impl Stage {
    fn new(b: &[f64], a: &[f64]) -> Result<Self> {
        if b.is_empty() || a.is_empty() {
            return Err(Error::Config("empty coefficient sequence".into()));
        }
        if let Some(bad) = b.iter().chain(a).find(|c| !c.is_finite()) {
            return Err(Error::Config(format!("non-finite coefficient {bad}")));
        }
        let a0 = a[0];
        if a0 == 0.0 {
            return Err(Error::Config("leading denominator coefficient is zero".into()));
        }
        Ok(Self {
            b: b.iter().map(|c| c / a0).collect(),
            a: a.iter().map(|c| c / a0).collect(),
        })
    }

    fn order(&self) -> usize {
        (self.b.len().max(self.a.len())) - 1
    }

    fn response(&self, w: Complex64) -> Complex64 {
        horner(&self.b, w) / horner(&self.a, w)
    }
}

/// Evaluates `Σ c_k w^k` for `w = e^{-jω}`.
fn horner(c: &[f64], w: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &ck| acc * w + ck)
}

fn poly_mul(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + y.len() - 1];
    for (i, xi) in x.iter().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            out[i + j] += xi * yj;
        }
    }
    out
}

/// Roots in `z` of `c_0 + c_1 z⁻¹ + … + c_n z⁻ⁿ`, i.e. of `c_0 zⁿ + … + c_n`.
pub fn poly_roots(c: &[f64]) -> Vec<Complex64> {
    let start = c.iter().position(|v| *v != 0.0).unwrap_or(c.len());
    let end = c.iter().rposition(|v| *v != 0.0).map_or(0, |i| i + 1);
    if start >= end {
        return Vec::new();
    }
    // trailing zeros are roots at the origin
    let mut roots = vec![Complex64::new(0.0, 0.0); c.len() - end];
    let p = &c[start..end];
    let n = p.len() - 1;
    match n {
        0 => {}
        1 => roots.push(Complex64::new(-p[1] / p[0], 0.0)),
        2 => {
            let (a, b, cc) = (p[0], p[1], p[2]);
            let disc = b * b - 4.0 * a * cc;
            if disc >= 0.0 {
                let s = disc.sqrt();
                let sgn = if b >= 0.0 { 1.0 } else { -1.0 };
                let q = -0.5 * (b + sgn * s);
                if q == 0.0 {
                    roots.push(Complex64::new(0.0, 0.0));
                    roots.push(Complex64::new(0.0, 0.0));
                } else {
                    roots.push(Complex64::new(q / a, 0.0));
                    roots.push(Complex64::new(cc / q, 0.0));
                }
            } else {
                let re = -b / (2.0 * a);
                let im = (-disc).sqrt() / (2.0 * a);
                roots.push(Complex64::new(re, im));
                roots.push(Complex64::new(re, -im));
            }
        }
        _ => {
            let mut m = DMatrix::<f64>::zeros(n, n);
            for j in 0..n {
                m[(0, j)] = -p[j + 1] / p[0];
            }
            for i in 1..n {
                m[(i, i - 1)] = 1.0;
            }
            roots.extend(m.complex_eigenvalues().iter().copied());
        }
    }
    roots
}

/// Schur-Cohn step-down test on a denominator in powers of `q⁻¹`: true iff
/// every root lies strictly inside the unit circle. Needs no root finding.
pub fn is_schur_stable(a: &[f64]) -> bool {
    let n = a.iter().rposition(|c| *c != 0.0).unwrap_or(0);
    if a.is_empty() || a[0] == 0.0 || !a[..=n].iter().all(|c| c.is_finite()) {
        return false;
    }
    let mut c: Vec<f64> = a[..=n].iter().map(|x| x / a[0]).collect();
    for m in (1..=n).rev() {
        let k = c[m];
        if k.abs() >= STABILITY_MARGIN {
            return false;
        }
        let d = 1.0 - k * k;
        let next: Vec<f64> = (0..m).map(|i| (c[i] - k * c[m - i]) / d).collect();
        c = next;
    }
    true
}

/// A rational discrete-time system `B(q⁻¹)/A(q⁻¹)` at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    fs: f64,
    delay: usize,
    stages: Vec<Stage>,
    b: Vec<f64>,
    a: Vec<f64>,
}

/// One evaluated point of a frequency response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyResponsePoint {
    pub freq_hz: f64,
    pub value: Complex64,
}

impl FrequencyResponsePoint {
    pub fn magnitude(&self) -> f64 {
        self.value.norm()
    }

    pub fn magnitude_db(&self) -> f64 {
        20.0 * self.value.norm().log10()
    }

    pub fn phase_deg(&self) -> f64 {
        self.value.arg().to_degrees()
    }
}

fn check_fs(fs: f64) -> Result<()> {
    if fs.is_finite() && fs > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("sample rate must be positive, got {fs}")))
    }
}

impl TransferFunction {
    /// Builds `b/a`, normalizing so that `a[0] = 1`.
    pub fn new(b: Vec<f64>, a: Vec<f64>, fs: f64) -> Result<Self> {
        check_fs(fs)?;
        let stage = Stage::new(&b, &a)?;
        Ok(Self::assemble(fs, 0, vec![stage]))
    }

    pub fn fir(b: Vec<f64>, fs: f64) -> Result<Self> {
        Self::new(b, vec![1.0], fs)
    }

    pub fn identity(fs: f64) -> Self {
        Self::gain(1.0, fs)
    }

    pub fn gain(g: f64, fs: f64) -> Self {
        Self::new(vec![g], vec![1.0], fs).expect("finite gain and positive rate")
    }

    pub fn pure_delay(samples: usize, fs: f64) -> Result<Self> {
        check_fs(fs)?;
        Ok(Self::assemble(fs, samples, vec![Stage::new(&[1.0], &[1.0])?]))
    }

    /// Builds a cascade `q^{-delay} · Π b_s/a_s`. Each section keeps its own
    /// realization; `b()`/`a()` expose the expanded product.
    pub fn from_sections(sections: &[(Vec<f64>, Vec<f64>)], delay: usize, fs: f64) -> Result<Self> {
        check_fs(fs)?;
        if sections.is_empty() {
            return Self::pure_delay(delay, fs);
        }
        let stages = sections
            .iter()
            .map(|(b, a)| Stage::new(b, a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(fs, delay, stages))
    }

    fn assemble(fs: f64, delay: usize, stages: Vec<Stage>) -> Self {
        let mut b = vec![1.0];
        let mut a = vec![1.0];
        for s in &stages {
            b = poly_mul(&b, &s.b);
            a = poly_mul(&a, &s.a);
        }
        if delay > 0 {
            let mut shifted = vec![0.0; delay];
            shifted.extend(b);
            b = shifted;
        }
        Self {
            fs,
            delay,
            stages,
            b,
            a,
        }
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.fs
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn num_order(&self) -> usize {
        self.b.len() - 1
    }

    pub fn den_order(&self) -> usize {
        self.a.iter().rposition(|c| *c != 0.0).unwrap_or(0)
    }

    pub fn is_fir(&self) -> bool {
        self.den_order() == 0
    }

    pub fn num_sections(&self) -> usize {
        self.stages.len()
    }

    /// Series connection `self · other`.
    pub fn cascade(&self, other: &TransferFunction) -> Result<TransferFunction> {
        if self.fs != other.fs {
            return Err(Error::Config(format!(
                "cannot cascade systems at {} Hz and {} Hz",
                self.fs, other.fs
            )));
        }
        let stages = self.stages.iter().chain(&other.stages).cloned().collect();
        Ok(Self::assemble(self.fs, self.delay + other.delay, stages))
    }

    /// Returns `g · self`.
    pub fn scaled(&self, g: f64) -> TransferFunction {
        let mut stages = self.stages.clone();
        for c in &mut stages[0].b {
            *c *= g;
        }
        Self::assemble(self.fs, self.delay, stages)
    }

    /// Complex gain at `freq_hz` without range checking.
    pub fn response_at(&self, freq_hz: f64) -> Complex64 {
        let omega = 2.0 * PI * freq_hz / self.fs;
        let w = Complex64::from_polar(1.0, -omega);
        let mut h = Complex64::from_polar(1.0, -omega * self.delay as f64);
        for s in &self.stages {
            h *= s.response(w);
        }
        h
    }

    pub fn freq_response(&self, freqs_hz: &[f64]) -> Result<Vec<FrequencyResponsePoint>> {
        let nyquist = self.fs / 2.0;
        freqs_hz
            .iter()
            .map(|&f| {
                if !(0.0..=nyquist * (1.0 + 1e-12)).contains(&f) {
                    return Err(Error::FrequencyOutOfRange {
                        freq_hz: f,
                        nyquist_hz: nyquist,
                    });
                }
                Ok(FrequencyResponsePoint {
                    freq_hz: f,
                    value: self.response_at(f),
                })
            })
            .collect()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.stages.iter().flat_map(|s| poly_roots(&s.a)).collect()
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        self.stages.iter().flat_map(|s| poly_roots(&s.b)).collect()
    }

    /// True iff every pole lies strictly inside the unit circle (with margin).
    pub fn is_stable(&self) -> bool {
        self.stages.iter().all(|s| {
            s.a.len() <= 1
                || poly_roots(&s.a)
                    .iter()
                    .all(|r| r.norm() < STABILITY_MARGIN && r.is_finite())
        })
    }

    /// Number of samples after which the impulse response of a stable system
    /// has decayed below `tol` relative to its peak (upper estimate from the
    /// dominant pole).
    pub fn decay_horizon(&self, tol: f64) -> Option<usize> {
        let rho = self.poles().iter().map(|p| p.norm()).fold(0.0_f64, f64::max);
        if rho >= 1.0 {
            return None;
        }
        let base = self.delay + self.b.len() + self.a.len();
        if rho == 0.0 {
            return Some(base);
        }
        // polynomial prefactor from repeated poles is absorbed by the 4x slack
        Some(base + (4.0 * tol.ln() / rho.ln()).ceil() as usize)
    }
}

/// Streaming realization of a [`TransferFunction`] (transposed direct form II
/// per stage, preceded by the bulk delay).
#[derive(Debug, Clone)]
pub struct FilterState {
    tf: TransferFunction,
    // per stage: padded (b, a) and delay line of length max(nb, na)
    coeffs: Vec<(Vec<f64>, Vec<f64>)>,
    lines: Vec<Vec<f64>>,
    delay_buf: Vec<f64>,
    delay_pos: usize,
}

impl FilterState {
    pub fn new(tf: &TransferFunction) -> Self {
        let coeffs: Vec<_> = tf
            .stages
            .iter()
            .map(|s| {
                let n = s.order() + 1;
                let mut b = s.b.clone();
                let mut a = s.a.clone();
                b.resize(n, 0.0);
                a.resize(n, 0.0);
                (b, a)
            })
            .collect();
        let lines = coeffs.iter().map(|(b, _)| vec![0.0; b.len() - 1]).collect();
        Self {
            tf: tf.clone(),
            coeffs,
            lines,
            delay_buf: vec![0.0; tf.delay],
            delay_pos: 0,
        }
    }

    pub fn transfer_function(&self) -> &TransferFunction {
        &self.tf
    }

    pub fn reset(&mut self) {
        self.lines.iter_mut().for_each(|l| l.fill(0.0));
        self.delay_buf.fill(0.0);
        self.delay_pos = 0;
    }

    /// Advances one sample: `y(k) = Σ b_j x(k−j) − Σ a_j y(k−j)`.
    pub fn step(&mut self, x: f64) -> Result<f64> {
        check_finite(x)?;
        Ok(self.step_unchecked(x))
    }

    #[inline]
    pub(crate) fn step_unchecked(&mut self, x: f64) -> f64 {
        let mut v = x;
        if !self.delay_buf.is_empty() {
            let out = self.delay_buf[self.delay_pos];
            self.delay_buf[self.delay_pos] = v;
            self.delay_pos = (self.delay_pos + 1) % self.delay_buf.len();
            v = out;
        }
        for ((b, a), s) in self.coeffs.iter().zip(self.lines.iter_mut()) {
            let y = b[0] * v + s.first().copied().unwrap_or(0.0);
            let n = s.len();
            for i in 0..n {
                let next = if i + 1 < n { s[i + 1] } else { 0.0 };
                s[i] = next + b[i + 1] * v - a[i + 1] * y;
            }
            v = y;
        }
        v
    }
}

/// Filters a whole sequence from a zero state.
pub fn filter_signal(tf: &TransferFunction, x: &[f64]) -> Result<Vec<f64>> {
    let mut st = FilterState::new(tf);
    x.iter().map(|&v| st.step(v)).collect()
}

#[derive(Serialize, Deserialize)]
struct TfRepr {
    b: Vec<f64>,
    a: Vec<f64>,
    fs_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sections: Option<Vec<SectionRepr>>,
    #[serde(default, skip_serializing_if = "is_zero")]
    delay: usize,
}

#[derive(Serialize, Deserialize)]
struct SectionRepr {
    b: Vec<f64>,
    a: Vec<f64>,
}

fn is_zero(d: &usize) -> bool {
    *d == 0
}

impl Serialize for TransferFunction {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let sections = (self.stages.len() > 1 || self.delay > 0).then(|| {
            self.stages
                .iter()
                .map(|s| SectionRepr {
                    b: s.b.clone(),
                    a: s.a.clone(),
                })
                .collect()
        });
        TfRepr {
            b: self.b.clone(),
            a: self.a.clone(),
            fs_hz: self.fs,
            sections,
            delay: self.delay,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for TransferFunction {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = TfRepr::deserialize(de)?;
        // the sectioned form, when present, is the authoritative realization
        let tf = match repr.sections {
            Some(secs) => {
                let secs: Vec<_> = secs.into_iter().map(|s| (s.b, s.a)).collect();
                TransferFunction::from_sections(&secs, repr.delay, repr.fs_hz)
            }
            None if repr.delay > 0 => TransferFunction::new(repr.b, repr.a, repr.fs_hz)
                .and_then(|tf| TransferFunction::pure_delay(repr.delay, repr.fs_hz)?.cascade(&tf)),
            None => TransferFunction::new(repr.b, repr.a, repr.fs_hz),
        };
        tf.map_err(serde::de::Error::custom)
    }
}
