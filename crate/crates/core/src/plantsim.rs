//! Closed-loop plant simulation, trace recording and builtin scenarios.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::ffc::{ControllerConfig, ErrorSource};
use crate::filterbank::{design_bank, BankSpec, FilterBank};
use crate::lti::{FilterState, TransferFunction};
use crate::rls::RlsConfig;
use crate::scheduler::{
    AdaptationMode, ConvergenceCriterion, DivergencePolicy, Event, ExcitationConfig, ParamSnapshot, RegionConfig,
    RegionSummary, ScheduleConfig,
};
use crate::sysid::RegionOrders;

/// Seeded Gaussian source, optionally colored by a shaping filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    /// standard deviation of the white driving noise
    pub level: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shaping: Option<TransferFunction>,
}

impl SignalSpec {
    pub fn white(level: f64, seed: u64) -> Self {
        Self {
            level,
            seed,
            shaping: None,
        }
    }

    pub fn silent(seed: u64) -> Self {
        Self::white(0.0, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    /// 1 selects a single fullband region
    pub num_regions: usize,
    pub num_taps: usize,
    pub stopband_atten_db: f64,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            num_regions: 4,
            num_taps: 64,
            stopband_atten_db: 110.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub sample_rate_hz: f64,
    /// one plant per actuator channel
    pub plants: Vec<TransferFunction>,
    pub primary_path: TransferFunction,
    pub sensor_path: TransferFunction,
    pub disturbance: SignalSpec,
    pub noise: SignalSpec,
    pub bank: BankConfig,
    pub schedule: ScheduleConfig,
}

impl Scenario {
    pub fn num_channels(&self) -> usize {
        self.plants.len()
    }

    pub fn num_regions(&self) -> usize {
        self.bank.num_regions
    }

    fn paths(&self) -> impl Iterator<Item = (&'static str, &TransferFunction)> {
        self.plants
            .iter()
            .map(|p| ("plant", p))
            .chain([("primary path", &self.primary_path), ("sensor path", &self.sensor_path)])
            .chain(self.disturbance.shaping.iter().map(|t| ("disturbance shaping", t)))
            .chain(self.noise.shaping.iter().map(|t| ("noise shaping", t)))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if self.plants.is_empty() {
            return Err(Error::Config("scenario needs at least one plant".into()));
        }
        for (what, tf) in self.paths() {
            if tf.sample_rate_hz() != self.sample_rate_hz {
                return Err(Error::Config(format!(
                    "{what} sampled at {} Hz, scenario at {} Hz",
                    tf.sample_rate_hz(),
                    self.sample_rate_hz
                )));
            }
            if !tf.is_stable() {
                return Err(Error::Config(format!("{what} is not stable")));
            }
        }
        for s in [&self.disturbance, &self.noise] {
            if !(s.level >= 0.0 && s.level.is_finite()) {
                return Err(Error::Config("signal level must be non-negative".into()));
            }
        }
        if self.bank.num_regions == 0 {
            return Err(Error::Config("at least one region required".into()));
        }
        self.schedule.validate(self.bank.num_regions, self.plants.len())
    }

    pub fn build_bank(&self) -> Result<FilterBank> {
        if self.bank.num_regions == 1 {
            return Ok(FilterBank::fullband(self.sample_rate_hz));
        }
        design_bank(&BankSpec::new(
            self.bank.num_regions,
            self.bank.num_taps,
            self.bank.stopband_atten_db,
            self.sample_rate_hz,
        ))
    }

    /// Reseeds disturbance, noise and excitation from one base seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.disturbance.seed = seed;
        self.noise.seed = seed.wrapping_add(1);
        self.schedule.excitation.seed = seed.wrapping_add(2);
        self
    }

    /// RMS of the disturbance reaching the error sensor, `v_b = P v`.
    pub fn disturbance_rms(&self) -> f64 {
        let shaping = self.disturbance.shaping.as_ref().map_or(1.0, rms_gain);
        self.disturbance.level * shaping * rms_gain(&self.primary_path)
    }

    /// Sets white measurement noise `db` below the disturbance RMS.
    pub fn with_noise_below_disturbance(mut self, db: f64) -> Self {
        self.noise.level = self.disturbance_rms() * 10f64.powf(-db / 20.0);
        self.noise.shaping = None;
        self
    }
}

/// RMS gain of `tf` for white input, from a dense frequency grid.
pub fn rms_gain(tf: &TransferFunction) -> f64 {
    const GRID: usize = 8192;
    let nyq = tf.sample_rate_hz() / 2.0;
    let p: f64 = (0..GRID)
        .map(|i| tf.response_at(nyq * (i as f64 + 0.5) / GRID as f64).norm_sqr())
        .sum();
    (p / GRID as f64).sqrt()
}

#[derive(Debug, Clone)]
struct Source {
    rng: ChaCha8Rng,
    level: f64,
    shaping: Option<FilterState>,
}

impl Source {
    fn new(spec: &SignalSpec) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            level: spec.level,
            shaping: spec.shaping.as_ref().map(FilterState::new),
        }
    }

    fn next(&mut self) -> f64 {
        let w: f64 = StandardNormal.sample(&mut self.rng);
        let w = self.level * w;
        match self.shaping.as_mut() {
            Some(f) => f.step_unchecked(w),
            None => w,
        }
    }
}

/// Disturbance-side signals of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceSample {
    pub v: f64,
    pub a: f64,
    pub v_b: f64,
    pub n: f64,
}

/// Streaming realization of `e = Σ R_c u_c + P v + n`, `a = S_D v`.
#[derive(Debug, Clone)]
pub struct PlantSim {
    plants: Vec<FilterState>,
    primary: FilterState,
    sensor: FilterState,
    disturbance: Source,
    noise: Source,
}

impl PlantSim {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        Ok(Self {
            plants: scenario.plants.iter().map(FilterState::new).collect(),
            primary: FilterState::new(&scenario.primary_path),
            sensor: FilterState::new(&scenario.sensor_path),
            disturbance: Source::new(&scenario.disturbance),
            noise: Source::new(&scenario.noise),
        })
    }

    pub fn num_channels(&self) -> usize {
        self.plants.len()
    }

    /// Draws `v(k)`, `n(k)` and propagates them through `S_D` and `P`.
    pub fn next_disturbance(&mut self) -> DisturbanceSample {
        let v = self.disturbance.next();
        let n = self.noise.next();
        DisturbanceSample {
            v,
            a: self.sensor.step_unchecked(v),
            v_b: self.primary.step_unchecked(v),
            n,
        }
    }

    /// Error for the given control; advances the plant states.
    pub fn respond(&mut self, d: &DisturbanceSample, u: &[f64]) -> Result<f64> {
        if u.len() != self.plants.len() {
            return Err(Error::Dimension {
                expected: self.plants.len(),
                got: u.len(),
            });
        }
        for &x in u {
            check_finite(x)?;
        }
        let ru: f64 = self.plants.iter_mut().zip(u).map(|(p, &x)| p.step_unchecked(x)).sum();
        Ok(ru + d.v_b + d.n)
    }

    /// One full sample: returns `(e(k), a(k))`.
    pub fn step_plant(&mut self, u: &[f64]) -> Result<(f64, f64)> {
        let d = self.next_disturbance();
        let e = self.respond(&d, u)?;
        Ok((e, d.a))
    }
}

/// Per-sample record of a run plus its event log and final parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationTrace {
    pub sample_rate_hz: f64,
    pub band_edges: Vec<(f64, f64)>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub n: Vec<f64>,
    pub v_b: Vec<f64>,
    pub e: Vec<f64>,
    /// channel-major
    pub u: Vec<Vec<f64>>,
    pub u_e: Vec<f64>,
    /// region-major
    pub u_q: Vec<Vec<f64>>,
    /// active region at each sample, −1 when none
    pub active_region: Vec<i64>,
    pub events: Vec<Event>,
    pub snapshots: Vec<ParamSnapshot>,
    pub regions: Vec<RegionSummary>,
}

/// Everything in a trace except the per-sample streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub samples: usize,
    pub sample_rate_hz: f64,
    pub num_channels: usize,
    pub num_regions: usize,
    pub band_edges: Vec<(f64, f64)>,
    pub events: Vec<Event>,
    pub regions: Vec<RegionSummary>,
    pub snapshots: Vec<ParamSnapshot>,
}

impl SimulationTrace {
    pub fn with_capacity(channels: usize, regions: usize, cap: usize) -> Self {
        let col = || Vec::with_capacity(cap);
        Self {
            v: col(),
            a: col(),
            n: col(),
            v_b: col(),
            e: col(),
            u: (0..channels).map(|_| col()).collect(),
            u_e: col(),
            u_q: (0..regions).map(|_| col()).collect(),
            active_region: Vec::with_capacity(cap),
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn num_channels(&self) -> usize {
        self.u.len()
    }

    pub fn num_regions(&self) -> usize {
        self.u_q.len()
    }

    pub fn push(&mut self, d: &DisturbanceSample, e: f64, u: &[f64], u_e: f64, u_q: &[f64], active: i64) {
        self.v.push(d.v);
        self.a.push(d.a);
        self.n.push(d.n);
        self.v_b.push(d.v_b);
        self.e.push(e);
        for (col, x) in self.u.iter_mut().zip(u) {
            col.push(*x);
        }
        self.u_e.push(u_e);
        for (col, x) in self.u_q.iter_mut().zip(u_q) {
            col.push(*x);
        }
        self.active_region.push(active);
    }

    /// Sample index after which every region is frozen.
    pub fn settled_at(&self) -> Option<usize> {
        if self.regions.is_empty() || self.regions.iter().any(|r| r.frozen_at.is_none()) {
            return None;
        }
        self.regions.iter().filter_map(|r| r.frozen_at).max().map(|k| k + 1)
    }

    pub fn all_converged(&self) -> bool {
        self.settled_at().is_some() && self.regions.iter().all(|r| !r.budget_exhausted)
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            samples: self.len(),
            sample_rate_hz: self.sample_rate_hz,
            num_channels: self.num_channels(),
            num_regions: self.num_regions(),
            band_edges: self.band_edges.clone(),
            events: self.events.clone(),
            regions: self.regions.clone(),
            snapshots: self.snapshots.clone(),
        }
    }

    pub fn csv_header(&self) -> String {
        let mut h = String::from("k,v,a,n,v_b,e");
        for c in 0..self.num_channels() {
            let _ = write!(h, ",u_ch{c}");
        }
        h.push_str(",u_E");
        for r in 0..self.num_regions() {
            let _ = write!(h, ",u_Q{r}");
        }
        h.push_str(",active_region");
        h
    }

    /// One row per sample, floats with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Trace(e.to_string());
        writeln!(w, "{}", self.csv_header()).map_err(io)?;
        let mut line = String::with_capacity(64 * (8 + self.num_channels() + self.num_regions()));
        for k in 0..self.len() {
            line.clear();
            let _ = write!(line, "{k}");
            for x in [self.v[k], self.a[k], self.n[k], self.v_b[k], self.e[k]] {
                let _ = write!(line, ",{x:.16e}");
            }
            for col in &self.u {
                let _ = write!(line, ",{:.16e}", col[k]);
            }
            let _ = write!(line, ",{:.16e}", self.u_e[k]);
            for col in &self.u_q {
                let _ = write!(line, ",{:.16e}", col[k]);
            }
            let _ = writeln!(line, ",{}", self.active_region[k]);
            w.write_all(line.as_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Parses the per-sample streams written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let bad = |m: String| Error::Trace(m);
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty trace".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let channels = cols.iter().filter(|c| c.starts_with("u_ch")).count();
        let regions = cols.iter().filter(|c| c.starts_with("u_Q")).count();
        let mut t = Self::with_capacity(channels, regions, 0);
        if cols.len() != 8 + channels + regions || t.csv_header() != header.trim() {
            return Err(bad(format!("unexpected header: {header}")));
        }
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != cols.len() {
                return Err(bad(format!("row {row}: {} fields, expected {}", f.len(), cols.len())));
            }
            let num = |i: usize| -> Result<f64> {
                f[i].parse::<f64>()
                    .map_err(|_| bad(format!("row {row}: bad value '{}' in column {}", f[i], cols[i])))
            };
            let d = DisturbanceSample {
                v: num(1)?,
                a: num(2)?,
                n: num(3)?,
                v_b: num(4)?,
            };
            let u: Vec<f64> = (0..channels).map(|c| num(6 + c)).collect::<Result<_>>()?;
            let u_e = num(6 + channels)?;
            let u_q: Vec<f64> = (0..regions).map(|r| num(7 + channels + r)).collect::<Result<_>>()?;
            let active = f[cols.len() - 1]
                .parse::<i64>()
                .map_err(|_| bad(format!("row {row}: bad active region")))?;
            t.push(&d, num(5)?, &u, u_e, &u_q, active);
        }
        Ok(t)
    }
}

/// Uncontrolled run: `u ≡ 0`, no scheduler.
pub fn run_open_loop(scenario: &Scenario, samples: usize) -> Result<SimulationTrace> {
    let mut sim = PlantSim::new(scenario)?;
    let channels = scenario.num_channels();
    let regions = scenario.num_regions();
    let mut t = SimulationTrace::with_capacity(channels, regions, samples);
    let u = vec![0.0; channels];
    let u_q = vec![0.0; regions];
    for _ in 0..samples {
        let d = sim.next_disturbance();
        let e = sim.respond(&d, &u)?;
        t.push(&d, e, &u, 0.0, &u_q, -1);
    }
    t.sample_rate_hz = scenario.sample_rate_hz;
    t.band_edges = scenario.build_bank()?.band_edges;
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Smoke,
    Desk,
    Full,
}

impl std::str::FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoke" => Ok(Self::Smoke),
            "desk" => Ok(Self::Desk),
            "full" => Ok(Self::Full),
            other => Err(Error::Config(format!(
                "unknown builtin scenario '{other}' (smoke|desk|full)"
            ))),
        }
    }
}

impl Difficulty {
    pub fn name(self) -> &'static str {
        match self {
            Self::Smoke => "smoke",
            Self::Desk => "desk",
            Self::Full => "full",
        }
    }
}

/// Sample rate of the builtin scenarios.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 41_760.0;

/// Bulk delay of the primary path relative to the sensor path in the banded
/// scenarios; exceeds the analysis filters' group delay so that the ideal
/// controller stays causal.
pub const PRIMARY_LEAD_SAMPLES: usize = 35;

fn quad(r: f64, angle: f64) -> Vec<f64> {
    vec![1.0, -2.0 * r * angle.cos(), r * r]
}

/// Random second-order sections with pole radii in `poles` and zero radii in
/// `zeros`; angles are stratified over `span` (fractions of π) and each
/// zero pair sits near its pole pair when `paired` is set.
struct SectionPlan {
    count: usize,
    poles: (f64, f64),
    zeros: (f64, f64),
    span: (f64, f64),
    paired: bool,
}

fn random_sections(rng: &mut ChaCha8Rng, plan: &SectionPlan) -> Vec<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = plan.span;
    let width = (hi - lo) / plan.count as f64;
    (0..plan.count)
        .map(|j| {
            let ang = PI * (lo + width * (j as f64 + rng.random_range(0.2..0.8)));
            let rp = rng.random_range(plan.poles.0..plan.poles.1);
            let rz = rng.random_range(plan.zeros.0..plan.zeros.1);
            let zang = if plan.paired {
                ang * rng.random_range(0.85..1.15)
            } else {
                PI * (lo + width * (j as f64 + rng.random_range(0.0..1.0)))
            };
            (quad(rz, zang.min(PI)), quad(rp, ang))
        })
        .collect()
}

fn unit_rms(tf: TransferFunction) -> TransferFunction {
    let g = rms_gain(&tf);
    tf.scaled(1.0 / g)
}

fn region(orders: RegionOrders, ident_lambda: f64, ctl_lambda: f64, channel: usize) -> RegionConfig {
    RegionConfig {
        orders,
        ident: RlsConfig::with_lambda(ident_lambda),
        controller: ControllerConfig {
            rls: RlsConfig {
                initial_gain: 1.0,
                ..RlsConfig::with_lambda(ctl_lambda)
            },
            ..ControllerConfig::default()
        },
        channel,
    }
}

/// Deterministic builtin scenario. Plant structure is fixed per difficulty;
/// `seed` drives the disturbance (`seed`), noise (`seed + 1`) and excitation
/// (`seed + 2`) generators.
pub fn make_synthetic_scenario(seed: u64, difficulty: Difficulty) -> Scenario {
    let fs = DEFAULT_SAMPLE_RATE_HZ;
    let sc = match difficulty {
        Difficulty::Smoke => smoke(fs),
        Difficulty::Desk => desk(fs),
        Difficulty::Full => full(fs),
    };
    sc.with_seed(seed)
}

fn smoke(fs: f64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let a1 = quad(rng.random_range(0.5..0.7), rng.random_range(0.15..0.35) * PI);
    let a2 = quad(rng.random_range(0.5..0.7), rng.random_range(0.55..0.8) * PI);
    let b_r = quad(rng.random_range(0.3..0.6), rng.random_range(0.4..0.6) * PI);
    let s1 = quad(rng.random_range(0.3..0.6), rng.random_range(0.1..0.45) * PI);
    let s2 = quad(rng.random_range(0.3..0.6), rng.random_range(0.55..0.9) * PI);
    let c: Vec<f64> = [0.8, -0.4, 0.25, -0.1]
        .iter()
        .map(|x| x * rng.random_range(0.8..1.2))
        .collect();

    // R = q⁻¹ b_R / (A1 A2), S_D = A1 / (S1 S2), P = S_D · c · R realized
    // without the cancelled A1 factor.
    let r = TransferFunction::from_sections(&[(b_r.clone(), a1.clone()), (vec![1.0], a2.clone())], 1, fs)
        .expect("smoke plant");
    let s_d =
        TransferFunction::from_sections(&[(a1, s1.clone()), (vec![1.0], s2.clone())], 0, fs).expect("smoke sensor");
    let p = TransferFunction::from_sections(&[(b_r, s1), (c, s2), (vec![1.0], a2)], 1, fs).expect("smoke primary");

    let orders = RegionOrders::new(4, 3, 7);
    let mut schedule = ScheduleConfig::uniform(1, region(orders, 1.0, 1.0, 0));
    schedule.mode = AdaptationMode::Sequential;
    schedule.criterion = ConvergenceCriterion {
        window: 2000,
        delta: 1e-4,
        min_samples: 5000,
        max_samples: 60_000,
    };
    schedule.excitation = ExcitationConfig {
        amplitude: 1.0,
        seed: 0,
    };
    Scenario {
        name: "smoke".into(),
        sample_rate_hz: fs,
        plants: vec![r],
        primary_path: p,
        sensor_path: s_d,
        disturbance: SignalSpec::white(1.0, 0),
        noise: SignalSpec::silent(1),
        bank: BankConfig {
            num_regions: 1,
            ..BankConfig::default()
        },
        schedule,
    }
}

/// R of order 12 with one real zero outside the unit circle, S_D of order 10
/// and P = q^{-Δ} S_D G0 with G0 of order 6.
fn desk(fs: f64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut r_sec = random_sections(
        &mut rng,
        &SectionPlan {
            count: 6,
            poles: (0.45, 0.75),
            zeros: (0.2, 0.5),
            span: (0.0, 1.0),
            paired: false,
        },
    );
    let nmp = rng.random_range(1.8..2.2);
    r_sec[5].0 = vec![1.0, -nmp];
    let r = unit_rms(TransferFunction::from_sections(&r_sec, 1, fs).expect("desk plant"));

    let sd_sec = random_sections(
        &mut rng,
        &SectionPlan {
            count: 5,
            poles: (0.3, 0.7),
            zeros: (0.2, 0.6),
            span: (0.0, 1.0),
            paired: false,
        },
    );
    let mut sd_sec = sd_sec;
    // accelerometer-type sensing: no content at DC or Nyquist
    sd_sec[0].0 = vec![1.0, 0.0, -1.0];
    sd_sec[1].0 = vec![1.0, 0.0, -1.0];
    let s_d = unit_rms(TransferFunction::from_sections(&sd_sec, 0, fs).expect("desk sensor"));
    let g0_sec = random_sections(
        &mut rng,
        &SectionPlan {
            count: 3,
            poles: (0.2, 0.5),
            zeros: (0.2, 0.5),
            span: (0.0, 1.0),
            paired: false,
        },
    );
    let g0 = unit_rms(TransferFunction::from_sections(&g0_sec, PRIMARY_LEAD_SAMPLES, fs).expect("desk primary"));
    let p = s_d.cascade(&g0).expect("same rate");

    let orders = RegionOrders::new(5, 5, 48);
    let mut per_region = region(orders, 1.0, 1.0, 0);
    per_region.controller.error_source = ErrorSource::Subband;
    let mut schedule = ScheduleConfig::uniform(4, per_region);
    // edge regions adapt after their neighbours
    schedule.order = Some(vec![1, 0, 2, 3]);
    schedule.mode = AdaptationMode::Sequential;
    schedule.criterion = ConvergenceCriterion {
        window: 1000,
        delta: 5e-3,
        min_samples: 10_000,
        max_samples: 40_000,
    };
    schedule.excitation = ExcitationConfig {
        amplitude: 2.0,
        seed: 0,
    };
    Scenario {
        name: "desk".into(),
        sample_rate_hz: fs,
        plants: vec![r],
        primary_path: p,
        sensor_path: s_d,
        disturbance: SignalSpec::white(1.0, 0),
        noise: SignalSpec::silent(1),
        bank: BankConfig::default(),
        schedule,
    }
}

/// Dual-actuator scenario at high model order: a low-frequency channel
/// (orders 50) and a high-frequency channel (order 17).
fn full(fs: f64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut rv = random_sections(
        &mut rng,
        &SectionPlan {
            count: 25,
            poles: (0.5, 0.85),
            zeros: (0.4, 0.8),
            span: (0.0, 1.0),
            paired: true,
        },
    );
    rv[24].0 = vec![1.0];
    let r_v = unit_rms(TransferFunction::from_sections(&rv, 1, fs).expect("vcm plant"));

    let mut rm = random_sections(
        &mut rng,
        &SectionPlan {
            count: 8,
            poles: (0.5, 0.85),
            zeros: (0.4, 0.8),
            span: (0.0, 1.0),
            paired: true,
        },
    );
    rm.push((vec![1.0], vec![1.0, -rng.random_range(0.3..0.6)]));
    let r_m = unit_rms(TransferFunction::from_sections(&rm, 1, fs).expect("ma plant"));

    let sd = random_sections(
        &mut rng,
        &SectionPlan {
            count: 50,
            poles: (0.3, 0.8),
            zeros: (0.3, 0.8),
            span: (0.0, 1.0),
            paired: true,
        },
    );
    let s_d = unit_rms(TransferFunction::from_sections(&sd, 0, fs).expect("full sensor"));
    let mut g0 = random_sections(
        &mut rng,
        &SectionPlan {
            count: 12,
            poles: (0.3, 0.7),
            zeros: (0.3, 0.7),
            span: (0.0, 1.0),
            paired: true,
        },
    );
    g0.push((vec![1.0], vec![1.0, -rng.random_range(0.2..0.5)]));
    let g0 = unit_rms(TransferFunction::from_sections(&g0, PRIMARY_LEAD_SAMPLES, fs).expect("full primary"));
    let p = s_d.cascade(&g0).expect("same rate");

    let orders = RegionOrders::new(5, 5, 48);
    let mut schedule = ScheduleConfig {
        regions: vec![
            region(orders, 1.0, 1.0, 0),
            region(orders, 1.0, 1.0, 0),
            region(orders, 1.0, 1.0, 1),
            region(orders, 1.0, 1.0, 1),
        ],
        ..ScheduleConfig::uniform(4, RegionConfig::default())
    };
    schedule.criterion = ConvergenceCriterion {
        window: 2000,
        delta: 1e-3,
        min_samples: 5000,
        max_samples: 30_000,
    };
    schedule.excitation = ExcitationConfig {
        amplitude: 2.0,
        seed: 0,
    };
    schedule.mode = AdaptationMode::Simultaneous;
    schedule.on_divergence = DivergencePolicy::Halt;
    Scenario {
        name: "full".into(),
        sample_rate_hz: fs,
        plants: vec![r_v, r_m],
        primary_path: p,
        sensor_path: s_d,
        disturbance: SignalSpec::white(1.0, 0),
        noise: SignalSpec::silent(1),
        bank: BankConfig::default(),
        schedule,
    }
}
