//! Region-by-region identification and controller adaptation.
//!
//! Exactly one region is `Active` at a time. Every sample all non-pending
//! regions contribute `u_Qi` to their actuator channel; the active region also
//! injects band-limited excitation, identifies `R̂_i` and adapts `θ_Qi`. Once
//! both parameter vectors stop drifting (and `R̂_i` is stable) the region is
//! frozen and the next one in the activation order takes over.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::{wiener_controller, LoopContribution, WienerProblem};
use crate::error::{check_finite, Error, Result};
use crate::ffc::{ControllerConfig, ControllerState, ErrorSource};
use crate::filterbank::FilterBank;
use crate::lti::FilterState;
use crate::plantsim::{PlantSim, Scenario, SimulationTrace};
use crate::rls::{RlsConfig, RlsSnapshot};
use crate::sysid::{RegionIdentifier, RegionModel, RegionOrders};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionPhase {
    Pending,
    Active,
    Frozen,
}

/// Windowed relative-drift test with a sample floor and a hard budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriterion {
    pub window: usize,
    pub delta: f64,
    pub min_samples: usize,
    pub max_samples: usize,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        Self {
            window: 2000,
            delta: 1e-4,
            min_samples: 5000,
            max_samples: 100_000,
        }
    }
}

impl ConvergenceCriterion {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.delta.is_nan() || self.delta <= 0.0 || self.min_samples > self.max_samples {
            return Err(Error::Config(format!("invalid convergence criterion {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NotYet,
    Converged,
    BudgetExhausted,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relative_drift(now: &[f64], before: &[f64]) -> f64 {
    let d = now
        .iter()
        .zip(before)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    d / norm(now).max(1e-9)
}

/// Largest `‖θ(j) − θ(j−W)‖ / max(‖θ(j)‖, 1e−9)` over the last `W` entries of
/// `history`, or `None` when the history is shorter than `W + 1`.
pub fn max_window_drift(history: &[Vec<f64>], window: usize) -> Option<f64> {
    let n = history.len();
    if window == 0 || n < window + 1 {
        return None;
    }
    let first = n.saturating_sub(window).max(window);
    Some(
        (first..n)
            .map(|j| relative_drift(&history[j], &history[j - window]))
            .fold(0.0, f64::max),
    )
}

/// Convergence decision over parameter histories (one entry per sample).
pub fn check_convergence(
    criterion: &ConvergenceCriterion,
    samples: usize,
    theta_s: &[Vec<f64>],
    theta_q: &[Vec<f64>],
    model_stable: bool,
) -> Verdict {
    if samples >= criterion.max_samples {
        return Verdict::BudgetExhausted;
    }
    if samples < criterion.min_samples || !model_stable {
        return Verdict::NotYet;
    }
    let settled = |h: &[Vec<f64>]| max_window_drift(h, criterion.window).is_some_and(|d| d < criterion.delta);
    if settled(theta_s) && settled(theta_q) {
        Verdict::Converged
    } else {
        Verdict::NotYet
    }
}

/// Streaming form of the drift test: keeps the last `W` parameter vectors and
/// the maximum drift over the most recently completed window.
#[derive(Debug, Clone)]
struct DriftMonitor {
    window: usize,
    ring: Vec<Vec<f64>>,
    pos: usize,
    filled: usize,
    running_max: f64,
    in_block: usize,
    last_block_max: Option<f64>,
}

impl DriftMonitor {
    fn new(window: usize, dim: usize) -> Self {
        Self {
            window,
            ring: vec![vec![0.0; dim]; window],
            pos: 0,
            filled: 0,
            running_max: 0.0,
            in_block: 0,
            last_block_max: None,
        }
    }

    fn push(&mut self, theta: &[f64]) {
        if self.filled == self.window {
            let d = relative_drift(theta, &self.ring[self.pos]);
            self.running_max = self.running_max.max(d);
            self.in_block += 1;
            if self.in_block == self.window {
                self.last_block_max = Some(self.running_max);
                self.running_max = 0.0;
                self.in_block = 0;
            }
        } else {
            self.filled += 1;
        }
        self.ring[self.pos].copy_from_slice(theta);
        self.pos = (self.pos + 1) % self.window;
    }

    fn block_complete(&self) -> bool {
        self.in_block == 0 && self.last_block_max.is_some()
    }

    fn settled(&self, delta: f64) -> bool {
        self.last_block_max.is_some_and(|d| d < delta)
    }

    fn reset(&mut self) {
        self.filled = 0;
        self.pos = 0;
        self.running_max = 0.0;
        self.in_block = 0;
        self.last_block_max = None;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptationMode {
    /// identify `R̂_i` and adapt `θ_Qi` on the same samples
    #[default]
    Simultaneous,
    /// identify first with excitation, then adapt with `R̂_i` fixed and no excitation
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergencePolicy {
    #[default]
    Halt,
    ResetGain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationConfig {
    /// RMS of the injected band-limited noise
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct RegionConfig {
    pub orders: RegionOrders,
    pub ident: RlsConfig,
    pub controller: ControllerConfig,
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub regions: Vec<RegionConfig>,
    /// activation order; ascending when absent
    #[serde(default)]
    pub order: Option<Vec<usize>>,
    pub criterion: ConvergenceCriterion,
    pub excitation: ExcitationConfig,
    #[serde(default)]
    pub mode: AdaptationMode,
    #[serde(default)]
    pub on_divergence: DivergencePolicy,
    /// parameter snapshot period in samples (0 disables)
    #[serde(default = "default_snapshot_interval")]
    pub snapshot_interval: usize,
}

fn default_snapshot_interval() -> usize {
    1000
}

impl ScheduleConfig {
    /// Same configuration for every region, channel 0.
    pub fn uniform(num_regions: usize, region: RegionConfig) -> Self {
        Self {
            regions: vec![region; num_regions],
            order: None,
            criterion: ConvergenceCriterion::default(),
            excitation: ExcitationConfig {
                amplitude: 0.1,
                seed: 7,
            },
            mode: AdaptationMode::Simultaneous,
            on_divergence: DivergencePolicy::Halt,
            snapshot_interval: default_snapshot_interval(),
        }
    }

    pub fn activation_order(&self) -> Vec<usize> {
        self.order.clone().unwrap_or_else(|| (0..self.regions.len()).collect())
    }

    pub fn validate(&self, num_regions: usize, num_channels: usize) -> Result<()> {
        if self.regions.len() != num_regions {
            return Err(Error::Config(format!(
                "{} region configs for {} regions",
                self.regions.len(),
                num_regions
            )));
        }
        for (i, r) in self.regions.iter().enumerate() {
            r.orders.validate()?;
            r.ident.validate()?;
            r.controller.rls.validate()?;
            if r.channel >= num_channels {
                return Err(Error::Config(format!(
                    "region {i} mapped to channel {} but the plant has {num_channels}",
                    r.channel
                )));
            }
        }
        let mut order = self.activation_order();
        order.sort_unstable();
        if order != (0..num_regions).collect::<Vec<_>>() {
            return Err(Error::Config(
                "activation order is not a permutation of the regions".into(),
            ));
        }
        self.criterion.validate()?;
        if !(self.excitation.amplitude >= 0.0 && self.excitation.amplitude.is_finite()) {
            return Err(Error::Config("excitation amplitude must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Activated,
    IdentificationConverged,
    Converged,
    BudgetExhausted,
    GainReset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub k: usize,
    pub region: usize,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSnapshot {
    pub k: usize,
    pub region: usize,
    pub phase: RegionPhase,
    pub theta_s: Vec<f64>,
    pub theta_q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub region: usize,
    pub channel: usize,
    pub phase: RegionPhase,
    pub activated_at: Option<usize>,
    pub frozen_at: Option<usize>,
    pub budget_exhausted: bool,
    pub model: RegionModel,
    pub theta_q: Vec<f64>,
    pub ident_rls: RlsSnapshot,
    pub controller_rls: RlsSnapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Both,
    Identify,
    Adapt,
}

struct Region {
    cfg: RegionConfig,
    phase: RegionPhase,
    stage: Stage,
    a_filter: FilterState,
    e_filter: FilterState,
    u_filter: FilterState,
    ident: RegionIdentifier,
    ctl: ControllerState,
    drift_s: DriftMonitor,
    drift_q: DriftMonitor,
    samples: usize,
    activated_at: Option<usize>,
    frozen_at: Option<usize>,
    budget_exhausted: bool,
    a_i: f64,
}

impl Region {
    fn new(cfg: RegionConfig, analyzer: &crate::lti::TransferFunction, window: usize) -> Result<Self> {
        let mut ctl = ControllerState::new(cfg.controller)?;
        if cfg.controller.error_source == ErrorSource::Subband {
            ctl.set_error_filter(analyzer);
        }
        Ok(Self {
            cfg,
            phase: RegionPhase::Pending,
            stage: Stage::Both,
            a_filter: FilterState::new(analyzer),
            e_filter: FilterState::new(analyzer),
            u_filter: FilterState::new(analyzer),
            ident: RegionIdentifier::new(cfg.orders, cfg.ident)?,
            ctl,
            drift_s: DriftMonitor::new(window, cfg.orders.dim()),
            drift_q: DriftMonitor::new(window, cfg.controller.taps),
            samples: 0,
            activated_at: None,
            frozen_at: None,
            budget_exhausted: false,
            a_i: 0.0,
        })
    }

    fn identifying(&self) -> bool {
        matches!(self.stage, Stage::Both | Stage::Identify)
    }

    fn adapting(&self) -> bool {
        matches!(self.stage, Stage::Both | Stage::Adapt)
    }
}

/// Control computed for one sample before the error is read back.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    /// total injection per actuator channel
    pub u: Vec<f64>,
    pub u_e: f64,
    /// per-region `u_Qi` (zero for pending regions)
    pub u_q: Vec<f64>,
}

struct Excitation {
    rng: ChaCha8Rng,
    filter: Option<FilterState>,
    scale: f64,
}

/// Streaming scheduler state.
pub struct Scheduler {
    bank: FilterBank,
    cfg: ScheduleConfig,
    num_channels: usize,
    regions: Vec<Region>,
    order: Vec<usize>,
    cursor: usize,
    k: usize,
    excitation: Excitation,
    events: Vec<Event>,
    snapshots: Vec<ParamSnapshot>,
    last: Option<ControlOutput>,
}

impl Scheduler {
    pub fn new(bank: FilterBank, cfg: ScheduleConfig, num_channels: usize) -> Result<Self> {
        cfg.validate(bank.num_regions(), num_channels)?;
        let regions = cfg
            .regions
            .iter()
            .zip(&bank.filters)
            .map(|(rc, h)| Region::new(*rc, h, cfg.criterion.window))
            .collect::<Result<Vec<_>>>()?;
        let order = cfg.activation_order();
        let scale = cfg.excitation.amplitude * (bank.num_regions() as f64).sqrt();
        let mut s = Self {
            excitation: Excitation {
                rng: ChaCha8Rng::seed_from_u64(cfg.excitation.seed),
                filter: None,
                scale,
            },
            bank,
            cfg,
            num_channels,
            regions,
            order,
            cursor: 0,
            k: 0,
            events: Vec::new(),
            snapshots: Vec::new(),
            last: None,
        };
        s.activate_current(0);
        Ok(s)
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn config(&self) -> &ScheduleConfig {
        &self.cfg
    }

    pub fn sample_index(&self) -> usize {
        self.k
    }

    pub fn active_region(&self) -> Option<usize> {
        self.order.get(self.cursor).copied()
    }

    pub fn phase(&self, region: usize) -> RegionPhase {
        self.regions[region].phase
    }

    pub fn phases(&self) -> Vec<RegionPhase> {
        self.regions.iter().map(|r| r.phase).collect()
    }

    pub fn all_frozen(&self) -> bool {
        self.cursor >= self.order.len()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn snapshots(&self) -> &[ParamSnapshot] {
        &self.snapshots
    }

    pub fn region_model(&self, region: usize) -> RegionModel {
        self.regions[region].ident.model()
    }

    pub fn controller_theta(&self, region: usize) -> &[f64] {
        self.regions[region].ctl.theta()
    }

    pub fn summaries(&self) -> Vec<RegionSummary> {
        self.regions
            .iter()
            .enumerate()
            .map(|(i, r)| RegionSummary {
                region: i,
                channel: r.cfg.channel,
                phase: r.phase,
                activated_at: r.activated_at,
                frozen_at: r.frozen_at,
                budget_exhausted: r.budget_exhausted,
                model: r.ident.model(),
                theta_q: r.ctl.theta().to_vec(),
                ident_rls: r.ident.rls().snapshot(),
                controller_rls: r.ctl.snapshot(),
            })
            .collect()
    }

    fn activate_current(&mut self, k: usize) {
        let Some(r) = self.active_region() else {
            self.excitation.filter = None;
            return;
        };
        let mode = self.cfg.mode;
        let region = &mut self.regions[r];
        region.phase = RegionPhase::Active;
        region.stage = match mode {
            AdaptationMode::Simultaneous => Stage::Both,
            AdaptationMode::Sequential => Stage::Identify,
        };
        region.activated_at = Some(k);
        region.samples = 0;
        region.drift_s.reset();
        region.drift_q.reset();
        self.excitation.filter = Some(FilterState::new(&self.bank.filters[r]));
        self.events.push(Event {
            k,
            region: r,
            kind: EventKind::Activated,
        });
    }

    fn next_excitation(&mut self) -> f64 {
        let Some(r) = self.active_region() else {
            return 0.0;
        };
        if self.regions[r].stage == Stage::Adapt {
            return 0.0;
        }
        let w: f64 = StandardNormal.sample(&mut self.excitation.rng);
        let scale = self.excitation.scale;
        match self.excitation.filter.as_mut() {
            Some(f) => scale * f.step_unchecked(w),
            None => 0.0,
        }
    }

    /// Excitation the active region would inject, as a stand-alone stream.
    pub fn excitation_stream(&mut self, samples: usize) -> Vec<f64> {
        (0..samples).map(|_| self.next_excitation()).collect()
    }

    /// First half of a sample: reads `a(k)` and returns the control to inject.
    pub fn control(&mut self, a: f64) -> Result<ControlOutput> {
        check_finite(a)?;
        let mut u = vec![0.0; self.num_channels];
        let mut u_q = vec![0.0; self.regions.len()];
        for (i, r) in self.regions.iter_mut().enumerate() {
            let a_i = r.a_filter.step_unchecked(a);
            r.a_i = a_i;
            r.ctl.push_reference(a_i)?;
            r.ident.push_reference(a_i)?;
            if r.phase != RegionPhase::Pending {
                u_q[i] = r.ctl.control_output();
                u[r.cfg.channel] += u_q[i];
            }
        }
        let u_e = self.next_excitation();
        if let Some(r) = self.active_region() {
            u[self.regions[r].cfg.channel] += u_e;
        }
        let out = ControlOutput { u, u_e, u_q };
        self.last = Some(out.clone());
        Ok(out)
    }

    /// Second half of a sample: reads `e(k)`, updates the active region and
    /// advances the schedule.
    pub fn observe(&mut self, e: f64) -> Result<()> {
        check_finite(e)?;
        let last = self
            .last
            .take()
            .ok_or_else(|| Error::Config("observe() called without control()".into()))?;
        let k = self.k;
        let active = self.active_region();

        for (i, r) in self.regions.iter_mut().enumerate() {
            let e_i = r.e_filter.step_unchecked(e);
            let u_i = r.u_filter.step_unchecked(last.u[r.cfg.channel]);
            if Some(i) == active {
                if let Err(err) = Self::update_active(r, e, e_i) {
                    match self.cfg.on_divergence {
                        DivergencePolicy::Halt => {
                            return Err(Error::RegionDiverged {
                                region: i,
                                k,
                                reason: err.to_string(),
                            })
                        }
                        DivergencePolicy::ResetGain => {
                            r.ident.rls_mut().reset_gain();
                            r.ctl.rls_mut().reset_gain();
                            self.events.push(Event {
                                k,
                                region: i,
                                kind: EventKind::GainReset,
                            });
                        }
                    }
                }
            }
            r.ident.push_output(e_i, u_i)?;
        }

        if let Some(i) = active {
            self.check_region(i);
        }
        self.k += 1;
        if self.cfg.snapshot_interval > 0 && self.k.is_multiple_of(self.cfg.snapshot_interval) {
            self.take_snapshots();
        }
        Ok(())
    }

    fn update_active(r: &mut Region, e: f64, e_i: f64) -> Result<()> {
        if r.identifying() {
            r.ident.step_identify(e_i)?;
            let model = r.ident.model();
            r.ctl.set_region_model(&model);
        }
        r.ctl.filtered_reference(r.a_i)?;
        if r.adapting() {
            let err = match r.cfg.controller.error_source {
                ErrorSource::Fullband => e,
                ErrorSource::Subband => e_i,
            };
            r.ctl.adapt(err)?;
        }
        Ok(())
    }

    fn check_region(&mut self, i: usize) {
        let k = self.k;
        let crit = self.cfg.criterion;
        let r = &mut self.regions[i];
        r.samples += 1;
        let theta_s = r.ident.rls().theta().to_vec();
        r.drift_s.push(&theta_s);
        r.drift_q.push(r.ctl.theta());

        let budget = r.samples >= crit.max_samples;
        let boundary = r.drift_s.block_complete() || r.drift_q.block_complete();
        if !budget && !(boundary && r.samples >= crit.min_samples) {
            return;
        }
        let stable = || r.ident.model().is_stable();
        let done = match r.stage {
            Stage::Both => r.drift_s.settled(crit.delta) && r.drift_q.settled(crit.delta) && stable(),
            Stage::Identify => r.drift_s.settled(crit.delta) && stable(),
            Stage::Adapt => r.drift_q.settled(crit.delta),
        };
        if r.stage == Stage::Identify && (done || budget) {
            // R̂ is fixed from here on; adaptation runs without excitation
            r.budget_exhausted |= budget && !done;
            r.stage = Stage::Adapt;
            r.samples = 0;
            r.drift_q.reset();
            self.events.push(Event {
                k,
                region: i,
                kind: if done {
                    EventKind::IdentificationConverged
                } else {
                    EventKind::BudgetExhausted
                },
            });
            return;
        }
        if done || budget {
            r.phase = RegionPhase::Frozen;
            r.frozen_at = Some(k);
            r.budget_exhausted |= !done;
            self.events.push(Event {
                k,
                region: i,
                kind: if done {
                    EventKind::Converged
                } else {
                    EventKind::BudgetExhausted
                },
            });
            self.cursor += 1;
            self.activate_current(k + 1);
        }
    }

    fn take_snapshots(&mut self) {
        let k = self.k;
        for (i, r) in self.regions.iter().enumerate() {
            if r.phase != RegionPhase::Pending {
                self.snapshots.push(ParamSnapshot {
                    k,
                    region: i,
                    phase: r.phase,
                    theta_s: r.ident.rls().theta().to_vec(),
                    theta_q: r.ctl.theta().to_vec(),
                });
            }
        }
    }
}

/// Stopping rule for [`run_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunLimits {
    pub total_samples: usize,
    /// stop this many samples after the last region freezes
    pub tail_after_freeze: Option<usize>,
}

/// Runs the closed loop for exactly `total_samples`.
pub fn run(scenario: &Scenario, total_samples: usize) -> Result<SimulationTrace> {
    run_with(
        scenario,
        RunLimits {
            total_samples,
            tail_after_freeze: None,
        },
    )
}

pub fn run_with(scenario: &Scenario, limits: RunLimits) -> Result<SimulationTrace> {
    scenario.validate()?;
    let bank = scenario.build_bank()?;
    let mut plant = PlantSim::new(scenario)?;
    let mut sched = Scheduler::new(bank, scenario.schedule.clone(), scenario.plants.len())?;
    let mut trace = SimulationTrace::with_capacity(scenario.plants.len(), sched.regions.len(), limits.total_samples);
    let mut settled_at: Option<usize> = None;

    for k in 0..limits.total_samples {
        if let (Some(t), Some(s)) = (limits.tail_after_freeze, settled_at) {
            if k >= s + t {
                break;
            }
        }
        let d = plant.next_disturbance();
        let active = sched.active_region().map_or(-1, |r| r as i64);
        let out = sched.control(d.a)?;
        let e = plant.respond(&d, &out.u)?;
        sched.observe(e)?;
        trace.push(&d, e, &out.u, out.u_e, &out.u_q, active);
        if settled_at.is_none() && sched.all_frozen() {
            settled_at = Some(k + 1);
        }
    }
    trace.events = sched.events.clone();
    trace.snapshots = sched.snapshots.clone();
    trace.regions = sched.summaries();
    trace.band_edges = sched.bank.band_edges.clone();
    trace.sample_rate_hz = scenario.sample_rate_hz;
    Ok(trace)
}

/// Mean-square optimal taps for `region` given the controllers of the regions
/// frozen before it, as recorded in `trace`.
pub fn controller_reference(scenario: &Scenario, trace: &SimulationTrace, region: usize) -> Result<Vec<f64>> {
    let bank = scenario.build_bank()?;
    let cfg = &scenario.schedule;
    if region >= cfg.regions.len() || trace.regions.len() != cfg.regions.len() {
        return Err(Error::Config(format!("no summary for region {region}")));
    }
    let order = cfg.activation_order();
    let before = order.iter().position(|r| *r == region).unwrap_or(0);
    let others: Vec<LoopContribution> = order[..before]
        .iter()
        .map(|&j| LoopContribution {
            plant: &scenario.plants[cfg.regions[j].channel],
            analyzer: Some(&bank.filters[j]),
            taps: &trace.regions[j].theta_q,
        })
        .collect();
    let rc = &cfg.regions[region];
    wiener_controller(&WienerProblem {
        primary: &scenario.primary_path,
        sensor: &scenario.sensor_path,
        disturbance: scenario.disturbance.shaping.as_ref(),
        plant: &scenario.plants[rc.channel],
        analyzer: Some(&bank.filters[region]),
        error_filter: match rc.controller.error_source {
            ErrorSource::Subband => Some(&bank.filters[region]),
            ErrorSource::Fullband => None,
        },
        others: &others,
        taps: rc.controller.taps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_of_constant_history_is_zero() {
        let h = vec![vec![1.0, 2.0]; 50];
        let c = ConvergenceCriterion {
            window: 10,
            delta: 1e-4,
            min_samples: 20,
            max_samples: 1000,
        };
        assert_eq!(max_window_drift(&h, 10), Some(0.0));
        assert_eq!(check_convergence(&c, 50, &h, &h, true), Verdict::Converged);
        assert_eq!(check_convergence(&c, 50, &h, &h, false), Verdict::NotYet);
        assert_eq!(check_convergence(&c, 10, &h, &h, true), Verdict::NotYet);
        assert_eq!(check_convergence(&c, 1000, &h, &h, false), Verdict::BudgetExhausted);
    }

    #[test]
    fn growing_history_not_converged() {
        // 1 % growth per window of 10
        let h: Vec<Vec<f64>> = (0..60).map(|j| vec![1.01f64.powf(j as f64 / 10.0)]).collect();
        let c = ConvergenceCriterion {
            window: 10,
            delta: 1e-4,
            min_samples: 0,
            max_samples: 1000,
        };
        assert_eq!(check_convergence(&c, 60, &h, &h, true), Verdict::NotYet);
        assert!(max_window_drift(&h, 10).unwrap() > 9e-3);
    }

    #[test]
    fn streaming_monitor_matches_history() {
        let w = 8;
        let h: Vec<Vec<f64>> = (0..64)
            .map(|j| vec![(j as f64 * 0.37).sin(), 1.0 + 0.01 * j as f64])
            .collect();
        let mut m = DriftMonitor::new(w, 2);
        for (j, t) in h.iter().enumerate() {
            m.push(t);
            if m.block_complete() && (j + 1) % w == 0 {
                let want = max_window_drift(&h[..=j], w).unwrap();
                assert!((m.last_block_max.unwrap() - want).abs() < 1e-15, "j={j}");
            }
        }
    }

    #[test]
    fn criterion_validation() {
        let mut c = ConvergenceCriterion::default();
        assert!(c.validate().is_ok());
        c.min_samples = c.max_samples + 1;
        assert!(c.validate().is_err());
    }
}
