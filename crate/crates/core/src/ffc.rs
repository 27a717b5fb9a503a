//! Per-region filtered-reference FIR feedforward controller.
//!
//! Region `i` drives `u_Qi(k) = θ_Qᵀ [a_i(k) … a_i(k−n_w+1)]` and adapts θ_Q
//! by RLS on the filtered reference `x_i = R̂_i a_i`, regressor
//! `[x_i(k) … x_i(k−n_w+1)]`.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::lti::{is_schur_stable, FilterState, TransferFunction};
use crate::rls::{dot, RlsConfig, RlsSnapshot, RlsState};
use crate::sysid::RegionModel;

/// Sign of the innovation fed to the controller RLS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateSign {
    /// innovation `−e(k)`: descends the squared error for `e = R u + v_b + n`
    #[default]
    Descent,
    /// innovation `+e(k)` as printed in the update law
    Literal,
}

/// Which error drives controller adaptation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSource {
    #[default]
    Fullband,
    /// `e_i = H_i e`; the filtered reference then also passes through `H_i`
    Subband,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// FIR length `n_w = n_Q + 1`.
    pub taps: usize,
    pub rls: RlsConfig,
    #[serde(default)]
    pub sign: UpdateSign,
    #[serde(default)]
    pub error_source: ErrorSource,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            taps: 4,
            rls: RlsConfig::default(),
            sign: UpdateSign::Descent,
            error_source: ErrorSource::Fullband,
        }
    }
}

/// Direct-form-I realization of `R̂_i` whose coefficients may be swapped
/// between samples without disturbing the signal histories.
#[derive(Debug, Clone, PartialEq)]
struct ModelFilter {
    b: Vec<f64>,
    a: Vec<f64>,
    inputs: Vec<f64>,
    outputs: Vec<f64>,
}

impl ModelFilter {
    fn identity() -> Self {
        Self {
            b: vec![1.0],
            a: vec![1.0],
            inputs: vec![0.0],
            outputs: Vec::new(),
        }
    }

    fn retune(&mut self, b: &[f64], a: &[f64]) {
        self.b.clear();
        self.b.extend(b.iter().map(|v| v / a[0]));
        self.a.clear();
        self.a.extend(a.iter().map(|v| v / a[0]));
        self.inputs.resize(self.b.len(), 0.0);
        self.outputs.resize(self.a.len() - 1, 0.0);
    }

    fn step(&mut self, x: f64) -> f64 {
        self.inputs.rotate_right(1);
        self.inputs[0] = x;
        let y = dot(&self.b, &self.inputs) - dot(&self.a[1..], &self.outputs);
        if !self.outputs.is_empty() {
            self.outputs.rotate_right(1);
            self.outputs[0] = y;
        }
        y
    }
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    cfg: ControllerConfig,
    rls: RlsState,
    x_filter: ModelFilter,
    error_filter: Option<FilterState>,
    phi_a: Vec<f64>,
    phi_x: Vec<f64>,
}

impl ControllerState {
    pub fn new(cfg: ControllerConfig) -> Result<Self> {
        if cfg.taps == 0 {
            return Err(Error::Config("controller needs at least one tap".into()));
        }
        Ok(Self {
            cfg,
            rls: RlsState::new(cfg.taps, cfg.rls)?,
            x_filter: ModelFilter::identity(),
            error_filter: None,
            phi_a: vec![0.0; cfg.taps],
            phi_x: vec![0.0; cfg.taps],
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn theta(&self) -> &[f64] {
        self.rls.theta()
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        self.rls.set_theta(theta)
    }

    pub fn rls(&self) -> &RlsState {
        &self.rls
    }

    pub fn rls_mut(&mut self) -> &mut RlsState {
        &mut self.rls
    }

    pub fn phi_a(&self) -> &[f64] {
        &self.phi_a
    }

    pub fn phi_x(&self) -> &[f64] {
        &self.phi_x
    }

    /// Replaces the plant model used for the filtered reference.
    pub fn set_plant_model(&mut self, b: &[f64], a: &[f64]) -> Result<()> {
        if b.is_empty() || a.is_empty() || a[0] == 0.0 {
            return Err(Error::Config("invalid plant model coefficients".into()));
        }
        self.x_filter.retune(b, a);
        Ok(())
    }

    /// Adopts `R̂_i` for the filtered reference if it is stable; otherwise
    /// keeps the previous model and returns false.
    pub fn set_region_model(&mut self, model: &RegionModel) -> bool {
        let (b, a) = model.rhat_coeffs();
        if !is_schur_stable(&a) {
            return false;
        }
        self.x_filter.retune(&b, &a);
        true
    }

    /// Extra filter applied to the filtered reference, matching whatever
    /// filter sits in front of the error used by [`adapt`](Self::adapt).
    pub fn set_error_filter(&mut self, tf: &TransferFunction) {
        self.error_filter = Some(FilterState::new(tf));
    }

    /// Shifts `a_i(k)` into the control regressor.
    pub fn push_reference(&mut self, a_i: f64) -> Result<()> {
        check_finite(a_i)?;
        self.phi_a.rotate_right(1);
        self.phi_a[0] = a_i;
        Ok(())
    }

    /// `u_Qi(k) = θ_Q(k−1)ᵀ φ_a(k)`.
    pub fn control_output(&self) -> f64 {
        dot(self.rls.theta(), &self.phi_a)
    }

    /// `x_i(k) = R̂_i a_i(k)` (times the error filter, if any); also shifts it
    /// into `φ_x`.
    pub fn filtered_reference(&mut self, a_i: f64) -> Result<f64> {
        check_finite(a_i)?;
        let mut x = self.x_filter.step(a_i);
        if let Some(f) = self.error_filter.as_mut() {
            x = f.step_unchecked(x);
        }
        if !x.is_finite() {
            return Err(Error::Divergence("filtered reference is not finite".into()));
        }
        self.phi_x.rotate_right(1);
        self.phi_x[0] = x;
        Ok(x)
    }

    /// One RLS step on θ_Q driven by the measured error.
    pub fn adapt(&mut self, e: f64) -> Result<f64> {
        check_finite(e)?;
        let innovation = match self.cfg.sign {
            UpdateSign::Descent => -e,
            UpdateSign::Literal => e,
        };
        self.rls.update(&self.phi_x, innovation)
    }

    pub fn snapshot(&self) -> RlsSnapshot {
        self.rls.snapshot()
    }
}

/// `u_A(k) = Σ u_Qi(k)` over contributing regions.
pub fn total_control<I: IntoIterator<Item = f64>>(active: I) -> f64 {
    active.into_iter().sum()
}
