//! Exponentially weighted recursive least squares.
//!
//! ```text
//! ε(k)  = λ ε°(k) / (λ + φᵀ F(k−1) φ)
//! θ(k)  = θ(k−1) + λ⁻¹ F(k−1) φ ε(k)
//! F(k)  = λ⁻¹ [ F(k−1) − F(k−1) φ φᵀ F(k−1) / (λ + φᵀ F(k−1) φ) ]
//! ```
//!
//! The caller supplies the a-priori error ε°, so the same engine serves both
//! model identification (ε° = y − θᵀφ) and filtered-reference controller
//! adaptation (ε° = −e).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlsConfig {
    /// Forgetting factor in (0, 1].
    pub lambda: f64,
    /// Initial gain `F(0) = σ I`.
    pub initial_gain: f64,
    /// `trace(F)` above this is reported as divergence.
    pub trace_ceiling: f64,
}

impl Default for RlsConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            initial_gain: 1e4,
            trace_ceiling: 1e12,
        }
    }
}

impl RlsConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Config(format!(
                "forgetting factor {} not in (0, 1]",
                self.lambda
            )));
        }
        if !(self.initial_gain.is_finite() && self.initial_gain > 0.0) {
            return Err(Error::Config("initial gain must be positive".into()));
        }
        if self.trace_ceiling.is_nan() || self.trace_ceiling <= 0.0 {
            return Err(Error::Config("trace ceiling must be positive".into()));
        }
        Ok(())
    }
}

/// Estimator state: θ, the gain matrix F (row-major), and λ.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    theta: Vec<f64>,
    gain: Vec<f64>,
    cfg: RlsConfig,
    steps: u64,
    // scratch for F φ
    f_phi: Vec<f64>,
}

/// Exportable view of an estimator for convergence traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlsSnapshot {
    pub theta: Vec<f64>,
    pub gain_diag: Vec<f64>,
    pub lambda: f64,
    pub steps: u64,
}

impl RlsState {
    pub fn new(dim: usize, cfg: RlsConfig) -> Result<Self> {
        cfg.validate()?;
        if dim == 0 {
            return Err(Error::Config("RLS dimension must be positive".into()));
        }
        let mut gain = vec![0.0; dim * dim];
        for i in 0..dim {
            gain[i * dim + i] = cfg.initial_gain;
        }
        Ok(Self {
            theta: vec![0.0; dim],
            gain,
            cfg,
            steps: 0,
            f_phi: vec![0.0; dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        self.check_dim(theta.len())?;
        self.theta.copy_from_slice(theta);
        Ok(())
    }

    /// Row-major `p × p` gain matrix.
    pub fn gain(&self) -> &[f64] {
        &self.gain
    }

    pub fn lambda(&self) -> f64 {
        self.cfg.lambda
    }

    pub fn config(&self) -> &RlsConfig {
        &self.cfg
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn trace(&self) -> f64 {
        let p = self.dim();
        (0..p).map(|i| self.gain[i * p + i]).sum()
    }

    /// Restores `F = σ I` keeping θ.
    pub fn reset_gain(&mut self) {
        let p = self.dim();
        self.gain.fill(0.0);
        for i in 0..p {
            self.gain[i * p + i] = self.cfg.initial_gain;
        }
    }

    pub fn snapshot(&self) -> RlsSnapshot {
        let p = self.dim();
        RlsSnapshot {
            theta: self.theta.clone(),
            gain_diag: (0..p).map(|i| self.gain[i * p + i]).collect(),
            lambda: self.cfg.lambda,
            steps: self.steps,
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got == self.dim() {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.dim(),
                got,
            })
        }
    }

    /// `θᵀ φ`.
    pub fn predict(&self, phi: &[f64]) -> Result<f64> {
        self.check_dim(phi.len())?;
        Ok(dot(&self.theta, phi))
    }

    fn quad_form(&mut self, phi: &[f64]) -> f64 {
        let p = self.dim();
        for i in 0..p {
            self.f_phi[i] = dot(&self.gain[i * p..(i + 1) * p], phi);
        }
        dot(phi, &self.f_phi)
    }

    /// Normalized error `ε = λ ε° / (λ + φᵀ F φ)`.
    pub fn gain_normalize(&mut self, eps0: f64, phi: &[f64]) -> Result<f64> {
        self.check_dim(phi.len())?;
        let q = self.quad_form(phi);
        Ok(self.cfg.lambda * eps0 / (self.cfg.lambda + q))
    }

    /// One RLS step; returns the normalized error ε(k). On a non-finite result
    /// or a gain trace above the ceiling the state is left unchanged.
    pub fn update(&mut self, phi: &[f64], eps0: f64) -> Result<f64> {
        self.check_dim(phi.len())?;
        if !eps0.is_finite() {
            return Err(Error::Divergence(format!("non-finite innovation {eps0}")));
        }
        if let Some(bad) = phi.iter().find(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!("non-finite regressor entry {bad}")));
        }
        let lambda = self.cfg.lambda;
        let p = self.dim();
        let denom = lambda + self.quad_form(phi);
        let eps = lambda * eps0 / denom;

        let prev_theta = self.theta.clone();
        let prev_gain = self.gain.clone();

        for i in 0..p {
            self.theta[i] += self.f_phi[i] * eps / lambda;
        }
        let inv_lambda = 1.0 / lambda;
        for i in 0..p {
            let fi = self.f_phi[i] / denom;
            let row = &mut self.gain[i * p..(i + 1) * p];
            for (j, g) in row.iter_mut().enumerate() {
                *g = (*g - fi * self.f_phi[j]) * inv_lambda;
            }
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let m = 0.5 * (self.gain[i * p + j] + self.gain[j * p + i]);
                self.gain[i * p + j] = m;
                self.gain[j * p + i] = m;
            }
        }

        let tr = self.trace();
        let finite = self.theta.iter().all(|v| v.is_finite()) && tr.is_finite();
        if !finite || tr > self.cfg.trace_ceiling {
            self.theta = prev_theta;
            self.gain = prev_gain;
            return Err(Error::Divergence(if finite {
                format!("gain trace {tr:.3e} exceeds ceiling {:.3e}", self.cfg.trace_ceiling)
            } else {
                "non-finite parameter update".into()
            }));
        }
        self.steps += 1;
        Ok(eps)
    }

    /// Cholesky feasibility of F; used by debug checks and tests.
    pub fn gain_is_positive_definite(&self) -> bool {
        let p = self.dim();
        let mut l = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..=i {
                let mut s = self.gain[i * p + j];
                for k in 0..j {
                    s -= l[i * p + k] * l[j * p + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return false;
                    }
                    l[i * p + i] = s.sqrt();
                } else {
                    l[i * p + j] = s / l[j * p + j];
                }
            }
        }
        true
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
