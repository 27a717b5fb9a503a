//! Per-region identification of `R̂_i = B̂/Â` and the disturbance-path FIR `M̂`
//! from subband-filtered error, control and reference signals.
//!
//! Regression model for region `i`:
//!
//! ```text
//! e_i(k) = θ_Aᵀ [e_i(k−1) … e_i(k−n_A)]
//!        + θ_Bᵀ [u_i(k−1) … u_i(k−n_B)]
//!        + θ_Mᵀ [a_i(k)   … a_i(k−n_M+1)]
//! ```
//!
//! so `Â(q⁻¹) = 1 − θ_Aᵀ[q⁻¹ … q⁻ⁿᴬ]` and `B̂(q⁻¹) = θ_Bᵀ[q⁻¹ … q⁻ⁿᴮ]`.

use serde::{Deserialize, Serialize};

use crate::analysis::{frf_compare, FrfDiscrepancy};
use crate::error::{check_finite, Error, Result};
use crate::lti::{is_schur_stable, TransferFunction};
use crate::rls::{dot, RlsConfig, RlsState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionOrders {
    pub n_a: usize,
    pub n_b: usize,
    pub n_m: usize,
}

impl Default for RegionOrders {
    fn default() -> Self {
        Self { n_a: 5, n_b: 5, n_m: 5 }
    }
}

impl RegionOrders {
    pub fn new(n_a: usize, n_b: usize, n_m: usize) -> Self {
        Self { n_a, n_b, n_m }
    }

    pub fn dim(&self) -> usize {
        self.n_a + self.n_b + self.n_m
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_a == 0 || self.n_b == 0 || self.n_m == 0 {
            return Err(Error::Config(format!("region orders must be >= 1: {self:?}")));
        }
        Ok(())
    }
}

/// Sliding histories forming `φ_S = [φ_e; φ_u; φ_a]`.
///
/// Per sample the caller first pushes the current reference with
/// [`push_reference`](Self::push_reference), reads `phi()` for the a-priori
/// prediction, then commits the current error and control with
/// [`push_output`](Self::push_output).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRegressor {
    orders: RegionOrders,
    phi: Vec<f64>,
}

impl RegionRegressor {
    pub fn new(orders: RegionOrders) -> Self {
        Self {
            orders,
            phi: vec![0.0; orders.dim()],
        }
    }

    pub fn orders(&self) -> RegionOrders {
        self.orders
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn phi_e(&self) -> &[f64] {
        &self.phi[..self.orders.n_a]
    }

    pub fn phi_u(&self) -> &[f64] {
        &self.phi[self.orders.n_a..self.orders.n_a + self.orders.n_b]
    }

    pub fn phi_a(&self) -> &[f64] {
        &self.phi[self.orders.n_a + self.orders.n_b..]
    }

    fn shift_in(slot: &mut [f64], v: f64) {
        slot.rotate_right(1);
        slot[0] = v;
    }

    /// Shifts `a_i(k)` into the head of `φ_a`.
    pub fn push_reference(&mut self, a_i: f64) -> Result<()> {
        check_finite(a_i)?;
        let start = self.orders.n_a + self.orders.n_b;
        Self::shift_in(&mut self.phi[start..], a_i);
        Ok(())
    }

    /// Shifts `e_i(k)`, `u_i(k)` in; they appear at lag 1 in the next `φ`.
    pub fn push_output(&mut self, e_i: f64, u_i: f64) -> Result<()> {
        check_finite(e_i)?;
        check_finite(u_i)?;
        let (na, nb) = (self.orders.n_a, self.orders.n_b);
        Self::shift_in(&mut self.phi[..na], e_i);
        Self::shift_in(&mut self.phi[na..na + nb], u_i);
        Ok(())
    }

    /// Convenience for one full sample: `e_i(k−1)`, `u_i(k−1)` enter the lag
    /// histories and `a_i(k)` the reference history.
    pub fn push_sample(&mut self, e_prev: f64, u_prev: f64, a_i: f64) -> Result<()> {
        self.push_output(e_prev, u_prev)?;
        self.push_reference(a_i)
    }

    pub fn clear(&mut self) {
        self.phi.fill(0.0);
    }
}

/// Partitioned estimate `θ_S = [θ_A; θ_B; θ_M]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionModel {
    pub orders: RegionOrders,
    pub theta_a: Vec<f64>,
    pub theta_b: Vec<f64>,
    pub theta_m: Vec<f64>,
}

impl RegionModel {
    pub fn zeros(orders: RegionOrders) -> Self {
        Self {
            orders,
            theta_a: vec![0.0; orders.n_a],
            theta_b: vec![0.0; orders.n_b],
            theta_m: vec![0.0; orders.n_m],
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        [&self.theta_a[..], &self.theta_b, &self.theta_m].concat()
    }

    /// `R̂ = (θ_B q⁻¹…) / (1 − θ_A q⁻¹…)`.
    pub fn rhat(&self, fs: f64) -> Result<TransferFunction> {
        let (b, a) = self.rhat_coeffs();
        TransferFunction::new(b, a, fs)
    }

    pub(crate) fn rhat_coeffs(&self) -> (Vec<f64>, Vec<f64>) {
        let mut b = Vec::with_capacity(self.theta_b.len() + 1);
        b.push(0.0);
        b.extend_from_slice(&self.theta_b);
        let mut a = Vec::with_capacity(self.theta_a.len() + 1);
        a.push(1.0);
        a.extend(self.theta_a.iter().map(|v| -v));
        (b, a)
    }

    /// FIR `M̂` with taps at lags `0 … n_M−1`.
    pub fn mhat(&self, fs: f64) -> Result<TransferFunction> {
        TransferFunction::fir(self.theta_m.clone(), fs)
    }

    pub fn is_stable(&self) -> bool {
        is_schur_stable(&self.rhat_coeffs().1)
    }
}

/// Splits `θ_S` into its `A`, `B`, `M` parts.
pub fn extract_model(theta_s: &[f64], orders: RegionOrders) -> Result<RegionModel> {
    if theta_s.len() != orders.dim() {
        return Err(Error::Dimension {
            expected: orders.dim(),
            got: theta_s.len(),
        });
    }
    let (a, rest) = theta_s.split_at(orders.n_a);
    let (b, m) = rest.split_at(orders.n_b);
    Ok(RegionModel {
        orders,
        theta_a: a.to_vec(),
        theta_b: b.to_vec(),
        theta_m: m.to_vec(),
    })
}

/// A-priori prediction `ê°_i(k) = θ_Aᵀφ_e + θ_Bᵀφ_u + θ_Mᵀφ_a`.
pub fn predict_error(model: &RegionModel, reg: &RegionRegressor) -> Result<f64> {
    if model.orders != reg.orders() {
        return Err(Error::Dimension {
            expected: model.orders.dim(),
            got: reg.orders().dim(),
        });
    }
    Ok(dot(&model.theta_a, reg.phi_e()) + dot(&model.theta_b, reg.phi_u()) + dot(&model.theta_m, reg.phi_a()))
}

/// Outcome of one identification step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentStep {
    /// `ê°_i(k)`
    pub prediction: f64,
    /// `ε°_i(k) = e_i(k) − ê°_i(k)`
    pub prior_error: f64,
    /// normalized `ε_i(k)`
    pub posterior_error: f64,
}

/// RLS identifier for one region.
#[derive(Debug, Clone)]
pub struct RegionIdentifier {
    orders: RegionOrders,
    rls: RlsState,
    reg: RegionRegressor,
}

impl RegionIdentifier {
    pub fn new(orders: RegionOrders, cfg: RlsConfig) -> Result<Self> {
        orders.validate()?;
        Ok(Self {
            orders,
            rls: RlsState::new(orders.dim(), cfg)?,
            reg: RegionRegressor::new(orders),
        })
    }

    pub fn orders(&self) -> RegionOrders {
        self.orders
    }

    pub fn rls(&self) -> &RlsState {
        &self.rls
    }

    pub fn rls_mut(&mut self) -> &mut RlsState {
        &mut self.rls
    }

    pub fn regressor(&self) -> &RegionRegressor {
        &self.reg
    }

    pub fn model(&self) -> RegionModel {
        extract_model(self.rls.theta(), self.orders).expect("dimension fixed at construction")
    }

    pub fn push_reference(&mut self, a_i: f64) -> Result<()> {
        self.reg.push_reference(a_i)
    }

    /// One RLS update against `e_i(k)` with the current regressor.
    pub fn step_identify(&mut self, e_i: f64) -> Result<IdentStep> {
        check_finite(e_i)?;
        let phi = self.reg.phi();
        let prediction = self.rls.predict(phi)?;
        let prior_error = e_i - prediction;
        let posterior_error = self.rls.update(phi, prior_error)?;
        Ok(IdentStep {
            prediction,
            prior_error,
            posterior_error,
        })
    }

    pub fn push_output(&mut self, e_i: f64, u_i: f64) -> Result<()> {
        self.reg.push_output(e_i, u_i)
    }
}

/// In-band FRF fit of an identified model against the true plant over the
/// central 80 % of `band`.
pub fn in_band_fit_report(
    model: &TransferFunction,
    true_plant: &TransferFunction,
    band: (f64, f64),
) -> Result<FrfDiscrepancy> {
    frf_compare(model, true_plant, band)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_history_gives_zero_regressor() {
        let mut r = RegionRegressor::new(RegionOrders::new(2, 2, 2));
        r.push_sample(0.0, 0.0, 0.0).unwrap();
        assert!(r.phi().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn error_history_ordering() {
        let mut r = RegionRegressor::new(RegionOrders::new(2, 1, 1));
        r.push_output(4.0, 0.0).unwrap(); // k-2
        r.push_output(3.0, 0.0).unwrap(); // k-1
        assert_eq!(r.phi_e(), &[3.0, 4.0]);
    }

    #[test]
    fn reference_history_is_current_first() {
        let mut r = RegionRegressor::new(RegionOrders::new(1, 1, 3));
        for a in [1.0, 2.0, 3.0] {
            r.push_reference(a).unwrap();
        }
        assert_eq!(r.phi_a(), &[3.0, 2.0, 1.0]);
        assert!(r.push_reference(f64::NAN).is_err());
        assert!(r.push_output(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn zero_model_predicts_zero() {
        let orders = RegionOrders::new(2, 2, 2);
        let mut r = RegionRegressor::new(orders);
        r.push_sample(1.0, 2.0, 3.0).unwrap();
        assert_eq!(predict_error(&RegionModel::zeros(orders), &r).unwrap(), 0.0);
    }

    #[test]
    fn m_only_model_uses_reference_history() {
        let orders = RegionOrders::new(1, 1, 2);
        let mut m = RegionModel::zeros(orders);
        m.theta_m = vec![0.5, -0.25];
        let mut r = RegionRegressor::new(orders);
        r.push_reference(2.0).unwrap();
        r.push_reference(4.0).unwrap();
        assert_eq!(predict_error(&m, &r).unwrap(), 0.5 * 4.0 - 0.25 * 2.0);
    }

    #[test]
    fn extract_model_maps_denominator() {
        let m = extract_model(&[0.8, 0.3, 0.5], RegionOrders::new(1, 1, 1)).unwrap();
        let r = m.rhat(1000.0).unwrap();
        assert_eq!(r.b(), &[0.0, 0.3]);
        assert_eq!(r.a(), &[1.0, -0.8]);
        assert_eq!(m.mhat(1000.0).unwrap().b(), &[0.5]);
        let fir = extract_model(&[0.0, 0.3, 0.5], RegionOrders::new(1, 1, 1)).unwrap();
        assert!(fir.rhat(1000.0).unwrap().is_fir());
        assert!(extract_model(&[1.0], RegionOrders::new(1, 1, 1)).is_err());
    }

    #[test]
    fn zero_excitation_leaves_theta() {
        let mut id = RegionIdentifier::new(RegionOrders::new(2, 2, 2), RlsConfig::default()).unwrap();
        for _ in 0..100 {
            id.push_reference(0.0).unwrap();
            id.step_identify(0.0).unwrap();
            id.push_output(0.0, 0.0).unwrap();
        }
        assert!(id.model().theta().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn prediction_is_linear_in_theta() {
        let orders = RegionOrders::new(2, 2, 2);
        let mut r = RegionRegressor::new(orders);
        r.push_sample(0.3, -1.2, 0.7).unwrap();
        r.push_sample(1.1, 0.4, -0.2).unwrap();
        let t1 = [0.1, -0.2, 0.3, 0.4, -0.5, 0.6];
        let t2 = [1.0, 0.5, -0.5, 0.25, 0.0, -1.0];
        let m1 = extract_model(&t1, orders).unwrap();
        let m2 = extract_model(&t2, orders).unwrap();
        let sum: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let ms = extract_model(&sum, orders).unwrap();
        let lhs = predict_error(&ms, &r).unwrap();
        let rhs = 2.0 * predict_error(&m1, &r).unwrap() - 3.0 * predict_error(&m2, &r).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn identical_model_fits_exactly() {
        let tf = TransferFunction::new(vec![0.0, 0.3, 0.1], vec![1.0, -0.8], 1000.0).unwrap();
        let d = in_band_fit_report(&tf, &tf, (100.0, 200.0)).unwrap();
        assert_eq!(d.max_mag_db, 0.0);
        assert_eq!(d.max_phase_deg, 0.0);
    }

    #[test]
    fn zero_model_reports_full_gain() {
        let zero = TransferFunction::gain(0.0, 1000.0);
        let unit = TransferFunction::identity(1000.0);
        let d = in_band_fit_report(&zero, &unit, (100.0, 200.0)).unwrap();
        assert!((d.max_abs_err - 1.0).abs() < 1e-15);
        assert!(d.max_mag_db > 100.0);
    }
}
