use thiserror::Error;

/// Errors raised anywhere in the control pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input sample: {0}")]
    NonFiniteInput(f64),

    #[error("frequency {freq_hz} Hz outside [0, {nyquist_hz}] Hz")]
    FrequencyOutOfRange { freq_hz: f64, nyquist_hz: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("filter bank design cannot reach {target_db} dB; achievable {achievable_db:.1} dB")]
    Design { target_db: f64, achievable_db: f64 },

    #[error("RLS diverged: {0}")]
    Divergence(String),

    #[error("region {region} diverged at sample {k}: {reason}")]
    RegionDiverged { region: usize, k: usize, reason: String },

    #[error("signal too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("trace format: {0}")]
    Trace(String),
}

pub type Result<T> = std::result::Result<T, Error>;

#[inline]
pub(crate) fn check_finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFiniteInput(x))
    }
}
