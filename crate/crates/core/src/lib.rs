//! Frequency-separated adaptive feedforward vibration rejection.
//!
//! The spectrum is split into uniform regions by a cosine-modulated filter
//! bank. Each region gets a low-order plant model identified by recursive
//! least squares and a short FIR feedforward controller adapted on the
//! filtered reference. Regions are trained one at a time and then frozen.

pub mod analysis;
pub mod error;
pub mod ffc;
pub mod filterbank;
pub mod lti;
pub mod plantsim;
pub mod rls;
pub mod scheduler;
pub mod sysid;

pub use error::{Error, Result};
pub use ffc::{ControllerConfig, ControllerState, ErrorSource, UpdateSign};
pub use filterbank::{design_bank, BankSpec, FilterBank};
pub use lti::{FilterState, FrequencyResponsePoint, TransferFunction};
pub use plantsim::{
    make_synthetic_scenario, run_open_loop, BankConfig, Difficulty, PlantSim, Scenario, SignalSpec, SimulationTrace,
    TraceSummary,
};
pub use rls::{RlsConfig, RlsSnapshot, RlsState};
pub use scheduler::{
    controller_reference, run, run_with, AdaptationMode, ConvergenceCriterion, DivergencePolicy, Event, EventKind,
    ExcitationConfig, RegionConfig, RegionPhase, RunLimits, ScheduleConfig, Scheduler,
};
pub use sysid::{RegionIdentifier, RegionModel, RegionOrders};
