//! Random-vibration-theory conversion of effective amplitude spectra to
//! pseudo-spectral acceleration, non-ergodic PSA factors with correlated
//! epistemic sampling, aleatory residual partitioning, and logic-tree hazard.
//!
//! The modules build on one another:
//!
//! * [`spectra`]: grids, spectra, oscillators, moments and extrapolation;
//! * [`duration`]: ground-motion and RMS durations;
//! * [`peak_factor`]: the first-passage peak-factor distribution;
//! * [`rvt_engine`]: the EAS to PSA pipeline;
//! * [`nonergodic`]: F_nerg factors, field sampling and the aleatory model;
//! * [`residuals`]: random-effects partition of total residuals;
//! * [`hazard`]: hazard curves and logic-tree fractiles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod duration;
pub mod error;
pub mod hazard;
pub mod nonergodic;
pub mod peak_factor;
pub mod quadrature;
pub mod residuals;
pub mod rvt_engine;
pub mod spectra;

pub use error::{Error, Result};
pub use nonergodic::{
    fnerg_factor, sample_field, AleatoryCoefficients, CorrelationModel, FnergResult, NonErgodicField,
};
pub use rvt_engine::{psa_single, psa_spectrum, PsaSpectrum, RvtConfig};
pub use spectra::{EasSpectrum, FrequencyGrid, Oscillator, Scenario};
