//! Amplitude spectrum → PSA through random vibration theory.
//!
//! For each oscillator the input spectrum (extended to the configured band) is
//! filtered by the oscillator transfer, its moments give x_rms = sqrt(m0/D_rms)
//! and the V75 peak factor, and PSA = E[PF]·x_rms. PSA carries the amplitude
//! units of the input spectrum.

use rayon::prelude::*;
use serde::Serialize;

use crate::duration::{as96_d575, as96_interval, rms_duration, As96Coefficients, DurationResult, RmsDurationModel};
use crate::error::{Error, Result};
use crate::peak_factor::{PeakFactorInputs, DEFAULT_BANDWIDTH_EXPONENT};
use crate::spectra::{
    bandwidth_delta, corner_frequency, extrapolate_high, extrapolate_low, kappa_from_vs30, log_space,
    oscillator_transfer, spectral_moments, EasSpectrum, Oscillator, Scenario, StressDropTable,
};

/// Shortest and longest periods the engine accepts, in seconds.
pub const PERIOD_RANGE: (f64, f64) = (0.01, 10.0);

/// Where the ground-motion duration comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DgmSource {
    /// Median AS96 duration for the 5%-to-`fraction` Arias interval.
    As96 { fraction: f64 },
    /// A fixed duration in seconds.
    User(f64),
}

impl Default for DgmSource {
    fn default() -> Self {
        DgmSource::As96 { fraction: 0.85 }
    }
}

/// Model selections and numerical settings of the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct RvtConfig {
    pub damping: f64,
    pub periods: Vec<f64>,
    pub dgm: DgmSource,
    pub rms: RmsDurationModel,
    /// Extend spectra to `low_hz`/`high_hz` before integration.
    pub extrapolate: bool,
    pub low_hz: f64,
    pub high_hz: f64,
    /// Absolute tolerance of the peak-factor integral.
    pub pf_tolerance: f64,
    pub bandwidth_exponent: f64,
    pub as96: As96Coefficients,
    /// Stress-drop relation for the omega-square corner when the scenario has none.
    pub stress_drop: Option<StressDropTable>,
    /// Overrides the V_S30-based kappa.
    pub kappa: Option<f64>,
}

impl Default for RvtConfig {
    fn default() -> Self {
        Self {
            damping: 0.05,
            periods: default_periods(),
            dgm: DgmSource::default(),
            rms: RmsDurationModel::ClosedForm,
            extrapolate: true,
            low_hz: 0.01,
            high_hz: 100.0,
            pf_tolerance: 1e-10,
            bandwidth_exponent: DEFAULT_BANDWIDTH_EXPONENT,
            as96: As96Coefficients::shipped(),
            stress_drop: Some(StressDropTable::shipped()),
            kappa: None,
        }
    }
}

/// 20 log-spaced periods per decade over 0.01–10 s.
pub fn default_periods() -> Vec<f64> {
    log_space(PERIOD_RANGE.0, PERIOD_RANGE.1, 61)
}

impl RvtConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = PERIOD_RANGE;
        if self.periods.is_empty() {
            return Err(Error::validation("period grid", "must not be empty"));
        }
        if self.periods.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("period grid", "periods must be strictly ascending"));
        }
        let eps = 1e-9;
        if self.periods[0] < lo * (1.0 - eps) || self.periods[self.periods.len() - 1] > hi * (1.0 + eps) {
            return Err(Error::validation(
                "period grid",
                format!("periods must lie within [{lo}, {hi}] s"),
            ));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::validation(
                "damping",
                format!("must satisfy 0 < zeta < 1, got {}", self.damping),
            ));
        }
        if !(self.low_hz > 0.0 && self.high_hz > self.low_hz) {
            return Err(Error::validation("extrapolation targets", "need 0 < low_hz < high_hz"));
        }
        if !(self.pf_tolerance > 0.0) {
            return Err(Error::validation("pf_tolerance", "must be > 0"));
        }
        if let DgmSource::User(d) = self.dgm {
            DurationResult::user(d)?;
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0) {
                return Err(Error::validation("kappa", format!("must be > 0, got {k}")));
            }
        }
        self.as96.validate()
    }

    pub fn with_periods(mut self, periods: Vec<f64>) -> Self {
        self.periods = periods;
        self
    }

    pub fn with_dgm(mut self, dgm: DgmSource) -> Self {
        self.dgm = dgm;
        self
    }

    pub fn without_extrapolation(mut self) -> Self {
        self.extrapolate = false;
        self
    }
}

/// Ground-motion duration for a scenario under `cfg`.
pub fn ground_motion_duration(scn: &Scenario, cfg: &RvtConfig) -> Result<DurationResult> {
    match cfg.dgm {
        DgmSource::User(d) => DurationResult::user(d),
        DgmSource::As96 { fraction } => {
            let d575 = as96_d575(scn, &cfg.as96, cfg.stress_drop.as_ref())?;
            if (fraction - 0.75).abs() < 1e-12 {
                Ok(d575)
            } else {
                as96_interval(&d575, fraction, &cfg.as96)
            }
        }
    }
}

/// Extends `spec` to the configured band where it falls short.
pub fn extend_spectrum(spec: &EasSpectrum, scn: &Scenario, cfg: &RvtConfig) -> Result<EasSpectrum> {
    let mut out = spec.clone();
    if spec.f_min() > cfg.low_hz {
        let fc = corner_frequency(scn, cfg.stress_drop.as_ref())?;
        out = extrapolate_low(&out, fc, cfg.low_hz)?;
    }
    if spec.f_max() < cfg.high_hz {
        let kappa = match cfg.kappa {
            Some(k) => k,
            None => kappa_from_vs30(scn.vs30_ms)?,
        };
        out = extrapolate_high(&out, kappa, cfg.high_hz)?;
    }
    Ok(out)
}

/// Per-period quantities behind a PSA value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsaDiagnostics {
    pub period: f64,
    pub psa: f64,
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub delta: f64,
    pub delta_e: f64,
    pub n_z: f64,
    pub pf: f64,
    pub pf_error: f64,
    pub d_gm: f64,
    pub d_rms: f64,
}

/// PSA over a period grid, with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PsaSpectrum {
    pub periods: Vec<f64>,
    pub psa: Vec<f64>,
    pub diagnostics: Vec<PsaDiagnostics>,
    pub duration: DurationResult,
}

/// A spectrum ready for per-oscillator evaluation.
#[derive(Debug, Clone)]
pub struct PreparedMotion {
    spectrum: EasSpectrum,
    duration: DurationResult,
    scenario: Scenario,
}

impl PreparedMotion {
    pub fn new(spec: &EasSpectrum, scn: &Scenario, cfg: &RvtConfig) -> Result<Self> {
        scn.validate()?;
        let spectrum = if cfg.extrapolate {
            extend_spectrum(spec, scn, cfg)?
        } else {
            spec.clone()
        };
        Ok(Self {
            spectrum,
            duration: ground_motion_duration(scn, cfg)?,
            scenario: scn.clone(),
        })
    }

    pub fn spectrum(&self) -> &EasSpectrum {
        &self.spectrum
    }

    pub fn duration(&self) -> &DurationResult {
        &self.duration
    }

    /// RVT PSA of one oscillator.
    pub fn psa(&self, osc: &Oscillator, cfg: &RvtConfig) -> Result<PsaDiagnostics> {
        let response = self
            .spectrum
            .filtered(&oscillator_transfer(osc, self.spectrum.grid()))?;
        let moments = spectral_moments(&response)?;
        let bw = bandwidth_delta(&moments, cfg.bandwidth_exponent)?;
        let pfi = PeakFactorInputs {
            moments,
            d_gm: self.duration.d_gm,
            bandwidth_exponent: cfg.bandwidth_exponent,
        };
        let pf = pfi.distribution()?.expected(cfg.pf_tolerance)?;
        let d_rms = rms_duration(&self.duration, osc, &self.scenario, &cfg.rms)?;
        let psa = pf.value * (moments.m0 / d_rms).sqrt();
        Ok(PsaDiagnostics {
            period: osc.period(),
            psa,
            m0: moments.m0,
            m1: moments.m1,
            m2: moments.m2,
            delta: bw.delta,
            delta_e: bw.delta_e,
            n_z: pf.n_z,
            pf: pf.value,
            pf_error: pf.error,
            d_gm: self.duration.d_gm,
            d_rms,
        })
    }
}

/// PSA of a single oscillator.
pub fn psa_single(
    spec: &EasSpectrum,
    osc: &Oscillator,
    scn: &Scenario,
    cfg: &RvtConfig,
) -> Result<(f64, PsaDiagnostics)> {
    let motion = PreparedMotion::new(spec, scn, cfg)?;
    let d = motion.psa(osc, cfg)?;
    Ok((d.psa, d))
}

/// PSA over `cfg.periods`. Periods are evaluated in parallel; the output
/// order follows `cfg.periods`.
pub fn psa_spectrum(spec: &EasSpectrum, scn: &Scenario, cfg: &RvtConfig) -> Result<PsaSpectrum> {
    cfg.validate()?;
    let motion = PreparedMotion::new(spec, scn, cfg)?;
    psa_spectrum_prepared(&motion, cfg)
}

pub(crate) fn psa_spectrum_prepared(motion: &PreparedMotion, cfg: &RvtConfig) -> Result<PsaSpectrum> {
    let diagnostics = cfg
        .periods
        .par_iter()
        .map(|&t| motion.psa(&Oscillator::from_period(t, cfg.damping)?, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(PsaSpectrum {
        periods: cfg.periods.clone(),
        psa: diagnostics.iter().map(|d| d.psa).collect(),
        diagnostics,
        duration: motion.duration.clone(),
    })
}
