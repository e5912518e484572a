//! Vanmarcke (1975) first-passage peak factor.
//!
//! The peak factor r = x_max/x_rms has CDF
//!
//! ```text
//! F(r) = (1 - e^{-r²/2}) · exp(-N_z · e^{-r²/2} · (1 - e^{-√(π/2)·δₑ·r}) / (1 - e^{-r²/2}))
//! ```
//!
//! with N_z = f_z·D_gm the expected number of zero crossings over the
//! ground-motion duration. The expected peak factor is ∫₀^∞ (1 - F) dr, truncated
//! at `r_max = max(10, sqrt(2 ln N_z) + 8)` where the survival function is
//! negligible.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Quadrature};
use crate::spectra::{bandwidth_delta, SpectralMoments};

/// Default bandwidth exponent b in δₑ = δ^(1+b).
pub const DEFAULT_BANDWIDTH_EXPONENT: f64 = 0.2;

/// Below this r the bandwidth ratio is evaluated from its series expansion.
const SERIES_CUTOFF: f64 = 1e-4;

const MAX_SEGMENTS: usize = 2000;

/// Mean zero-crossing rate, counting both up- and down-crossings.
pub fn zero_crossing_rate(m: &SpectralMoments) -> Result<f64> {
    if !(m.m0 > 0.0) {
        return Err(Error::DegenerateSpectrum("m0 = 0, zero-crossing rate undefined".into()));
    }
    Ok((m.m2 / m.m0).sqrt() / PI)
}

/// Inputs of the peak-factor distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakFactorInputs {
    pub moments: SpectralMoments,
    pub d_gm: f64,
    pub bandwidth_exponent: f64,
}

impl PeakFactorInputs {
    pub fn new(moments: SpectralMoments, d_gm: f64) -> Self {
        Self {
            moments,
            d_gm,
            bandwidth_exponent: DEFAULT_BANDWIDTH_EXPONENT,
        }
    }

    /// Resolves the inputs into crossing count and effective bandwidth.
    pub fn distribution(&self) -> Result<V75> {
        if !(self.d_gm > 0.0) {
            return Err(Error::validation(
                "duration",
                format!("D_gm must be > 0, got {}", self.d_gm),
            ));
        }
        let fz = zero_crossing_rate(&self.moments)?;
        let bw = bandwidth_delta(&self.moments, self.bandwidth_exponent)?;
        V75::new(fz * self.d_gm, bw.delta_e)
    }
}

/// Peak-factor distribution parameterised by crossing count and effective bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct V75 {
    n_z: f64,
    delta_e: f64,
}

/// Expected peak factor with the diagnostics of its integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakFactor {
    pub value: f64,
    pub error: f64,
    pub r_max: f64,
    pub n_z: f64,
    pub delta_e: f64,
}

impl V75 {
    pub fn new(n_z: f64, delta_e: f64) -> Result<Self> {
        if !(n_z >= 0.0 && n_z.is_finite()) {
            return Err(Error::validation(
                "crossing count",
                format!("N_z must be finite and >= 0, got {n_z}"),
            ));
        }
        if !(0.0..=1.0).contains(&delta_e) {
            return Err(Error::validation(
                "bandwidth",
                format!("delta_e must lie in [0, 1], got {delta_e}"),
            ));
        }
        Ok(Self { n_z, delta_e })
    }

    pub fn n_z(&self) -> f64 {
        self.n_z
    }

    pub fn delta_e(&self) -> f64 {
        self.delta_e
    }

    /// ln F(r); -∞ at r = 0.
    pub fn ln_cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let half_r2 = 0.5 * r * r;
        let start = -(-half_r2).exp_m1();
        let c = FRAC_PI_2.sqrt() * self.delta_e;
        // (1 - e^{-c r}) / (1 - e^{-r²/2})
        let ratio = if r < SERIES_CUTOFF {
            (c - 0.5 * c * c * r + c * c * c * r * r / 6.0) / (0.5 * r - r * r * r / 8.0)
        } else {
            -(-c * r).exp_m1() / start
        };
        let exponent = if self.n_z == 0.0 {
            0.0
        } else {
            self.n_z * (-half_r2).exp() * ratio
        };
        start.ln() - exponent
    }

    pub fn cdf(&self, r: f64) -> f64 {
        self.ln_cdf(r).exp()
    }

    /// 1 - F(r), accurate where F is close to 1.
    pub fn survival(&self, r: f64) -> f64 {
        -self.ln_cdf(r).exp_m1()
    }

    /// Truncation point of the expectation integral.
    pub fn r_max(&self) -> f64 {
        let tail = if self.n_z > 1.0 {
            (2.0 * self.n_z.ln()).sqrt() + 8.0
        } else {
            0.0
        };
        tail.max(10.0)
    }

    /// E[PF] = ∫₀^r_max (1 - F(r)) dr to absolute tolerance `tol`.
    pub fn expected(&self, tol: f64) -> Result<PeakFactor> {
        let r_max = self.r_max();
        let q: Quadrature = integrate(|r| self.survival(r), 0.0, r_max, tol, 0.0, MAX_SEGMENTS).map_err(|e| {
            Error::Numerical(format!(
                "peak-factor expectation (N_z = {}, delta_e = {}): {e}",
                self.n_z, self.delta_e
            ))
        })?;
        Ok(PeakFactor {
            value: q.value,
            error: q.error,
            r_max,
            n_z: self.n_z,
            delta_e: self.delta_e,
        })
    }
}

/// CDF of the peak factor at normalised level `r`.
pub fn v75_cdf(r: f64, pfi: &PeakFactorInputs) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::validation("barrier level", format!("r must be >= 0, got {r}")));
    }
    Ok(pfi.distribution()?.cdf(r))
}

/// Expected peak factor for the given moments and duration.
pub fn expected_peak_factor(pfi: &PeakFactorInputs, tol: f64) -> Result<PeakFactor> {
    pfi.distribution()?.expected(tol)
}
