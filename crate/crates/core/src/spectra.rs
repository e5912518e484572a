//! Sampled amplitude spectra and the frequency-domain pieces of the RVT
//! pipeline: oscillator transfer, spectral moments, bandwidth, source corner
//! frequency, kappa, and low/high-frequency extrapolation.
//!
//! All integrals use the trapezoidal rule on the native grid. The grid may be
//! irregular, so log-spaced spectra are integrated as-is without resampling.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of samples in a [`FrequencyGrid`].
pub const MIN_GRID_LEN: usize = 8;

/// Upper bound on the density of grid extensions, in points per decade.
const MAX_EXTENSION_PPD: f64 = 500.0;

/// Relative slack applied to the closed anchor-bin edges.
const BIN_EDGE_RTOL: f64 = 1e-12;

/// Strictly ascending, positive frequency samples in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    freqs: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(freqs: Vec<f64>) -> Result<Self> {
        if freqs.len() < MIN_GRID_LEN {
            return Err(Error::validation(
                "frequency grid",
                format!("at least {MIN_GRID_LEN} samples required, got {}", freqs.len()),
            ));
        }
        if let Some((i, f)) = freqs.iter().enumerate().find(|(_, f)| !f.is_finite() || **f <= 0.0) {
            return Err(Error::validation(
                "frequency grid",
                format!("frequencies must be finite and > 0 (sample {i} is {f})"),
            ));
        }
        if let Some(i) = freqs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::validation(
                "frequency grid",
                format!(
                    "frequencies must be strictly ascending (sample {} = {} follows {})",
                    i + 1,
                    freqs[i + 1],
                    freqs[i]
                ),
            ));
        }
        Ok(Self { freqs })
    }

    /// `n` log-spaced points from `lo` to `hi` inclusive.
    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || n < 2 {
            return Err(Error::validation(
                "frequency grid",
                format!("log spacing needs 0 < lo < hi and n >= 2 (lo={lo}, hi={hi}, n={n})"),
            ));
        }
        Self::new(log_space(lo, hi, n))
    }

    /// Log-spaced grid from `lo` to `hi` with `per_decade` intervals per decade.
    pub fn with_density(lo: f64, hi: f64, per_decade: f64) -> Result<Self> {
        let n = ((hi / lo).log10() * per_decade).round().max(1.0) as usize + 1;
        Self::log_spaced(lo, hi, n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.freqs
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn f_min(&self) -> f64 {
        self.freqs[0]
    }

    pub fn f_max(&self) -> f64 {
        self.freqs[self.freqs.len() - 1]
    }

    /// Points-per-decade density of the first (lowest) interval.
    pub fn low_end_density(&self) -> f64 {
        1.0 / (self.freqs[1] / self.freqs[0]).log10()
    }

    /// Points-per-decade density of the last (highest) interval.
    pub fn high_end_density(&self) -> f64 {
        let n = self.freqs.len();
        1.0 / (self.freqs[n - 1] / self.freqs[n - 2]).log10()
    }
}

pub(crate) fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Amplitude spectrum sampled on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct EasSpectrum {
    grid: FrequencyGrid,
    amps: Vec<f64>,
}

impl EasSpectrum {
    pub fn new(grid: FrequencyGrid, amps: Vec<f64>) -> Result<Self> {
        if amps.len() != grid.len() {
            return Err(Error::validation(
                "spectrum",
                format!(
                    "amplitude count {} must match frequency count {}",
                    amps.len(),
                    grid.len()
                ),
            ));
        }
        if let Some((i, a)) = amps.iter().enumerate().find(|(_, a)| !a.is_finite() || **a < 0.0) {
            return Err(Error::validation(
                "spectrum",
                format!("amplitudes must be finite and >= 0 (sample {i} is {a})"),
            ));
        }
        Ok(Self { grid, amps })
    }

    /// Builds a spectrum from paired columns.
    pub fn from_pairs(freqs: Vec<f64>, amps: Vec<f64>) -> Result<Self> {
        Self::new(FrequencyGrid::new(freqs)?, amps)
    }

    /// Evaluates `f` on every grid point.
    pub fn from_fn(grid: FrequencyGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let amps = grid.as_slice().iter().map(|&x| f(x)).collect();
        Self::new(grid, amps)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn freqs(&self) -> &[f64] {
        self.grid.as_slice()
    }

    pub fn amps(&self) -> &[f64] {
        &self.amps
    }

    pub fn f_min(&self) -> f64 {
        self.grid.f_min()
    }

    pub fn f_max(&self) -> f64 {
        self.grid.f_max()
    }

    /// Returns the spectrum with every amplitude multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.amps.iter().map(|a| a * c).collect())
    }

    /// Multiplies amplitudes pointwise by `factors` (e.g. an oscillator transfer).
    pub fn filtered(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.amps.len() {
            return Err(Error::Alignment(format!(
                "filter has {} points, spectrum has {}",
                factors.len(),
                self.amps.len()
            )));
        }
        Self::new(
            self.grid.clone(),
            self.amps.iter().zip(factors).map(|(a, h)| a * h).collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.amps.iter().all(|&a| a == 0.0)
    }

    /// Interpolates the spectrum at `f`, linearly in log-frequency and
    /// log-amplitude. Segments touching a zero amplitude fall back to linear
    /// interpolation in amplitude. `f` must lie inside the grid.
    pub fn interpolate(&self, f: f64) -> Result<f64> {
        let freqs = self.freqs();
        if !(f >= self.f_min() * (1.0 - BIN_EDGE_RTOL) && f <= self.f_max() * (1.0 + BIN_EDGE_RTOL)) {
            return Err(Error::ModelDomain(format!(
                "cannot interpolate at {f} Hz outside [{}, {}] Hz",
                self.f_min(),
                self.f_max()
            )));
        }
        let f = f.clamp(self.f_min(), self.f_max());
        let hi = freqs.partition_point(|&x| x < f);
        if hi < freqs.len() && freqs[hi] == f {
            return Ok(self.amps[hi]);
        }
        let lo = hi - 1;
        let (f0, f1) = (freqs[lo], freqs[hi]);
        let (a0, a1) = (self.amps[lo], self.amps[hi]);
        let t = (f / f0).ln() / (f1 / f0).ln();
        if a0 > 0.0 && a1 > 0.0 {
            Ok((a0.ln() + t * (a1 / a0).ln()).exp())
        } else {
            Ok(a0 + t * (a1 - a0))
        }
    }

    /// Resamples onto `grid` by log-log interpolation. Points that coincide
    /// with native samples keep their exact value.
    pub fn resample(&self, grid: &FrequencyGrid) -> Result<Self> {
        let amps = grid
            .as_slice()
            .iter()
            .map(|&f| self.interpolate(f))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid.clone(), amps)
    }
}

/// Single-degree-of-freedom oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oscillator {
    f0: f64,
    zeta: f64,
}

impl Oscillator {
    pub fn new(f0: f64, zeta: f64) -> Result<Self> {
        if !(f0.is_finite() && f0 > 0.0) {
            return Err(Error::validation(
                "oscillator",
                format!("natural frequency must be > 0, got {f0}"),
            ));
        }
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(Error::validation(
                "oscillator",
                format!("damping must satisfy 0 < zeta < 1, got {zeta}"),
            ));
        }
        Ok(Self { f0, zeta })
    }

    pub fn from_period(period: f64, zeta: f64) -> Result<Self> {
        Self::new(1.0 / period, zeta)
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn period(&self) -> f64 {
        1.0 / self.f0
    }

    /// |IR(f)|, normalised to 1 in the static limit.
    pub fn transfer(&self, f: f64) -> f64 {
        // Written in terms of f/f0 so that f = f0 gives exactly 1/(2 zeta).
        let r = f / self.f0;
        let re = r * r - 1.0;
        let im = 2.0 * self.zeta * r;
        1.0 / (re * re + im * im).sqrt()
    }

    /// Frequency of the transfer-magnitude peak, f0 * sqrt(1 - 2 zeta^2).
    pub fn peak_frequency(&self) -> f64 {
        self.f0 * (1.0 - 2.0 * self.zeta * self.zeta).sqrt()
    }
}

/// Pointwise oscillator transfer magnitudes over `grid`.
pub fn oscillator_transfer(osc: &Oscillator, grid: &FrequencyGrid) -> Vec<f64> {
    grid.as_slice().iter().map(|&f| osc.transfer(f)).collect()
}

/// Earthquake and site descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub magnitude: f64,
    pub r_rup_km: f64,
    pub vs30_ms: f64,
    /// 0 for rock, 1 for soil.
    #[serde(default)]
    pub site_class: u8,
    #[serde(default)]
    pub stress_drop_bar: Option<f64>,
    #[serde(default = "default_beta")]
    pub beta_kms: f64,
    #[serde(default)]
    pub event_coords: Option<[f64; 2]>,
    #[serde(default)]
    pub site_coords: Option<[f64; 2]>,
}

fn default_beta() -> f64 {
    3.5
}

impl Scenario {
    pub fn new(magnitude: f64, r_rup_km: f64, vs30_ms: f64) -> Self {
        Self {
            magnitude,
            r_rup_km,
            vs30_ms,
            site_class: 0,
            stress_drop_bar: None,
            beta_kms: default_beta(),
            event_coords: None,
            site_coords: None,
        }
    }

    pub fn with_stress_drop(mut self, bar: f64) -> Self {
        self.stress_drop_bar = Some(bar);
        self
    }

    pub fn with_beta(mut self, kms: f64) -> Self {
        self.beta_kms = kms;
        self
    }

    pub fn with_site_class(mut self, s: u8) -> Self {
        self.site_class = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |inv: String| Err(Error::validation("scenario", inv));
        if !self.magnitude.is_finite() {
            return bad(format!("magnitude must be finite, got {}", self.magnitude));
        }
        if !(self.r_rup_km >= 0.0) {
            return bad(format!("r_rup_km must be >= 0, got {}", self.r_rup_km));
        }
        if !(self.vs30_ms > 0.0) {
            return bad(format!("vs30_ms must be > 0, got {}", self.vs30_ms));
        }
        if !(self.beta_kms > 0.0) {
            return bad(format!("beta_kms must be > 0, got {}", self.beta_kms));
        }
        if self.site_class > 1 {
            return bad(format!("site_class must be 0 or 1, got {}", self.site_class));
        }
        if let Some(ds) = self.stress_drop_bar {
            if !(ds > 0.0) {
                return bad(format!("stress_drop_bar must be > 0, got {ds}"));
            }
        }
        Ok(())
    }
}

/// Zeroth, first and second spectral moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralMoments {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
}

/// m_k = 2 ∫ (2πf)^k X(f)² df for k = 0, 1, 2 by the trapezoidal rule.
pub fn spectral_moments(spec: &EasSpectrum) -> Result<SpectralMoments> {
    let f = spec.freqs();
    let x = spec.amps();
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for i in 0..f.len() - 1 {
        let h = 0.5 * (f[i + 1] - f[i]);
        let (p, q) = (x[i] * x[i], x[i + 1] * x[i + 1]);
        let (wp, wq) = (2.0 * PI * f[i], 2.0 * PI * f[i + 1]);
        m0 += h * (p + q);
        m1 += h * (wp * p + wq * q);
        m2 += h * (wp * wp * p + wq * wq * q);
    }
    let m = SpectralMoments {
        m0: 2.0 * m0,
        m1: 2.0 * m1,
        m2: 2.0 * m2,
    };
    if !(m.m0 > 0.0 && m.m2 > 0.0) {
        return Err(Error::DegenerateSpectrum("spectrum has zero energy (m0 = 0)".into()));
    }
    Ok(m)
}

/// Spectral bandwidth measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    pub delta: f64,
    pub delta_e: f64,
}

/// Relative slack allowed on m1² ≤ m0·m2 before it counts as an inconsistency.
const CAUCHY_SCHWARZ_RTOL: f64 = 1e-10;

/// δ = sqrt(1 - m1²/(m0 m2)) and δₑ = δ^(1+b).
pub fn bandwidth_delta(m: &SpectralMoments, b: f64) -> Result<Bandwidth> {
    if !(m.m0 > 0.0 && m.m2 > 0.0) {
        return Err(Error::DegenerateSpectrum("m0 and m2 must be > 0".into()));
    }
    if !(b >= 0.0) {
        return Err(Error::validation(
            "bandwidth exponent",
            format!("b must be >= 0, got {b}"),
        ));
    }
    let ratio = m.m1 * m.m1 / (m.m0 * m.m2);
    if ratio > 1.0 + CAUCHY_SCHWARZ_RTOL {
        return Err(Error::Numerical(format!(
            "moments violate m1^2 <= m0*m2 (ratio {ratio})"
        )));
    }
    let delta = (1.0 - ratio).max(0.0).sqrt();
    Ok(Bandwidth {
        delta,
        delta_e: delta.powf(1.0 + b),
    })
}

/// Magnitude-dependent stress drop, interpolated linearly in log(Δσ) and held
/// constant beyond the tabulated magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressDropTable {
    pub model: String,
    pub version: String,
    #[serde(default)]
    pub units: serde_json::Value,
    pub magnitudes: Vec<f64>,
    pub stress_drop_bar: Vec<f64>,
    #[serde(default)]
    pub notes: Option<String>,
}

const DEFAULT_STRESS_DROP: &str = include_str!("../data/stress_drop.json");

impl StressDropTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("stress-drop table: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    /// Table shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_json(DEFAULT_STRESS_DROP).expect("shipped stress-drop table is valid")
    }

    fn validate(&self) -> Result<()> {
        if self.magnitudes.is_empty() || self.magnitudes.len() != self.stress_drop_bar.len() {
            return Err(Error::validation(
                "stress-drop table",
                "magnitudes and stress_drop_bar must be nonempty and equal length",
            ));
        }
        if self.magnitudes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation(
                "stress-drop table",
                "magnitudes must be strictly ascending",
            ));
        }
        if self.stress_drop_bar.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::validation("stress-drop table", "stress drops must be > 0"));
        }
        Ok(())
    }

    pub fn stress_drop(&self, magnitude: f64) -> f64 {
        let m = &self.magnitudes;
        let s = &self.stress_drop_bar;
        if magnitude <= m[0] {
            return s[0];
        }
        if magnitude >= m[m.len() - 1] {
            return s[s.len() - 1];
        }
        let hi = m.partition_point(|&x| x < magnitude);
        let lo = hi - 1;
        let t = (magnitude - m[lo]) / (m[hi] - m[lo]);
        (s[lo].ln() + t * (s[hi] / s[lo]).ln()).exp()
    }
}

/// Stress drop for the scenario: the scenario's own value wins, then `relation`.
pub fn resolve_stress_drop(scn: &Scenario, relation: Option<&StressDropTable>) -> Result<f64> {
    match (scn.stress_drop_bar, relation) {
        (Some(ds), _) => Ok(ds),
        (None, Some(rel)) => Ok(rel.stress_drop(scn.magnitude)),
        (None, None) => Err(Error::Config(
            "scenario has no stress drop and no stress-drop relation is configured".into(),
        )),
    }
}

/// Brune corner frequency in Hz, with β in km/s and Δσ in bar.
pub fn corner_frequency(scn: &Scenario, relation: Option<&StressDropTable>) -> Result<f64> {
    if !(scn.beta_kms > 0.0) {
        return Err(Error::validation("scenario", "beta_kms must be > 0"));
    }
    let ds = resolve_stress_drop(scn, relation)?;
    let moment = 10f64.powf(1.5 * scn.magnitude + 16.05);
    Ok(4.9e6 * scn.beta_kms * (ds / moment).cbrt())
}

/// κ (s) from V_S30 (m/s): ln κ = -0.4 ln(V_S30/760) - 3.5.
pub fn kappa_from_vs30(vs30: f64) -> Result<f64> {
    if !(vs30 > 0.0) {
        return Err(Error::validation("vs30", format!("must be > 0, got {vs30}")));
    }
    Ok((-0.4 * (vs30 / 760.0).ln() - 3.5).exp())
}

/// Omega-square source shape f²/(1 + f²/fc²).
pub fn omega_square(f: f64, corner_hz: f64) -> f64 {
    f * f / (1.0 + (f / corner_hz).powi(2))
}

fn anchor_mean(spec: &EasSpectrum, lo: f64, hi: f64, shape: impl Fn(f64) -> f64) -> Result<f64> {
    let (lo_t, hi_t) = (lo * (1.0 - BIN_EDGE_RTOL), hi * (1.0 + BIN_EDGE_RTOL));
    let (sum, count) = spec
        .freqs()
        .iter()
        .zip(spec.amps())
        .filter(|(f, _)| **f >= lo_t && **f <= hi_t)
        .fold((0.0, 0usize), |(s, n), (&f, &a)| (s + a / shape(f), n + 1));
    if count < 2 {
        return Err(Error::Anchor { lo, hi, count });
    }
    Ok(sum / count as f64)
}

fn extension_points(from: f64, to: f64, density: f64) -> Vec<f64> {
    let density = density.min(MAX_EXTENSION_PPD);
    let n = ((to / from).log10().abs() * density).ceil().max(1.0) as usize;
    (1..=n)
        .map(|k| {
            if k == n {
                to
            } else {
                from * (to / from).powf(k as f64 / n as f64)
            }
        })
        .collect()
}

/// Extends the spectrum below its lowest frequency down to `f_target` with an
/// omega-square shape anchored on the [f_min, 1.05 f_min] bin.
pub fn extrapolate_low(spec: &EasSpectrum, corner_hz: f64, f_target: f64) -> Result<EasSpectrum> {
    if !(f_target > 0.0 && f_target < spec.f_min()) {
        return Err(Error::validation(
            "extrapolation target",
            format!("low target {f_target} must lie in (0, f_min = {})", spec.f_min()),
        ));
    }
    if !(corner_hz > 0.0) {
        return Err(Error::validation(
            "corner frequency",
            format!("must be > 0, got {corner_hz}"),
        ));
    }
    let f_min = spec.f_min();
    let anchor = anchor_mean(spec, f_min, 1.05 * f_min, |f| omega_square(f, corner_hz))?;
    let mut ext = extension_points(f_min, f_target, spec.grid().low_end_density());
    ext.reverse();
    let mut freqs = ext.clone();
    let mut amps: Vec<f64> = ext.iter().map(|&f| anchor * omega_square(f, corner_hz)).collect();
    freqs.extend_from_slice(spec.freqs());
    amps.extend_from_slice(spec.amps());
    EasSpectrum::from_pairs(freqs, amps)
}

/// Extends the spectrum above its highest frequency up to `f_target` with an
/// exp(-πκf) decay anchored on the [0.95 f_max, f_max] bin.
pub fn extrapolate_high(spec: &EasSpectrum, kappa: f64, f_target: f64) -> Result<EasSpectrum> {
    if !(f_target > spec.f_max()) {
        return Err(Error::validation(
            "extrapolation target",
            format!("high target {f_target} must exceed f_max = {}", spec.f_max()),
        ));
    }
    if !(kappa > 0.0) {
        return Err(Error::validation("kappa", format!("must be > 0, got {kappa}")));
    }
    let f_max = spec.f_max();
    let decay = |f: f64| (-PI * kappa * f).exp();
    let anchor = anchor_mean(spec, 0.95 * f_max, f_max, decay)?;
    let ext = extension_points(f_max, f_target, spec.grid().high_end_density());
    let mut freqs = spec.freqs().to_vec();
    let mut amps = spec.amps().to_vec();
    amps.extend(ext.iter().map(|&f| anchor * decay(f)));
    freqs.extend(ext);
    EasSpectrum::from_pairs(freqs, amps)
}
