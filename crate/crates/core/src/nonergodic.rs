//! Non-ergodic PSA factors, their correlated epistemic realizations, and the
//! magnitude-dependent aleatory model.
//!
//! A non-ergodic field describes the ln-EAS adjustment per frequency as a
//! multivariate normal. Each draw, exponentiated and multiplied into the
//! ergodic EAS, gives one non-ergodic EAS; running both spectra through the
//! same RVT configuration gives F_nerg(T0) = ln PSA_nerg − ln PSA_erg.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rvt_engine::{psa_spectrum_prepared, PreparedMotion, RvtConfig};
use crate::spectra::{EasSpectrum, FrequencyGrid, Scenario};

/// Largest pivot deficit absorbed as jitter during factorization.
pub const FACTOR_JITTER: f64 = 1e-10;

/// Inter-frequency correlation of the ln-EAS adjustment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CorrelationModel {
    /// ρ = exp(−|ln f₁ − ln f₂| / length).
    ExpLnF { length: f64 },
    /// Independent frequencies.
    Identity,
    /// All frequencies move together.
    Perfect,
}

impl Default for CorrelationModel {
    fn default() -> Self {
        CorrelationModel::ExpLnF { length: 0.7 }
    }
}

impl CorrelationModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CorrelationModel::ExpLnF { length } if !(length > 0.0) => Err(Error::validation(
                "correlation model",
                format!("exp_ln_f length must be > 0, got {length}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn rho(&self, f1: f64, f2: f64) -> f64 {
        match *self {
            CorrelationModel::ExpLnF { length } => (-(f1 / f2).ln().abs() / length).exp(),
            CorrelationModel::Identity => {
                if f1 == f2 {
                    1.0
                } else {
                    0.0
                }
            }
            CorrelationModel::Perfect => 1.0,
        }
    }

    /// Dense row-major correlation matrix over `freqs`.
    pub fn matrix(&self, freqs: &[f64]) -> Vec<f64> {
        let n = freqs.len();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let r = if i == j { 1.0 } else { self.rho(freqs[i], freqs[j]) };
                m[i * n + j] = r;
                m[j * n + i] = r;
            }
        }
        m
    }
}

/// Lower-triangular factor L with L·Lᵀ = A for a symmetric positive
/// semidefinite `a` (row-major, n×n). Pivots within [`FACTOR_JITTER`] of zero
/// are treated as exact rank deficiencies; anything more negative is an error.
pub fn semidefinite_cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(Error::Decomposition(format!(
            "expected {} entries, got {}",
            n * n,
            a.len()
        )));
    }
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let s: f64 = (0..j).map(|k| l[j * n + k] * l[j * n + k]).sum();
        let pivot = a[j * n + j] - s;
        if pivot < -FACTOR_JITTER {
            return Err(Error::Decomposition(format!(
                "matrix is not positive semidefinite (pivot {pivot:.3e} at row {j})"
            )));
        }
        if pivot <= FACTOR_JITTER {
            continue;
        }
        let d = pivot.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            l[i * n + j] = (a[i * n + j] - s) / d;
        }
    }
    Ok(l)
}

/// Per-frequency distribution of the ln-EAS non-ergodic adjustment.
#[derive(Debug, Clone, PartialEq)]
pub struct NonErgodicField {
    pub grid: FrequencyGrid,
    pub mean_ln: Vec<f64>,
    pub sd_ln: Vec<f64>,
    pub correlation: CorrelationModel,
}

impl NonErgodicField {
    pub fn new(grid: FrequencyGrid, mean_ln: Vec<f64>, sd_ln: Vec<f64>, correlation: CorrelationModel) -> Result<Self> {
        if mean_ln.len() != grid.len() || sd_ln.len() != grid.len() {
            return Err(Error::validation(
                "non-ergodic field",
                format!(
                    "mean_ln ({}) and sd_ln ({}) must match the grid ({})",
                    mean_ln.len(),
                    sd_ln.len(),
                    grid.len()
                ),
            ));
        }
        if let Some(i) = mean_ln.iter().position(|m| !m.is_finite()) {
            return Err(Error::validation(
                "non-ergodic field",
                format!("mean_ln must be finite (row {i})"),
            ));
        }
        if let Some(i) = sd_ln.iter().position(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::validation(
                "non-ergodic field",
                format!("sd_ln must be finite and >= 0 (row {i})"),
            ));
        }
        correlation.validate()?;
        Ok(Self {
            grid,
            mean_ln,
            sd_ln,
            correlation,
        })
    }

    pub fn with_correlation(&self, correlation: CorrelationModel) -> Result<Self> {
        Self::new(self.grid.clone(), self.mean_ln.clone(), self.sd_ln.clone(), correlation)
    }

    /// Factorizes the correlation once for repeated sampling.
    pub fn sampler(&self) -> Result<FieldSampler<'_>> {
        let n = self.grid.len();
        let factor = semidefinite_cholesky(&self.correlation.matrix(self.grid.as_slice()), n)?;
        Ok(FieldSampler { field: self, factor })
    }

    /// Interpolates an adjustment vector (on the field grid) at `f`, linearly in
    /// ln f and constant beyond the field's ends.
    pub fn adjustment_at(&self, adj: &[f64], f: f64) -> f64 {
        let g = self.grid.as_slice();
        if f <= g[0] {
            return adj[0];
        }
        if f >= g[g.len() - 1] {
            return adj[adj.len() - 1];
        }
        let hi = g.partition_point(|&x| x < f);
        if g[hi] == f {
            return adj[hi];
        }
        let lo = hi - 1;
        let t = (f / g[lo]).ln() / (g[hi] / g[lo]).ln();
        adj[lo] + t * (adj[hi] - adj[lo])
    }

    /// Ergodic EAS multiplied by exp(adjustment).
    pub fn apply(&self, erg: &EasSpectrum, adj: &[f64]) -> Result<EasSpectrum> {
        if adj.len() != self.grid.len() {
            return Err(Error::Alignment(format!(
                "adjustment has {} values, field grid has {}",
                adj.len(),
                self.grid.len()
            )));
        }
        let factors: Vec<f64> = erg.freqs().iter().map(|&f| self.adjustment_at(adj, f).exp()).collect();
        erg.filtered(&factors)
    }
}

/// Draws realizations of a [`NonErgodicField`].
#[derive(Debug, Clone)]
pub struct FieldSampler<'a> {
    field: &'a NonErgodicField,
    factor: Vec<f64>,
}

impl FieldSampler<'_> {
    /// Realization `index` of the stream seeded by `seed`. Each index has its
    /// own ChaCha stream, so draws do not depend on evaluation order.
    pub fn draw(&self, seed: u64, index: u64) -> Vec<f64> {
        let n = self.field.grid.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        (0..n)
            .map(|i| {
                let row = &self.factor[i * n..i * n + i + 1];
                let lz: f64 = row.iter().zip(&z).map(|(l, z)| l * z).sum();
                self.field.mean_ln[i] + self.field.sd_ln[i] * lz
            })
            .collect()
    }
}

/// `n` correlated ln-adjustment vectors, deterministic in `seed`.
pub fn sample_field(field: &NonErgodicField, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let sampler = field.sampler()?;
    Ok((0..n as u64).into_par_iter().map(|i| sampler.draw(seed, i)).collect())
}

/// Non-ergodic PSA factors in natural-log units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FnergResult {
    pub periods: Vec<f64>,
    pub values: Vec<f64>,
    pub realization: Option<usize>,
}

fn leg(name: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::Leg {
        leg: name,
        source: Box::new(e),
    }
}

/// Puts two spectra on a common grid: identical grids pass through, otherwise
/// both are resampled onto the union of their samples within the overlap.
pub fn align_spectra(a: &EasSpectrum, b: &EasSpectrum) -> Result<(EasSpectrum, EasSpectrum)> {
    if a.grid() == b.grid() {
        return Ok((a.clone(), b.clone()));
    }
    let lo = a.f_min().max(b.f_min());
    let hi = a.f_max().min(b.f_max());
    let mut freqs: Vec<f64> = a
        .freqs()
        .iter()
        .chain(b.freqs())
        .copied()
        .filter(|&f| f >= lo && f <= hi)
        .collect();
    freqs.sort_by(f64::total_cmp);
    freqs.dedup();
    let grid = FrequencyGrid::new(freqs)
        .map_err(|e| Error::Alignment(format!("spectra overlap too little for a common grid: {e}")))?;
    Ok((a.resample(&grid)?, b.resample(&grid)?))
}

/// F_nerg(T0) = ln PSA(eas_nerg) − ln PSA(eas_erg) over `cfg.periods`.
pub fn fnerg_factor(
    eas_erg: &EasSpectrum,
    eas_nerg: &EasSpectrum,
    scn: &Scenario,
    cfg: &RvtConfig,
) -> Result<FnergResult> {
    cfg.validate()?;
    let (erg, nerg) = align_spectra(eas_erg, eas_nerg)?;
    let erg_psa = PreparedMotion::new(&erg, scn, cfg)
        .and_then(|m| psa_spectrum_prepared(&m, cfg))
        .map_err(leg("ergodic"))?;
    let nerg_psa = PreparedMotion::new(&nerg, scn, cfg)
        .and_then(|m| psa_spectrum_prepared(&m, cfg))
        .map_err(leg("non-ergodic"))?;
    Ok(FnergResult {
        periods: cfg.periods.clone(),
        values: ln_ratio(&nerg_psa.psa, &erg_psa.psa),
        realization: None,
    })
}

fn ln_ratio(num: &[f64], den: &[f64]) -> Vec<f64> {
    num.iter().zip(den).map(|(n, d)| n.ln() - d.ln()).collect()
}

/// F_nerg for `n` sampled realizations of `field` applied to `eas_erg`.
/// Realizations are evaluated in parallel and returned in index order.
pub fn fnerg_realizations(
    eas_erg: &EasSpectrum,
    field: &NonErgodicField,
    n: usize,
    seed: u64,
    scn: &Scenario,
    cfg: &RvtConfig,
) -> Result<Vec<FnergResult>> {
    cfg.validate()?;
    let erg_psa = PreparedMotion::new(eas_erg, scn, cfg)
        .and_then(|m| psa_spectrum_prepared(&m, cfg))
        .map_err(leg("ergodic"))?;
    let sampler = field.sampler()?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let adj = sampler.draw(seed, i as u64);
            let nerg = field.apply(eas_erg, &adj)?;
            let psa = PreparedMotion::new(&nerg, scn, cfg)
                .and_then(|m| psa_spectrum_prepared(&m, cfg))
                .map_err(leg("non-ergodic"))?;
            Ok(FnergResult {
                periods: cfg.periods.clone(),
                values: ln_ratio(&psa.psa, &erg_psa.psa),
                realization: Some(i),
            })
        })
        .collect()
}

/// Per-period mean and (n−1) standard deviation across realizations.
pub fn realization_summary(results: &[FnergResult]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = results
        .first()
        .ok_or_else(|| Error::validation("realizations", "need at least one"))?;
    let np = first.periods.len();
    let n = results.len() as f64;
    let mut mean = vec![0.0; np];
    for r in results {
        for (m, v) in mean.iter_mut().zip(&r.values) {
            *m += v / n;
        }
    }
    let mut sd = vec![0.0; np];
    if results.len() > 1 {
        for r in results {
            for ((s, v), m) in sd.iter_mut().zip(&r.values).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in sd.iter_mut() {
            *s = (*s / (n - 1.0)).sqrt();
        }
    }
    Ok((mean, sd))
}

/// One period of the aleatory coefficient table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AleatoryRow {
    pub period_s: f64,
    pub phi0_m1: f64,
    pub phi0_m2: f64,
    pub tau0_m1: f64,
    pub tau0_m2: f64,
    pub dc0: f64,
}

/// Period-dependent φ₀/τ₀ plateaus and the constant shift δc₀.
#[derive(Debug, Clone, PartialEq)]
pub struct AleatoryCoefficients {
    rows: Vec<AleatoryRow>,
}

/// Magnitudes bounding the linear transition between the two plateaus.
pub const ALEATORY_MAGNITUDES: (f64, f64) = (5.0, 6.5);

/// Aleatory standard deviations at one (M, T0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AleatorySigma {
    pub phi0: f64,
    pub tau0: f64,
    pub sigma0: f64,
}

impl AleatoryCoefficients {
    pub fn new(rows: Vec<AleatoryRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::validation("aleatory coefficients", "table is empty"));
        }
        if rows.windows(2).any(|w| w[1].period_s <= w[0].period_s) {
            return Err(Error::validation(
                "aleatory coefficients",
                "periods must be strictly ascending",
            ));
        }
        for (i, r) in rows.iter().enumerate() {
            if !(r.period_s > 0.0) {
                return Err(Error::validation(
                    "aleatory coefficients",
                    format!("row {i}: period must be > 0"),
                ));
            }
            if [r.phi0_m1, r.phi0_m2, r.tau0_m1, r.tau0_m2].iter().any(|s| !(*s > 0.0)) {
                return Err(Error::validation(
                    "aleatory coefficients",
                    format!("row {i}: all standard deviations must be > 0"),
                ));
            }
            if !r.dc0.is_finite() {
                return Err(Error::validation(
                    "aleatory coefficients",
                    format!("row {i}: dc0 must be finite"),
                ));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[AleatoryRow] {
        &self.rows
    }

    /// Row values at `period`, linear in ln T between rows.
    pub fn at(&self, period: f64) -> Result<AleatoryRow> {
        let rows = &self.rows;
        let (lo, hi) = (rows[0].period_s, rows[rows.len() - 1].period_s);
        let eps = 1e-9;
        if !(period >= lo * (1.0 - eps) && period <= hi * (1.0 + eps)) {
            return Err(Error::ModelDomain(format!(
                "period {period} s outside the aleatory table [{lo}, {hi}] s"
            )));
        }
        if let Some(r) = rows.iter().find(|r| (r.period_s / period - 1.0).abs() <= eps) {
            return Ok(*r);
        }
        let k = rows.partition_point(|r| r.period_s < period);
        let (a, b) = (&rows[k - 1], &rows[k]);
        let t = (period / a.period_s).ln() / (b.period_s / a.period_s).ln();
        let lerp = |x: f64, y: f64| x + t * (y - x);
        Ok(AleatoryRow {
            period_s: period,
            phi0_m1: lerp(a.phi0_m1, b.phi0_m1),
            phi0_m2: lerp(a.phi0_m2, b.phi0_m2),
            tau0_m1: lerp(a.tau0_m1, b.tau0_m1),
            tau0_m2: lerp(a.tau0_m2, b.tau0_m2),
            dc0: lerp(a.dc0, b.dc0),
        })
    }

    /// Copy with δc₀ replaced by its moving average over ln T (see [`smooth_dc0`]).
    pub fn smoothed(&self, window_decades: f64) -> Result<Self> {
        let periods: Vec<f64> = self.rows.iter().map(|r| r.period_s).collect();
        let dc0: Vec<f64> = self.rows.iter().map(|r| r.dc0).collect();
        let s = smooth_dc0(&periods, &dc0, window_decades)?;
        Self::new(
            self.rows
                .iter()
                .zip(s)
                .map(|(r, dc0)| AleatoryRow { dc0, ..*r })
                .collect(),
        )
    }
}

/// Two-plateau magnitude dependence with a linear ramp over [5, 6.5].
pub fn magnitude_ramp(m: f64, small: f64, large: f64) -> f64 {
    let (m1, m2) = ALEATORY_MAGNITUDES;
    if m <= m1 {
        small
    } else if m >= m2 {
        large
    } else {
        small + (large - small) * (m - m1) / (m2 - m1)
    }
}

/// φ₀, τ₀ and σ₀ = sqrt(φ₀² + τ₀²) at magnitude `m` and period `t0`.
pub fn aleatory_sigma(m: f64, t0: f64, coeffs: &AleatoryCoefficients) -> Result<AleatorySigma> {
    let row = coeffs.at(t0)?;
    let phi0 = magnitude_ramp(m, row.phi0_m1, row.phi0_m2);
    let tau0 = magnitude_ramp(m, row.tau0_m1, row.tau0_m2);
    Ok(AleatorySigma {
        phi0,
        tau0,
        sigma0: phi0.hypot(tau0),
    })
}

/// Centered moving average of δc₀ over log10 T with a total window of
/// `window_decades` (default usage: 1/3 decade).
pub fn smooth_dc0(periods: &[f64], dc0: &[f64], window_decades: f64) -> Result<Vec<f64>> {
    if periods.len() != dc0.len() {
        return Err(Error::Alignment("periods and dc0 differ in length".into()));
    }
    if !(window_decades > 0.0) {
        return Err(Error::validation("smoothing window", "must be > 0"));
    }
    let half = 0.5 * window_decades;
    let logs: Vec<f64> = periods.iter().map(|t| t.log10()).collect();
    Ok(logs
        .iter()
        .map(|&c| {
            let (s, n) = logs
                .iter()
                .zip(dc0)
                .filter(|(l, _)| (*l - c).abs() <= half + 1e-12)
                .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
            s / n as f64
        })
        .collect())
}

/// ln-PSA medians on a period grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LnPsaMedian {
    pub periods: Vec<f64>,
    pub values: Vec<f64>,
}

/// y_nerg = y_erg + F_nerg + δc₀ per period.
pub fn apply_backbone(y_erg: &LnPsaMedian, fnerg: &FnergResult, coeffs: &AleatoryCoefficients) -> Result<LnPsaMedian> {
    if y_erg.periods.len() != y_erg.values.len() {
        return Err(Error::Alignment("backbone periods and values differ in length".into()));
    }
    if y_erg.periods.len() != fnerg.periods.len()
        || y_erg
            .periods
            .iter()
            .zip(&fnerg.periods)
            .any(|(a, b)| (a / b - 1.0).abs() > 1e-9)
    {
        return Err(Error::Alignment(
            "backbone and F_nerg period grids are not aligned".into(),
        ));
    }
    let values = y_erg
        .periods
        .iter()
        .zip(&y_erg.values)
        .zip(&fnerg.values)
        .map(|((&t, &y), &f)| Ok(y + f + coeffs.at(t)?.dc0))
        .collect::<Result<Vec<_>>>()?;
    Ok(LnPsaMedian {
        periods: y_erg.periods.clone(),
        values,
    })
}
