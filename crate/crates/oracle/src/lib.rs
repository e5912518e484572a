//! Independent verification oracles for the RVT engine.
//!
//! Nothing here shares code with the engine: spectra are plain slices, the
//! oscillator is integrated in the time domain, and integrals are done by
//! dense composite Simpson rules.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OracleError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("step-size error: {0}")]
    StepSize(String),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Uniformly sampled acceleration time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecord {
    pub sample_rate: f64,
    pub duration: f64,
    pub samples: Vec<f64>,
}

impl SyntheticRecord {
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// ∫ x² dt, which equals m0 of the realized spectrum.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() * self.dt()
    }
}

/// Target amplitude at `f`, log-log between samples and zero outside.
fn target_amplitude(freqs: &[f64], amps: &[f64], f: f64) -> f64 {
    let n = freqs.len();
    if f < freqs[0] || f > freqs[n - 1] {
        return 0.0;
    }
    let hi = freqs.partition_point(|&x| x < f);
    if freqs[hi] == f {
        return amps[hi];
    }
    let lo = hi - 1;
    let (a0, a1) = (amps[lo], amps[hi]);
    if a0 <= 0.0 || a1 <= 0.0 {
        let t = (f - freqs[lo]) / (freqs[hi] - freqs[lo]);
        return a0 + t * (a1 - a0);
    }
    let t = (f / freqs[lo]).ln() / (freqs[hi] / freqs[lo]).ln();
    (a0.ln() + t * (a1 / a0).ln()).exp()
}

/// Random-phase realization of a one-sided Fourier amplitude spectrum.
///
/// The record has `round(duration·sample_rate)` samples. Each positive DFT
/// bin k gets amplitude X(k·df)/dt with an independent uniform phase, and the
/// negative bins are set by Hermitian symmetry, so ∫x² dt = 2Σ X² df.
pub fn synthesize(freqs: &[f64], amps: &[f64], duration: f64, sample_rate: f64, seed: u64) -> Result<SyntheticRecord> {
    if freqs.len() != amps.len() || freqs.len() < 2 {
        return Err(OracleError::Config(
            "need at least two matching frequency/amplitude samples".into(),
        ));
    }
    if freqs.windows(2).any(|w| w[1] <= w[0]) || freqs[0] <= 0.0 {
        return Err(OracleError::Config("frequencies must be positive and ascending".into()));
    }
    if !(duration > 0.0 && sample_rate > 0.0) {
        return Err(OracleError::Config("duration and sample rate must be positive".into()));
    }
    let nyquist = 0.5 * sample_rate;
    if freqs[freqs.len() - 1] > nyquist {
        return Err(OracleError::Config(format!(
            "target extends to {} Hz, beyond the Nyquist frequency {nyquist} Hz",
            freqs[freqs.len() - 1]
        )));
    }
    let n = (duration * sample_rate).round() as usize;
    if n < 4 {
        return Err(OracleError::Config("record shorter than four samples".into()));
    }
    let dt = 1.0 / sample_rate;
    let df = 1.0 / (n as f64 * dt);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    // The Nyquist bin (even n) has no conjugate partner and is left empty.
    for k in 1..n.div_ceil(2) {
        let phase = rng.random::<f64>() * 2.0 * PI;
        let a = target_amplitude(freqs, amps, k as f64 * df) / dt;
        let c = Complex::from_polar(a, phase);
        spec[k] = c;
        spec[n - k] = c.conj();
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    Ok(SyntheticRecord {
        sample_rate,
        duration: n as f64 * dt,
        samples: spec.iter().map(|c| c.re / n as f64).collect(),
    })
}

/// m0 carried by the DFT bins that [`synthesize`] fills, 2Σ X(k·df)² df.
pub fn discrete_target_m0(freqs: &[f64], amps: &[f64], duration: f64, sample_rate: f64) -> f64 {
    let n = (duration * sample_rate).round() as usize;
    let df = sample_rate / n as f64;
    2.0 * (1..n.div_ceil(2))
        .map(|k| target_amplitude(freqs, amps, k as f64 * df).powi(2))
        .sum::<f64>()
        * df
}

/// Exact recurrence for a linear SDOF oscillator under piecewise-linear
/// base acceleration (Nigam and Jennings).
struct Recurrence {
    a: [[f64; 2]; 2],
    b: [[f64; 2]; 2],
}

impl Recurrence {
    fn new(omega: f64, zeta: f64, dt: f64) -> Self {
        let wd = omega * (1.0 - zeta * zeta).sqrt();
        let e = (-zeta * omega * dt).exp();
        let (s, c) = (wd * dt).sin_cos();
        let w2 = omega * omega;
        let w3 = w2 * omega;
        let zw = zeta * omega / wd;
        let a = [[e * (zw * s + c), e * s / wd], [-w2 / wd * e * s, e * (c - zw * s)]];
        let p = (2.0 * zeta * zeta - 1.0) / (w2 * dt);
        let q = 2.0 * zeta / (w3 * dt);
        let b = [
            [
                e * ((p + zeta / omega) * s / wd + (q + 1.0 / w2) * c) - q,
                -e * (p * s / wd + q * c) - 1.0 / w2 + q,
            ],
            [
                e * ((p + zeta / omega) * (c - zw * s) - (q + 1.0 / w2) * (wd * s + zeta * omega * c))
                    + 1.0 / (w2 * dt),
                -e * (p * (c - zw * s) - q * (wd * s + zeta * omega * c)) - 1.0 / (w2 * dt),
            ],
        ];
        Self { a, b }
    }
}

/// Relative displacement history of an oscillator at rest at t = 0 driven by
/// `accel` sampled at `dt`.
pub fn oscillator_displacement(accel: &[f64], dt: f64, f0: f64, zeta: f64) -> Result<Vec<f64>> {
    if !(f0 > 0.0 && zeta > 0.0 && zeta < 1.0) {
        return Err(OracleError::Config("need f0 > 0 and 0 < zeta < 1".into()));
    }
    if dt * f0 > 1.0 / 20.0 {
        return Err(OracleError::StepSize(format!(
            "dt = {dt} s gives fewer than 20 samples per {} s oscillator period",
            1.0 / f0
        )));
    }
    let r = Recurrence::new(2.0 * PI * f0, zeta, dt);
    let mut out = Vec::with_capacity(accel.len());
    let (mut u, mut v) = (0.0, 0.0);
    out.push(u);
    for w in accel.windows(2) {
        let un = r.a[0][0] * u + r.a[0][1] * v + r.b[0][0] * w[0] + r.b[0][1] * w[1];
        let vn = r.a[1][0] * u + r.a[1][1] * v + r.b[1][0] * w[0] + r.b[1][1] * w[1];
        u = un;
        v = vn;
        if !u.is_finite() || !v.is_finite() {
            return Err(OracleError::StepSize("oscillator response diverged".into()));
        }
        out.push(u);
    }
    Ok(out)
}

/// Peak pseudo-acceleration ω²·max|u| over the record followed by a free
/// decay tail of 10/(ζ·2πf0) seconds.
pub fn time_domain_peak(record: &SyntheticRecord, f0: f64, zeta: f64) -> Result<f64> {
    let dt = record.dt();
    let tail = (10.0 / (zeta * 2.0 * PI * f0) / dt).ceil() as usize;
    let mut accel = record.samples.clone();
    accel.resize(accel.len() + tail, 0.0);
    let u = oscillator_displacement(&accel, dt, f0, zeta)?;
    let omega = 2.0 * PI * f0;
    Ok(omega * omega * u.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

/// Composite Simpson rule with `n` (rounded up to even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h))
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// m_k = 2∫(2πf)^k X(f)² df by Simpson's rule in ln f over the target's
/// range, with `n` intervals and the target interpolated log-log.
pub fn brute_force_moment(freqs: &[f64], amps: &[f64], k: i32, n: usize) -> f64 {
    let (lo, hi) = (freqs[0].ln(), freqs[freqs.len() - 1].ln());
    2.0 * simpson(
        |x| {
            let f = x.exp();
            let a = target_amplitude(freqs, amps, f);
            (2.0 * PI * f).powi(k) * a * a * f
        },
        lo,
        hi,
        n,
    )
}

/// Expected first-passage peak factor by dense Simpson integration of the
/// survival function 1 − F(r), written directly from the closed-form CDF.
pub fn brute_force_peak_factor(n_z: f64, delta_e: f64, r_max: f64, n: usize) -> f64 {
    let cdf = |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        let g = (-r * r / 2.0).exp();
        let a = 1.0 - g;
        let b = 1.0 - (-(PI / 2.0).sqrt() * delta_e * r).exp();
        a * (-n_z * g * b / a).exp()
    };
    simpson(|r| 1.0 - cdf(r), 0.0, r_max, n)
}

/// Median of a sample (mean of the middle pair for even sizes).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band() -> (Vec<f64>, Vec<f64>) {
        let f: Vec<f64> = (0..200).map(|i| 0.5 * 1.02f64.powi(i)).collect();
        let a = f.iter().map(|f| 0.1 / (1.0 + f / 5.0)).collect();
        (f, a)
    }

    #[test]
    fn zero_target_gives_zero_record() {
        let f = vec![1.0, 2.0, 4.0];
        let r = synthesize(&f, &[0.0; 3], 10.0, 100.0, 1).unwrap();
        assert!(r.samples.iter().all(|&x| x == 0.0));
        assert_eq!(time_domain_peak(&r, 2.0, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn seeds_are_deterministic() {
        let (f, a) = band();
        let x = synthesize(&f, &a, 8.0, 100.0, 42).unwrap();
        let y = synthesize(&f, &a, 8.0, 100.0, 42).unwrap();
        let z = synthesize(&f, &a, 8.0, 100.0, 43).unwrap();
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn parseval_matches_target_moment() {
        let (f, a) = band();
        let m0 = brute_force_moment(&f, &a, 0, 20_000);
        let discrete = discrete_target_m0(&f, &a, 40.0, 200.0);
        let energies: Vec<f64> = (0..100)
            .map(|s| synthesize(&f, &a, 40.0, 200.0, s).unwrap().energy())
            .collect();
        let mean = energies.iter().sum::<f64>() / 100.0;
        let sd = (energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
        // Random phases leave the energy unchanged, so the ensemble is tight.
        assert!((mean - discrete).abs() <= 3.0 * sd / 10.0 + 1e-12 * discrete);
        assert!(energies.iter().all(|e| (e / discrete - 1.0).abs() < 1e-10));
        // Bin sums approach the integral as df = 1/40 Hz shrinks.
        assert!((discrete / m0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn aliasing_is_rejected() {
        let (f, a) = band();
        assert!(matches!(synthesize(&f, &a, 10.0, 50.0, 0), Err(OracleError::Config(_))));
    }

    #[test]
    fn resonance_amplitude() {
        let (f0, zeta, amp) = (2.0, 0.05, 0.3);
        let fs = 400.0;
        let n = (60.0 * fs) as usize;
        let accel: Vec<f64> = (0..n).map(|i| amp * (2.0 * PI * f0 * i as f64 / fs).sin()).collect();
        let u = oscillator_displacement(&accel, 1.0 / fs, f0, zeta).unwrap();
        let w2 = (2.0 * PI * f0).powi(2);
        let late = u[n - (fs as usize)..].iter().fold(0.0f64, |m, x| m.max(x.abs())) * w2;
        assert!((late / (amp / (2.0 * zeta)) - 1.0).abs() < 0.02);
    }

    #[test]
    fn static_load_settles() {
        let fs = 200.0;
        let accel = vec![1.0; 40_000];
        let u = oscillator_displacement(&accel, 1.0 / fs, 1.0, 0.2).unwrap();
        let w2 = (2.0 * PI).powi(2);
        assert!((u.last().unwrap().abs() * w2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coarse_steps_are_rejected() {
        assert!(matches!(
            oscillator_displacement(&[0.0; 10], 0.1, 1.0, 0.05),
            Err(OracleError::StepSize(_))
        ));
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(|x| x * x * x - x, 0.0, 2.0, 2);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rayleigh_peak_factor() {
        let v = brute_force_peak_factor(0.0, 0.5, 12.0, 20_000);
        assert!((v - (PI / 2.0).sqrt()).abs() < 1e-9);
    }
}
