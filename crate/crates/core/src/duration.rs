//! Ground-motion duration (D_gm) and the RMS duration used for x_rms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{Oscillator, Scenario, StressDropTable};

const SHIPPED_AS96: &str = include_str!("../data/as96.json");
const EXAMPLE_BT15: &str = include_str!("../data/bt15_example.json");

/// ln(Δσ) = ln_intercept + magnitude_slope·(M − reference_magnitude).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLinearStressDrop {
    pub ln_intercept: f64,
    pub magnitude_slope: f64,
    pub reference_magnitude: f64,
}

impl LogLinearStressDrop {
    pub fn stress_drop(&self, magnitude: f64) -> f64 {
        (self.ln_intercept + self.magnitude_slope * (magnitude - self.reference_magnitude)).exp()
    }
}

/// Coefficients of the AS96 significant-duration model and its interval
/// conversion polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct As96Coefficients {
    pub model: String,
    pub version: String,
    #[serde(default)]
    pub units: serde_json::Value,
    pub c1: f64,
    pub c2: f64,
    pub r_c_km: f64,
    pub beta_kms: f64,
    #[serde(default)]
    pub stress_drop: Option<LogLinearStressDrop>,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    #[serde(default)]
    pub notes: Option<String>,
}

impl As96Coefficients {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("AS96 coefficients: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_AS96).expect("shipped AS96 coefficients are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 >= 0.0 && self.c2 >= 0.0 && self.r_c_km >= 0.0) {
            return Err(Error::validation("AS96 coefficients", "c1, c2 and r_c_km must be >= 0"));
        }
        if !(self.beta_kms > 0.0) {
            return Err(Error::validation("AS96 coefficients", "beta_kms must be > 0"));
        }
        Ok(())
    }
}

/// A duration with its interval label and provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DurationResult {
    pub d_gm: f64,
    pub interval: String,
    pub provenance: String,
}

impl DurationResult {
    pub fn user(seconds: f64) -> Result<Self> {
        if !(seconds > 0.0 && seconds.is_finite()) {
            return Err(Error::validation("duration", format!("must be > 0, got {seconds}")));
        }
        Ok(Self {
            d_gm: seconds,
            interval: "user".into(),
            provenance: "user".into(),
        })
    }
}

fn interval_label(fraction: f64) -> String {
    format!("a0.05-{}", fraction)
}

/// Median AS96 5-75% significant duration in seconds.
///
/// The source term uses the model's own β and, unless the scenario carries a
/// stress drop, the model's stress-drop law; `fallback` covers coefficient
/// sets without one.
pub fn as96_d575(
    scn: &Scenario,
    coeffs: &As96Coefficients,
    fallback: Option<&StressDropTable>,
) -> Result<DurationResult> {
    scn.validate()?;
    let ds = match (scn.stress_drop_bar, &coeffs.stress_drop, fallback) {
        (Some(ds), _, _) => ds,
        (None, Some(law), _) => law.stress_drop(scn.magnitude),
        (None, None, Some(table)) => table.stress_drop(scn.magnitude),
        (None, None, None) => {
            return Err(Error::Config(
                "AS96: no stress drop in scenario, coefficients, or relation".into(),
            ))
        }
    };
    let moment = 10f64.powf(1.5 * scn.magnitude + 16.05);
    let fc = 4.9e6 * coeffs.beta_kms * (ds / moment).cbrt();
    let site = coeffs.c2 * f64::from(scn.site_class);
    let path = if scn.r_rup_km >= coeffs.r_c_km {
        coeffs.c1 * (scn.r_rup_km - coeffs.r_c_km)
    } else {
        0.0
    };
    let d = 1.0 / fc + path + site;
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::ModelDomain(format!("AS96 duration is not positive ({d} s)")));
    }
    Ok(DurationResult {
        d_gm: d,
        interval: interval_label(0.75),
        provenance: coeffs.model.clone(),
    })
}

/// Converts a 5-75% duration to the 5%-to-`fraction` interval.
pub fn as96_interval(d575: &DurationResult, fraction: f64, coeffs: &As96Coefficients) -> Result<DurationResult> {
    if !(fraction > 0.05 && fraction < 1.0) {
        return Err(Error::ModelDomain(format!(
            "interval fraction must lie in (0.05, 1), got {fraction}"
        )));
    }
    let l = ((fraction - 0.05) / (1.0 - fraction)).ln();
    let ratio = (coeffs.a1 + coeffs.a2 * l + coeffs.a3 * l * l).exp();
    Ok(DurationResult {
        d_gm: d575.d_gm * ratio,
        interval: interval_label(fraction),
        provenance: d575.provenance.clone(),
    })
}

/// Bilinear coefficient grid for the BT15 D_rms/D_gm ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bt15Table {
    pub model: String,
    pub version: String,
    #[serde(default)]
    pub units: serde_json::Value,
    pub magnitudes: Vec<f64>,
    pub distances_km: Vec<f64>,
    pub coefficients: Bt15Coefficients,
    #[serde(default)]
    pub notes: Option<String>,
}

/// Each entry is indexed `[magnitude][distance]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bt15Coefficients {
    pub c1: Vec<Vec<f64>>,
    pub c2: Vec<Vec<f64>>,
    pub c3: Vec<Vec<f64>>,
    pub c4: Vec<Vec<f64>>,
    pub c5: Vec<Vec<f64>>,
    pub c6: Vec<Vec<f64>>,
    pub c7: Vec<Vec<f64>>,
}

impl Bt15Coefficients {
    fn all(&self) -> [&Vec<Vec<f64>>; 7] {
        [&self.c1, &self.c2, &self.c3, &self.c4, &self.c5, &self.c6, &self.c7]
    }
}

impl Bt15Table {
    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("BT15 table: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    /// Illustrative table shipped for exercising the machinery.
    pub fn example() -> Self {
        Self::from_json(EXAMPLE_BT15).expect("shipped BT15 example is valid")
    }

    fn validate(&self) -> Result<()> {
        let (nm, nr) = (self.magnitudes.len(), self.distances_km.len());
        if nm < 2 || nr < 2 {
            return Err(Error::validation(
                "BT15 table",
                "need at least 2 magnitudes and 2 distances",
            ));
        }
        if self.magnitudes.windows(2).any(|w| w[1] <= w[0]) || self.distances_km.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("BT15 table", "axes must be strictly ascending"));
        }
        if self.distances_km[0] <= 0.0 {
            return Err(Error::validation("BT15 table", "distances must be > 0"));
        }
        for c in self.coefficients.all() {
            if c.len() != nm || c.iter().any(|row| row.len() != nr) {
                return Err(Error::validation(
                    "BT15 table",
                    format!("each coefficient grid must be {nm} x {nr}"),
                ));
            }
        }
        Ok(())
    }

    /// Coefficients c1..c7 at (M, R): bilinear in M and ln R, with R clamped to
    /// the table and M above the table clamped to its largest magnitude.
    fn coefficients_at(&self, magnitude: f64, r_km: f64) -> Result<[f64; 7]> {
        let m_min = self.magnitudes[0];
        if magnitude < m_min {
            return Err(Error::ModelDomain(format!(
                "{} is not applicable below M {m_min} (got M {magnitude})",
                self.model
            )));
        }
        let (im, tm) = bracket(&self.magnitudes, magnitude);
        let lr: Vec<f64> = self.distances_km.iter().map(|r| r.ln()).collect();
        let (ir, tr) = bracket(&lr, r_km.max(1e-3).ln());
        let mut out = [0.0; 7];
        for (k, grid) in self.coefficients.all().iter().enumerate() {
            let v00 = grid[im][ir];
            let v01 = grid[im][ir + 1];
            let v10 = grid[im + 1][ir];
            let v11 = grid[im + 1][ir + 1];
            out[k] = (1.0 - tm) * ((1.0 - tr) * v00 + tr * v01) + tm * ((1.0 - tr) * v10 + tr * v11);
        }
        Ok(out)
    }

    /// D_rms / D_gm at η = T0/D_gm.
    pub fn ratio(&self, magnitude: f64, r_km: f64, eta: f64, zeta: f64) -> Result<f64> {
        let [c1, c2, c3, c4, c5, c6, c7] = self.coefficients_at(magnitude, r_km)?;
        let e3 = eta.powf(c3);
        let first = c1 + c2 * (1.0 - e3) / (1.0 + e3);
        let second = 1.0 + c4 / (2.0 * PI * zeta) * (eta / (1.0 + c5 * eta.powf(c6))).powf(c7);
        Ok(first * second)
    }
}

/// Index of the left bracket and the interpolation weight, clamped to the axis.
fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    let n = axis.len();
    if x <= axis[0] {
        return (0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let hi = axis.partition_point(|&a| a < x);
    let lo = hi - 1;
    (lo, (x - axis[lo]) / (axis[hi] - axis[lo]))
}

/// How D_rms is obtained from D_gm.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RmsDurationModel {
    /// D_o = T0/(2πζ) · γ³/(γ³ + 1/3), γ = D_gm/T0.
    #[default]
    ClosedForm,
    Bt15(Box<Bt15Table>),
}

impl RmsDurationModel {
    pub fn name(&self) -> &'static str {
        match self {
            RmsDurationModel::ClosedForm => "closed_form",
            RmsDurationModel::Bt15(_) => "bt15",
        }
    }
}

/// Oscillator-decay duration D_o of the closed-form correction.
pub fn oscillator_duration(d_gm: f64, osc: &Oscillator) -> f64 {
    let t0 = osc.period();
    let gamma = d_gm / t0;
    let g3 = gamma.powi(3);
    t0 / (2.0 * PI * osc.zeta()) * g3 / (g3 + 1.0 / 3.0)
}

/// D_rms in seconds; always at least D_gm.
pub fn rms_duration(d_gm: &DurationResult, osc: &Oscillator, scn: &Scenario, model: &RmsDurationModel) -> Result<f64> {
    let d = d_gm.d_gm;
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::validation("duration", format!("D_gm must be > 0, got {d}")));
    }
    match model {
        RmsDurationModel::ClosedForm => Ok(d + oscillator_duration(d, osc)),
        RmsDurationModel::Bt15(table) => {
            let ratio = table.ratio(scn.magnitude, scn.r_rup_km, osc.period() / d, osc.zeta())?;
            if !(ratio >= 1.0 && ratio.is_finite()) {
                return Err(Error::ModelDomain(format!(
                    "{} gives D_rms/D_gm = {ratio} < 1 at M {}, R {} km, T0 {} s",
                    table.model,
                    scn.magnitude,
                    scn.r_rup_km,
                    osc.period()
                )));
            }
            Ok(d * ratio)
        }
    }
}
