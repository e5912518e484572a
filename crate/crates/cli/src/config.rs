//! Run configuration loaded from `--config <json>`.

use std::path::Path;

use nergrvt_core::duration::{As96Coefficients, Bt15Table, RmsDurationModel};
use nergrvt_core::residuals::BinAxis;
use nergrvt_core::rvt_engine::{default_periods, DgmSource};
use nergrvt_core::spectra::StressDropTable;
use nergrvt_core::{CorrelationModel, RvtConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::read_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmsChoice {
    #[default]
    ClosedForm,
    Bt15,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    pub axis: BinAxis,
    pub edges: Vec<f64>,
}

/// Every option of a run. Absent keys take their defaults; unknown keys are
/// rejected so typos do not pass silently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub damping: f64,
    pub periods: Option<Vec<f64>>,
    /// Upper Arias fraction of the AS96 duration used as D_gm.
    pub dgm_fraction: f64,
    /// Fixed D_gm in seconds; overrides `dgm_fraction`.
    pub dgm_seconds: Option<f64>,
    pub rms_model: RmsChoice,
    /// Coefficient table for `rms_model = "bt15"`; the shipped example otherwise.
    pub bt15_table: Option<Bt15Table>,
    pub extrapolate: bool,
    pub low_hz: f64,
    pub high_hz: f64,
    pub pf_tolerance: f64,
    pub bandwidth_exponent: f64,
    pub kappa: Option<f64>,
    pub as96: Option<As96Coefficients>,
    pub stress_drop_table: Option<StressDropTable>,
    pub correlation: CorrelationModel,
    pub levels: Option<Vec<f64>>,
    pub truncation: Option<f64>,
    pub bins: Option<BinSpec>,
    pub smoothing_decades: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let rvt = RvtConfig::default();
        Self {
            damping: rvt.damping,
            periods: None,
            dgm_fraction: 0.85,
            dgm_seconds: None,
            rms_model: RmsChoice::ClosedForm,
            bt15_table: None,
            extrapolate: rvt.extrapolate,
            low_hz: rvt.low_hz,
            high_hz: rvt.high_hz,
            pf_tolerance: rvt.pf_tolerance,
            bandwidth_exponent: rvt.bandwidth_exponent,
            kappa: None,
            as96: None,
            stress_drop_table: None,
            correlation: CorrelationModel::default(),
            levels: None,
            truncation: None,
            bins: None,
            smoothing_decades: 1.0 / 3.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let cfg: Self = match path {
            Some(p) => read_json(p)?,
            None => Self::default(),
        };
        let label = path
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "default config".into());
        let rvt = cfg.rvt();
        rvt.validate().map_err(|e| CliError::Input {
            path: label.clone(),
            message: e.to_string(),
        })?;
        cfg.correlation.validate().map_err(|e| CliError::Input {
            path: label.clone(),
            message: e.to_string(),
        })?;
        if !(cfg.smoothing_decades > 0.0) {
            return Err(CliError::Input {
                path: label,
                message: "smoothing_decades must be > 0".into(),
            });
        }
        Ok(cfg)
    }

    /// Engine configuration with the defaults filled in.
    pub fn rvt(&self) -> RvtConfig {
        let base = RvtConfig::default();
        RvtConfig {
            damping: self.damping,
            periods: self.periods.clone().unwrap_or_else(default_periods),
            dgm: match self.dgm_seconds {
                Some(d) => DgmSource::User(d),
                None => DgmSource::As96 {
                    fraction: self.dgm_fraction,
                },
            },
            rms: match self.rms_model {
                RmsChoice::ClosedForm => RmsDurationModel::ClosedForm,
                RmsChoice::Bt15 => {
                    RmsDurationModel::Bt15(Box::new(self.bt15_table.clone().unwrap_or_else(Bt15Table::example)))
                }
            },
            extrapolate: self.extrapolate,
            low_hz: self.low_hz,
            high_hz: self.high_hz,
            pf_tolerance: self.pf_tolerance,
            bandwidth_exponent: self.bandwidth_exponent,
            as96: self.as96.clone().unwrap_or(base.as96),
            stress_drop: Some(self.stress_drop_table.clone().unwrap_or_else(StressDropTable::shipped)),
            kappa: self.kappa,
        }
    }

    /// Canonical JSON of the configuration, the basis of its digest.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }
}
