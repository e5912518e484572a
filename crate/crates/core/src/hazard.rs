//! Single-site hazard curves and logic-tree aggregation.

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{log_space, Scenario};

/// Tolerance on the sum of logic-tree weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Cumulative weights within this distance of p count as hitting it.
const QUANTILE_TIE_TOL: f64 = 1e-12;

/// Fractile probabilities reported by [`aggregate_tree`].
pub const FRACTILES: [f64; 4] = [0.02, 0.16, 0.84, 0.98];

/// Standard normal survival function.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// A rupture scenario with its annual rate and the lognormal ground motion
/// it produces at the site for the period of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub annual_rate: f64,
    /// Median ln PSA (g).
    pub median_ln: f64,
    /// Total standard deviation in ln units.
    pub sigma: f64,
}

impl ScenarioRate {
    pub fn new(annual_rate: f64, median_ln: f64, sigma: f64) -> Result<Self> {
        let s = Self {
            name: None,
            scenario: None,
            annual_rate,
            median_ln,
            sigma,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let label = self.name.as_deref().unwrap_or("scenario");
        if !(self.annual_rate > 0.0 && self.annual_rate.is_finite()) {
            return Err(Error::validation(
                label,
                format!("annual rate must be > 0, got {}", self.annual_rate),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::validation(
                label,
                format!("sigma must be > 0, got {}", self.sigma),
            ));
        }
        if !self.median_ln.is_finite() {
            return Err(Error::validation(label, "median ln PSA must be finite"));
        }
        Ok(())
    }

    /// Probability that the ground motion exceeds `level` (g).
    pub fn exceedance(&self, level: f64, truncation: Option<f64>) -> f64 {
        let z = (level.ln() - self.median_ln) / self.sigma;
        match truncation {
            None => normal_sf(z),
            Some(n) if z <= -n => 1.0,
            Some(n) if z >= n => 0.0,
            Some(n) => {
                let tail = normal_sf(n);
                ((normal_sf(z) - tail) / (1.0 - 2.0 * tail)).clamp(0.0, 1.0)
            }
        }
    }
}

/// Annual exceedance rates at ascending intensity levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardCurve {
    pub levels: Vec<f64>,
    pub rates: Vec<f64>,
}

/// 30 log-spaced levels over [0.001, 3] g.
pub fn default_levels() -> Vec<f64> {
    log_space(0.001, 3.0, 30)
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::validation("intensity levels", "need at least one level"));
    }
    if let Some(i) = levels.iter().position(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::ModelDomain(format!(
            "intensity level {} (index {i}) must be > 0",
            levels[i]
        )));
    }
    if levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::validation(
            "intensity levels",
            "levels must be strictly ascending",
        ));
    }
    Ok(())
}

/// rate(a) = Σ λᵢ·P(A > a | scenario i), optionally with the ground-motion
/// distribution truncated symmetrically at `truncation` standard deviations.
pub fn scenario_hazard(scns: &[ScenarioRate], levels: &[f64], truncation: Option<f64>) -> Result<HazardCurve> {
    if scns.is_empty() {
        return Err(Error::validation("scenario list", "need at least one scenario"));
    }
    check_levels(levels)?;
    if let Some(n) = truncation {
        if !(n > 0.0) {
            return Err(Error::validation(
                "truncation",
                format!("must be > 0 standard deviations, got {n}"),
            ));
        }
    }
    for s in scns {
        s.validate()?;
    }
    let rates = levels
        .iter()
        .map(|&a| scns.iter().map(|s| s.annual_rate * s.exceedance(a, truncation)).sum())
        .collect();
    Ok(HazardCurve {
        levels: levels.to_vec(),
        rates,
    })
}

impl HazardCurve {
    /// Level with annual exceedance rate 1/`return_period`, interpolated
    /// linearly in log-log space.
    pub fn level_at_return_period(&self, return_period: f64) -> Result<f64> {
        if !(return_period > 0.0) {
            return Err(Error::validation("return period", "must be > 0"));
        }
        let target = 1.0 / return_period;
        for (w, l) in self.rates.windows(2).zip(self.levels.windows(2)) {
            let (r0, r1) = (w[0], w[1]);
            if r0 >= target && target >= r1 && r1 > 0.0 {
                if r0 == r1 {
                    return Ok(l[0]);
                }
                let t = (target / r0).ln() / (r1 / r0).ln();
                return Ok((l[0].ln() + t * (l[1] / l[0]).ln()).exp());
            }
        }
        Err(Error::ModelDomain(format!(
            "rate {target:.3e} is outside the curve's positive range"
        )))
    }

    /// Rate at `level`, interpolated linearly in log-log space.
    pub fn rate_at(&self, level: f64) -> Result<f64> {
        let l = &self.levels;
        if !(level >= l[0] && level <= l[l.len() - 1]) {
            return Err(Error::ModelDomain(format!(
                "level {level} outside [{}, {}]",
                l[0],
                l[l.len() - 1]
            )));
        }
        let hi = l.partition_point(|&x| x < level).max(1);
        if l[hi] == level {
            return Ok(self.rates[hi]);
        }
        let (r0, r1) = (self.rates[hi - 1], self.rates[hi]);
        if r0 <= 0.0 || r1 <= 0.0 {
            return Err(Error::ModelDomain("log-log interpolation through a zero rate".into()));
        }
        let t = (level / l[hi - 1]).ln() / (l[hi] / l[hi - 1]).ln();
        Ok((r0.ln() + t * (r1 / r0).ln()).exp())
    }
}

/// One logic-tree branch: a backbone model combined with a sampled factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub weight: f64,
    pub backbone: String,
    pub realization: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogicTree {
    pub branches: Vec<Branch>,
}

impl LogicTree {
    pub fn new(branches: Vec<Branch>) -> Result<Self> {
        let t = Self { branches };
        t.validate()?;
        Ok(t)
    }

    /// Equal weights over `n` realizations of a single backbone.
    pub fn uniform(backbone: &str, n: usize) -> Result<Self> {
        Self::new(
            (0..n)
                .map(|realization| Branch {
                    weight: 1.0 / n as f64,
                    backbone: backbone.to_string(),
                    realization,
                })
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::validation("logic tree", "need at least one branch"));
        }
        if let Some(i) = self.branches.iter().position(|b| !(b.weight > 0.0)) {
            return Err(Error::validation(
                "logic tree",
                format!("branch {i}: weight must be > 0"),
            ));
        }
        let sum: f64 = self.branches.iter().map(|b| b.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::validation(
                "logic tree",
                format!("weights must sum to 1, got {sum:.15}"),
            ));
        }
        Ok(())
    }
}

/// Weighted quantile of `values` at probability `p`.
///
/// With F the weighted empirical CDF, the quantile is the average of the
/// left-continuous inverse min{v : F(v) ≥ p} and the right-continuous inverse
/// min{v : F(v) > p}. The two differ only where p hits a cumulative weight
/// exactly, in which case the result lies midway between the adjacent branch
/// values (so an equal-weight median of an even set is the usual midpoint).
/// Both inverses are non-decreasing in p and in every branch value, so
/// aggregated fractile curves inherit the monotonicity of the branch curves.
pub fn weighted_quantile(values: &[f64], weights: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() || values.len() != weights.len() {
        return Err(Error::Alignment(format!(
            "{} values and {} weights",
            values.len(),
            weights.len()
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::validation(
            "quantile",
            format!("probability must lie in [0, 1], got {p}"),
        ));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let mut cum = 0.0;
    let cdf: Vec<f64> = order
        .iter()
        .map(|&i| {
            cum += weights[i] / total;
            cum
        })
        .collect();
    let last = order.len() - 1;
    let pick = |k: Option<usize>| values[order[k.unwrap_or(last)]];
    let lower = pick(cdf.iter().position(|&c| c >= p - QUANTILE_TIE_TOL));
    let upper = pick(cdf.iter().position(|&c| c > p + QUANTILE_TIE_TOL));
    Ok(0.5 * (lower + upper))
}

/// Mean, median and fractile curves over logic-tree branches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardSummary {
    pub levels: Vec<f64>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub p02: Vec<f64>,
    pub p16: Vec<f64>,
    pub p84: Vec<f64>,
    pub p98: Vec<f64>,
}

/// Per-level weighted mean and weighted quantiles of branch rates.
pub fn aggregate_tree(tree: &LogicTree, curves: &[HazardCurve]) -> Result<HazardSummary> {
    tree.validate()?;
    if tree.branches.len() != curves.len() {
        return Err(Error::Alignment(format!(
            "logic tree has {} branches but {} curves were given",
            tree.branches.len(),
            curves.len()
        )));
    }
    let levels = curves[0].levels.clone();
    if let Some(i) = curves
        .iter()
        .position(|c| c.levels != levels || c.rates.len() != levels.len())
    {
        return Err(Error::Alignment(format!(
            "curve {i} does not share the level grid of curve 0"
        )));
    }
    let weights: Vec<f64> = tree.branches.iter().map(|b| b.weight).collect();
    let nl = levels.len();
    let mut out = HazardSummary {
        levels,
        mean: Vec::with_capacity(nl),
        median: Vec::with_capacity(nl),
        p02: Vec::with_capacity(nl),
        p16: Vec::with_capacity(nl),
        p84: Vec::with_capacity(nl),
        p98: Vec::with_capacity(nl),
    };
    for j in 0..nl {
        let rates: Vec<f64> = curves.iter().map(|c| c.rates[j]).collect();
        out.mean.push(rates.iter().zip(&weights).map(|(r, w)| r * w).sum());
        out.median.push(weighted_quantile(&rates, &weights, 0.5)?);
        out.p02.push(weighted_quantile(&rates, &weights, FRACTILES[0])?);
        out.p16.push(weighted_quantile(&rates, &weights, FRACTILES[1])?);
        out.p84.push(weighted_quantile(&rates, &weights, FRACTILES[2])?);
        out.p98.push(weighted_quantile(&rates, &weights, FRACTILES[3])?);
    }
    Ok(out)
}
