//! Constant shift and two-level random-effects partition of total residuals.
//!
//! Each total residual is split as ε = δc₀ + δB + δWS. Variance components
//! are estimated per period:
//!
//! * φ₀² is the pooled within-event variance, Σ(ε − ȳₑ)² / (N − k);
//! * τ₀² solves the maximum-likelihood fixed point on event means,
//!   τ² = Σ wₑ²((ȳₑ − c)² − vₑ) / Σ wₑ², with vₑ = φ₀²/nₑ and wₑ = 1/(τ² + vₑ);
//! * δc₀ = c is the precision-weighted mean of event means;
//! * δBₑ = τ²/(τ² + vₑ)·(ȳₑ − c), the shrunken event mean;
//! * δWS is the remainder, so the partition is exact by construction.
//!
//! With shrinkage, δWS within an event averages (1 − sₑ)(ȳₑ − c) rather than
//! zero; it vanishes as records per event grow.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convergence tolerance on τ² between fixed-point iterations.
pub const FIXED_POINT_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 10_000;
const PERIOD_RTOL: f64 = 1e-9;

/// One record of a residual flatfile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub event_id: String,
    pub station_id: String,
    pub magnitude: f64,
    pub r_rup_km: f64,
    pub vs30_ms: f64,
    pub period_s: f64,
    pub residual_ln: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResidualTable {
    rows: Vec<ResidualRow>,
}

impl ResidualTable {
    pub fn new(rows: Vec<ResidualRow>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.event_id.is_empty() {
                return Err(Error::validation(
                    "residual table",
                    format!("row {i}: event_id is empty"),
                ));
            }
            let fields = [
                ("magnitude", r.magnitude),
                ("r_rup_km", r.r_rup_km),
                ("vs30_ms", r.vs30_ms),
                ("period_s", r.period_s),
                ("residual_ln", r.residual_ln),
            ];
            if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::validation(
                    "residual table",
                    format!("row {i}: {name} must be finite"),
                ));
            }
            if !(r.period_s > 0.0) {
                return Err(Error::validation(
                    "residual table",
                    format!("row {i}: period_s must be > 0"),
                ));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ResidualRow] {
        &self.rows
    }

    /// Distinct periods, ascending.
    pub fn periods(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.rows.iter().map(|r| r.period_s).collect();
        p.sort_by(f64::total_cmp);
        p.dedup_by(|a, b| same_period(*a, *b));
        p
    }
}

fn same_period(a: f64, b: f64) -> bool {
    (a / b - 1.0).abs() <= PERIOD_RTOL
}

/// Event-level terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventTerm {
    pub event_id: String,
    pub magnitude: f64,
    pub records: usize,
    pub mean_residual: f64,
    pub delta_b: f64,
}

/// Record-level terms, in input row order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordTerm {
    pub event_id: String,
    pub station_id: String,
    pub magnitude: f64,
    pub r_rup_km: f64,
    pub vs30_ms: f64,
    pub residual_ln: f64,
    pub delta_b: f64,
    pub delta_ws: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub period_s: f64,
    pub dc0: f64,
    pub tau0: f64,
    pub phi0: f64,
    /// Events sorted by id.
    pub events: Vec<EventTerm>,
    pub records: Vec<RecordTerm>,
    /// Set when the within-event variance is zero; weights then reduce to
    /// equal weights and no shrinkage is applied.
    pub degenerate: bool,
    pub iterations: usize,
}

/// Fits δc₀, δB, δWS, τ₀ and φ₀ to the rows of `tbl` at `period`.
pub fn decompose(tbl: &ResidualTable, period: f64) -> Result<Decomposition> {
    let rows: Vec<&ResidualRow> = tbl.rows.iter().filter(|r| same_period(r.period_s, period)).collect();
    if rows.is_empty() {
        return Err(Error::validation(
            "residual table",
            format!("no rows at period {period} s"),
        ));
    }

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry(r.event_id.as_str()).or_default().push(i);
    }
    let k = groups.len();
    if k < 2 {
        return Err(Error::Unidentifiable(format!(
            "variance components unidentifiable: period {period} s has a single event"
        )));
    }
    if groups.values().all(|g| g.len() < 2) {
        return Err(Error::Unidentifiable(format!(
            "variance components unidentifiable: no event at period {period} s has two or more records"
        )));
    }
    for (id, idx) in &groups {
        let m = rows[idx[0]].magnitude;
        if let Some(&j) = idx.iter().find(|&&j| rows[j].magnitude != m) {
            return Err(Error::validation(
                "residual table",
                format!(
                    "event {id}: magnitude {} differs from {m} (row {j} at this period)",
                    rows[j].magnitude
                ),
            ));
        }
    }

    let n_rec = rows.len();
    let counts: Vec<f64> = groups.values().map(|g| g.len() as f64).collect();
    let means: Vec<f64> = groups
        .values()
        .map(|g| g.iter().map(|&i| rows[i].residual_ln).sum::<f64>() / g.len() as f64)
        .collect();
    let ss_within: f64 = groups
        .values()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|&i| (rows[i].residual_ln - m).powi(2)).sum::<f64>())
        .sum();
    let phi2 = ss_within / (n_rec - k) as f64;
    // Within-event scatter at rounding level counts as none.
    let scale = rows.iter().fold(0.0f64, |m, r| m.max(r.residual_ln.abs()));
    let degenerate = phi2.sqrt() <= 16.0 * f64::EPSILON * scale;
    let phi2 = if degenerate { 0.0 } else { phi2 };

    let (c, tau2, shrink, iterations) = if degenerate {
        let c = means.iter().sum::<f64>() / k as f64;
        let tau2 = means.iter().map(|m| (m - c).powi(2)).sum::<f64>() / k as f64;
        (c, tau2, vec![1.0; k], 0)
    } else {
        let v: Vec<f64> = counts.iter().map(|n| phi2 / n).collect();
        let weighted_center = |tau2: f64| {
            let w: Vec<f64> = v.iter().map(|v| 1.0 / (tau2 + v)).collect();
            let sw: f64 = w.iter().sum();
            let c = w.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>() / sw;
            (w, c)
        };
        // Moment start: spread of event means less their sampling variance.
        let mbar = means.iter().sum::<f64>() / k as f64;
        let mut tau2 = (means.iter().map(|m| (m - mbar).powi(2)).sum::<f64>() / (k - 1) as f64
            - v.iter().sum::<f64>() / k as f64)
            .max(0.0);
        let mut iterations = 0;
        loop {
            iterations += 1;
            let (w, c) = weighted_center(tau2);
            let num: f64 = w
                .iter()
                .zip(&means)
                .zip(&v)
                .map(|((w, m), v)| w * w * ((m - c).powi(2) - v))
                .sum();
            let den: f64 = w.iter().map(|w| w * w).sum();
            let next = (num / den).max(0.0);
            let done = (next - tau2).abs() < FIXED_POINT_TOL;
            tau2 = next;
            if done {
                break;
            }
            if iterations >= MAX_ITERATIONS {
                return Err(Error::Numerical(format!(
                    "tau^2 fixed point did not converge at period {period} s"
                )));
            }
        }
        let (_, c) = weighted_center(tau2);
        let shrink = v.iter().map(|v| tau2 / (tau2 + v)).collect();
        (c, tau2, shrink, iterations)
    };

    let mut event_db = vec![0.0; n_rec];
    let events: Vec<EventTerm> = groups
        .iter()
        .zip(&means)
        .zip(&shrink)
        .map(|(((id, idx), &m), &s)| {
            let db = s * (m - c);
            for &i in idx {
                event_db[i] = db;
            }
            EventTerm {
                event_id: id.to_string(),
                magnitude: rows[idx[0]].magnitude,
                records: idx.len(),
                mean_residual: m,
                delta_b: db,
            }
        })
        .collect();

    let records = rows
        .iter()
        .zip(&event_db)
        .map(|(r, &db)| RecordTerm {
            event_id: r.event_id.clone(),
            station_id: r.station_id.clone(),
            magnitude: r.magnitude,
            r_rup_km: r.r_rup_km,
            vs30_ms: r.vs30_ms,
            residual_ln: r.residual_ln,
            delta_b: db,
            delta_ws: r.residual_ln - c - db,
        })
        .collect();

    Ok(Decomposition {
        period_s: period,
        dc0: c,
        tau0: tau2.sqrt(),
        phi0: phi2.sqrt(),
        events,
        records,
        degenerate,
        iterations,
    })
}

/// Binning variable for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinAxis {
    Magnitude,
    RRup,
    Vs30,
}

impl BinAxis {
    fn value(&self, r: &RecordTerm) -> f64 {
        match self {
            BinAxis::Magnitude => r.magnitude,
            BinAxis::RRup => r.r_rup_km,
            BinAxis::Vs30 => r.vs30_ms,
        }
    }
}

/// Statistics of one bin. Standard deviations use n − 1 and are `None` with
/// fewer than two members; all statistics are `None` for an empty bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinStats {
    pub lo: f64,
    pub hi: f64,
    pub records: usize,
    pub events: usize,
    pub db_mean: Option<f64>,
    pub db_sd: Option<f64>,
    pub dws_mean: Option<f64>,
    pub dws_sd: Option<f64>,
}

fn mean_sd(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(m), sd)
}

/// Per-bin mean and standard deviation of δB and δWS along `axis`.
///
/// Bins are half-open `[lo, hi)` except the last, which is closed. δB
/// statistics count each event once (an event belongs to the bin of its
/// first record along the axis, which for magnitude is its own magnitude);
/// δWS statistics count records.
pub fn binned_stats(dec: &Decomposition, axis: BinAxis, edges: &[f64]) -> Result<Vec<BinStats>> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::validation(
            "bin edges",
            "need at least two strictly ascending edges",
        ));
    }
    let nb = edges.len() - 1;
    let locate = |x: f64| -> Option<usize> {
        if x < edges[0] || x > edges[nb] {
            return None;
        }
        Some((edges.partition_point(|&e| e <= x) - 1).min(nb - 1))
    };
    let mut dws: Vec<Vec<f64>> = vec![Vec::new(); nb];
    let mut db: Vec<Vec<f64>> = vec![Vec::new(); nb];
    let mut seen = std::collections::BTreeSet::new();
    for (i, r) in dec.records.iter().enumerate() {
        let x = axis.value(r);
        let b = locate(x).ok_or_else(|| {
            Error::validation(
                "bin edges",
                format!(
                    "record {i} ({}) value {x} lies outside [{}, {}]",
                    r.event_id, edges[0], edges[nb]
                ),
            )
        })?;
        dws[b].push(r.delta_ws);
        if seen.insert(r.event_id.as_str()) {
            db[b].push(r.delta_b);
        }
    }
    Ok((0..nb)
        .map(|b| {
            let (db_mean, db_sd) = mean_sd(&db[b]);
            let (dws_mean, dws_sd) = mean_sd(&dws[b]);
            BinStats {
                lo: edges[b],
                hi: edges[b + 1],
                records: dws[b].len(),
                events: db[b].len(),
                db_mean,
                db_sd,
                dws_mean,
                dws_sd,
            }
        })
        .collect())
}
