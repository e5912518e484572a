//! Subcommand implementations. Each returns its CSV outputs in canonical
//! order; writing and the manifest are handled by the caller.

use std::collections::BTreeMap;
use std::path::Path;

use nergrvt_core::hazard::{aggregate_tree, default_levels, scenario_hazard, HazardCurve, LogicTree, ScenarioRate};
use nergrvt_core::nonergodic::{aleatory_sigma, fnerg_realizations, realization_summary, smooth_dc0, FnergResult};
use nergrvt_core::residuals::{binned_stats, decompose, Decomposition};
use nergrvt_core::rvt_engine::extend_spectrum;
use nergrvt_core::{fnerg_factor, psa_spectrum, sample_field, CorrelationModel, Scenario};
use serde::Deserialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{self, fmt_num, CsvOut, EAS_HEADER, FNERG_HEADER, HAZARD_HEADER, PSA_HEADER};

fn read_scenario(path: &Path) -> CliResult<Scenario> {
    let scn: Scenario = io::read_json(path)?;
    scn.validate().map_err(|e| CliError::in_file(path, e))?;
    Ok(scn)
}

pub fn psa(eas: &Path, scenario: &Path, cfg: &RunConfig) -> CliResult<Vec<CsvOut>> {
    let spec = io::read_eas(eas)?;
    let scn = read_scenario(scenario)?;
    let out = psa_spectrum(&spec, &scn, &cfg.rvt())?;
    let mut csv = CsvOut::new("psa.csv", &PSA_HEADER);
    for d in &out.diagnostics {
        csv.push_nums(None, &[d.period, d.psa, d.m0, d.delta, d.n_z, d.pf, d.d_gm, d.d_rms]);
    }
    Ok(vec![csv])
}

pub fn extrapolate(eas: &Path, scenario: &Path, cfg: &RunConfig) -> CliResult<Vec<CsvOut>> {
    let spec = io::read_eas(eas)?;
    let scn = read_scenario(scenario)?;
    let mut rvt = cfg.rvt();
    rvt.extrapolate = true;
    let ext = extend_spectrum(&spec, &scn, &rvt)?;
    let mut csv = CsvOut::new("eas_extended.csv", &EAS_HEADER);
    for (&f, &a) in ext.freqs().iter().zip(ext.amps()) {
        csv.push_nums(None, &[f, a]);
    }
    Ok(vec![csv])
}

/// Where the non-ergodic leg of `fnerg` comes from.
pub enum NergSource<'a> {
    Spectrum(&'a Path),
    Field {
        path: &'a Path,
        correlation: CorrelationModel,
        samples: usize,
        seed: u64,
    },
}

fn push_fnerg(csv: &mut CsvOut, label: String, periods: &[f64], values: &[f64]) {
    for (&t, &v) in periods.iter().zip(values) {
        csv.rows.push(vec![label.clone(), fmt_num(t), fmt_num(v)]);
    }
}

pub fn fnerg(erg: &Path, nerg: NergSource<'_>, scenario: &Path, cfg: &RunConfig) -> CliResult<Vec<CsvOut>> {
    let e = io::read_eas(erg)?;
    let scn = read_scenario(scenario)?;
    let rvt = cfg.rvt();
    let results = match nerg {
        NergSource::Spectrum(p) => {
            let n = io::read_eas(p)?;
            let mut r = fnerg_factor(&e, &n, &scn, &rvt)?;
            r.realization = Some(0);
            vec![r]
        }
        NergSource::Field {
            path,
            correlation,
            samples,
            seed,
        } => {
            if samples == 0 {
                return Err(CliError::Usage("--samples must be at least 1".into()));
            }
            let field = io::read_field(path, correlation)?;
            fnerg_realizations(&e, &field, samples, seed, &scn, &rvt)?
        }
    };
    let mut csv = CsvOut::new("fnerg.csv", &FNERG_HEADER);
    for r in &results {
        push_fnerg(&mut csv, r.realization.unwrap_or(0).to_string(), &r.periods, &r.values);
    }
    let (mean, sd) = realization_summary(&results)?;
    push_fnerg(&mut csv, "mean".into(), &rvt.periods, &mean);
    push_fnerg(&mut csv, "sd".into(), &rvt.periods, &sd);
    Ok(vec![csv])
}

pub fn sample(field: &Path, correlation: CorrelationModel, samples: usize, seed: u64) -> CliResult<Vec<CsvOut>> {
    if samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let field = io::read_field(field, correlation)?;
    let draws = sample_field(&field, samples, seed)?;
    let mut csv = CsvOut::new("samples.csv", &["realization", "frequency_hz", "ln_adjustment"]);
    for (i, d) in draws.iter().enumerate() {
        for (&f, &v) in field.grid.as_slice().iter().zip(d) {
            csv.rows.push(vec![i.to_string(), fmt_num(f), fmt_num(v)]);
        }
    }
    Ok(vec![csv])
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn decompose_cmd(residuals: &Path, period: Option<f64>, cfg: &RunConfig) -> CliResult<Vec<CsvOut>> {
    let tbl = io::read_residuals(residuals)?;
    let periods = match period {
        Some(p) => vec![p],
        None => tbl.periods(),
    };
    let fits: Vec<Decomposition> = periods
        .iter()
        .map(|&p| decompose(&tbl, p).map_err(|e| CliError::in_file(residuals, e)))
        .collect::<CliResult<_>>()?;
    let dc0: Vec<f64> = fits.iter().map(|d| d.dc0).collect();
    let smoothed = if fits.len() > 1 {
        smooth_dc0(&periods, &dc0, cfg.smoothing_decades)?
    } else {
        dc0.clone()
    };

    let mut summary = CsvOut::new(
        "decomposition.csv",
        &[
            "period_s",
            "dc0",
            "dc0_smoothed",
            "tau0",
            "phi0",
            "events",
            "records",
            "degenerate",
        ],
    );
    let mut events = CsvOut::new(
        "event_terms.csv",
        &[
            "period_s",
            "event_id",
            "magnitude",
            "records",
            "mean_residual",
            "delta_b",
        ],
    );
    let mut records = CsvOut::new(
        "record_terms.csv",
        &[
            "period_s",
            "event_id",
            "station_id",
            "magnitude",
            "r_rup_km",
            "vs30_ms",
            "residual_ln",
            "delta_b",
            "delta_ws",
        ],
    );
    let mut bins = CsvOut::new(
        "binned.csv",
        &[
            "period_s", "lo", "hi", "records", "events", "db_mean", "db_sd", "dws_mean", "dws_sd",
        ],
    );
    for (d, s) in fits.iter().zip(&smoothed) {
        let t = fmt_num(d.period_s);
        summary.rows.push(vec![
            t.clone(),
            fmt_num(d.dc0),
            fmt_num(*s),
            fmt_num(d.tau0),
            fmt_num(d.phi0),
            d.events.len().to_string(),
            d.records.len().to_string(),
            d.degenerate.to_string(),
        ]);
        for e in &d.events {
            events.rows.push(vec![
                t.clone(),
                e.event_id.clone(),
                fmt_num(e.magnitude),
                e.records.to_string(),
                fmt_num(e.mean_residual),
                fmt_num(e.delta_b),
            ]);
        }
        for r in &d.records {
            records.rows.push(vec![
                t.clone(),
                r.event_id.clone(),
                r.station_id.clone(),
                fmt_num(r.magnitude),
                fmt_num(r.r_rup_km),
                fmt_num(r.vs30_ms),
                fmt_num(r.residual_ln),
                fmt_num(r.delta_b),
                fmt_num(r.delta_ws),
            ]);
        }
        if let Some(spec) = &cfg.bins {
            for b in binned_stats(d, spec.axis, &spec.edges)? {
                bins.rows.push(vec![
                    t.clone(),
                    fmt_num(b.lo),
                    fmt_num(b.hi),
                    b.records.to_string(),
                    b.events.to_string(),
                    opt(b.db_mean),
                    opt(b.db_sd),
                    opt(b.dws_mean),
                    opt(b.dws_sd),
                ]);
            }
        }
    }
    let mut out = vec![summary, events, records];
    if cfg.bins.is_some() {
        out.push(bins);
    }
    Ok(out)
}

/// Scenario file of the `hazard` command.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HazardInput {
    /// Period at which the medians and sigmas apply.
    pub period_s: f64,
    /// Scenario sets keyed by backbone id.
    pub backbones: BTreeMap<String, Vec<ScenarioRate>>,
}

/// F_nerg of one realization at `period`, linear in ln T.
fn factor_at(r: &FnergResult, period: f64) -> Option<f64> {
    let p = &r.periods;
    let eps = 1e-9;
    if period < p[0] * (1.0 - eps) || period > p[p.len() - 1] * (1.0 + eps) {
        return None;
    }
    if let Some(i) = p.iter().position(|&x| (x / period - 1.0).abs() <= eps) {
        return Some(r.values[i]);
    }
    let hi = p.partition_point(|&x| x < period);
    let t = (period / p[hi - 1]).ln() / (p[hi] / p[hi - 1]).ln();
    Some(r.values[hi - 1] + t * (r.values[hi] - r.values[hi - 1]))
}

pub fn hazard(
    scenarios: &Path,
    branches: &Path,
    fnerg: Option<&Path>,
    aleatory: Option<&Path>,
    cfg: &RunConfig,
) -> CliResult<Vec<CsvOut>> {
    let input: HazardInput = io::read_json(scenarios)?;
    if !(input.period_s > 0.0) {
        return Err(CliError::input(scenarios, "period_s must be > 0"));
    }
    for (id, list) in &input.backbones {
        for (i, s) in list.iter().enumerate() {
            s.validate()
                .map_err(|e| CliError::input(scenarios, format!("backbone `{id}`, scenario {i}: {e}")))?;
        }
    }
    let branch_list: Vec<nergrvt_core::hazard::Branch> = io::read_json(branches)?;
    let tree = LogicTree::new(branch_list).map_err(|e| CliError::in_file(branches, e))?;
    let factors = fnerg.map(io::read_fnerg).transpose()?;
    let coeffs = aleatory.map(io::read_aleatory).transpose()?;
    let levels = cfg.levels.clone().unwrap_or_else(default_levels);

    let mut curves: Vec<HazardCurve> = Vec::with_capacity(tree.branches.len());
    for (i, b) in tree.branches.iter().enumerate() {
        let scns = input
            .backbones
            .get(&b.backbone)
            .ok_or_else(|| CliError::input(branches, format!("branch {i}: unknown backbone `{}`", b.backbone)))?;
        let shift = match (&factors, fnerg) {
            (Some(fs), Some(path)) => {
                let r = fs
                    .iter()
                    .find(|r| r.realization == Some(b.realization))
                    .ok_or_else(|| {
                        CliError::input(path, format!("branch {i}: realization {} not present", b.realization))
                    })?;
                factor_at(r, input.period_s).ok_or_else(|| {
                    CliError::input(
                        path,
                        format!("period {} s outside the factor's period range", input.period_s),
                    )
                })?
            }
            _ if b.realization != 0 => {
                return Err(CliError::input(
                    branches,
                    format!("branch {i}: realization {} requires --fnerg", b.realization),
                ))
            }
            _ => 0.0,
        };
        let adjusted = scns
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let mut s = s.clone();
                s.median_ln += shift;
                if let (Some(c), Some(path)) = (&coeffs, aleatory) {
                    let m = s.scenario.as_ref().map(|x| x.magnitude).ok_or_else(|| {
                        CliError::input(
                            scenarios,
                            format!(
                                "backbone `{}`, scenario {k}: magnitude needed for the aleatory model",
                                b.backbone
                            ),
                        )
                    })?;
                    let sig = aleatory_sigma(m, input.period_s, c).map_err(|e| CliError::in_file(path, e))?;
                    s.sigma = sig.sigma0;
                    s.median_ln += c.at(input.period_s).map_err(|e| CliError::in_file(path, e))?.dc0;
                }
                Ok(s)
            })
            .collect::<CliResult<Vec<_>>>()?;
        curves.push(scenario_hazard(&adjusted, &levels, cfg.truncation)?);
    }
    let agg = aggregate_tree(&tree, &curves)?;
    let mut csv = CsvOut::new("hazard.csv", &HAZARD_HEADER);
    for j in 0..agg.levels.len() {
        csv.push_nums(
            None,
            &[
                agg.levels[j],
                agg.mean[j],
                agg.median[j],
                agg.p02[j],
                agg.p16[j],
                agg.p84[j],
                agg.p98[j],
            ],
        );
    }
    Ok(vec![csv])
}
